"""Independent oracles used by the tests.

These deliberately avoid the library's code paths: the SPRT absorption
probability is computed by a dynamic program over a quantized
log-likelihood-ratio lattice, not by simulation.
"""

import numpy as np


def sprt_decision_probability(pmf_h0, pmf_h1, h, alpha=0.05, beta=0.05,
                              max_samples=10_000, grid=1e-4):
    """P(decide 1 | h) for Wald's SPRT, by lattice dynamic programming.

    The per-sample log-likelihood increments are rounded to a grid of width
    ``grid``; probability mass is propagated until absorbed at either
    boundary (or decided by sign at the sample cap). Quantization bias is
    O(grid * typical stopping time), far below the 1e-2 tolerances used in
    the tests. Requires increments to be finite.
    """
    p0 = np.asarray(pmf_h0, dtype=float)
    p1 = np.asarray(pmf_h1, dtype=float)
    incr = np.log(p1) - np.log(p0)
    if not np.all(np.isfinite(incr)):
        raise ValueError("lattice oracle requires finite increments")
    upper = np.log((1.0 - beta) / alpha)
    lower = np.log(beta / (1.0 - alpha))
    sample_pmf = p1 if h else p0

    steps = np.round(incr / grid).astype(np.int64)
    up_bin = int(np.ceil(upper / grid))
    dn_bin = int(np.floor(lower / grid))
    pad = int(np.max(np.abs(steps))) + 1
    lo = dn_bin - pad
    hi = up_bin + pad
    size = hi - lo + 1
    mass = np.zeros(size)

    mass[-lo] = 1.0  # start at llr = 0
    absorbed_up = 0.0
    sign_positive = 0.0

    bins = np.arange(lo, hi + 1)
    live = (bins * grid < upper) & (bins * grid > lower)
    for _ in range(max_samples):
        new = np.zeros(size)
        for k, s in enumerate(steps):
            if sample_pmf[k] == 0.0:
                continue
            if s >= 0:
                new[s:] += mass[: size - s] * sample_pmf[k]
            else:
                new[:s] += mass[-s:] * sample_pmf[k]
        absorbed_up += np.sum(new[bins * grid >= upper])
        new[~live] = 0.0
        mass = new
        remaining = mass.sum()
        if remaining < 1e-13:
            break
    # cap: remaining mass decides by sign (> 0 -> 1)
    sign_positive = np.sum(mass[bins * grid > 0])
    return absorbed_up + sign_positive


def two_proportion_z(pa, na, pb, nb):
    """Pooled two-proportion z, written independently of the library."""
    pool = (pa * na + pb * nb) / (na + nb)
    return (pa - pb) / np.sqrt(pool * (1 - pool) * (1 / na + 1 / nb))
