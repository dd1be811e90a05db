"""Empirical statistics over simulated runs: ordered conditionals, order-effect
tests, per-order outcome distributions, and a fitted two-level model.

A count table indexes full decision sequences by (realized collection order,
decisions in that order) per hypothesis. Composition labels follow the
convention that in ``T_A . T_B`` the right factor B is the event conditioned
on first, so the table row labelled ``T_E1.T_E2`` counts runs where observer
2's decision arrived before observer 1's.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations, product
from math import sqrt

import numpy as np

from .errors import EmptyTable, InsufficientData, ZeroDenominator
from .linalg import projector_from_angle
from .simulate import collection_order


@dataclass
class CountTable:
    """Counts of full ordered decision sequences, per hypothesis.

    Keys are ((observer ids in collection order), (decisions in that order)).
    Counting is a commutative monoid: tables built by independent shards can
    be merged with ``+``.
    """

    counts: dict = field(default_factory=lambda: {0: {}, 1: {}})
    totals: dict = field(default_factory=lambda: {0: 0, 1: 0})

    @classmethod
    def from_arrays(cls, h, decisions, stop_times, preference=(2, 1, 3)) -> "CountTable":
        order = collection_order(np.asarray(stop_times), preference)
        n = order.shape[1]
        # encode (hypothesis, order permutation, ordered decisions) as one int
        perms = list(permutations(range(n)))
        perm_index = {p: i for i, p in enumerate(perms)}
        weights = np.array([n ** k for k in range(n)], dtype=np.int64)
        perm_key = order @ weights
        lookup = np.full(int(weights.sum() * (n - 1) + 1), -1, dtype=np.int64)
        for p, i in perm_index.items():
            lookup[int(np.dot(p, weights))] = i
        perm_codes = lookup[perm_key]
        dec = np.asarray(decisions)
        ordered_dec = np.take_along_axis(dec, order, axis=1).astype(np.int64)
        dec_codes = ordered_dec @ (1 << np.arange(n - 1, -1, -1, dtype=np.int64))
        h = np.asarray(h).astype(np.int64)
        code = (h * len(perms) + perm_codes) * (1 << n) + dec_codes
        binned = np.bincount(code, minlength=2 * len(perms) * (1 << n))
        table = cls()
        for hv in (0, 1):
            for pi, perm in enumerate(perms):
                for d in range(1 << n):
                    c = int(binned[(hv * len(perms) + pi) * (1 << n) + d])
                    if c:
                        obs_order = tuple(int(o) + 1 for o in perm)
                        bits = tuple((d >> k) & 1 for k in range(n - 1, -1, -1))
                        table.counts[hv][(obs_order, bits)] = c
            table.totals[hv] = int(np.sum(h == hv))
        return table

    @classmethod
    def from_records(cls, records) -> "CountTable":
        table = cls()
        for rec in records:
            key = (rec.observer_order, tuple(d for _, d in rec.decisions))
            table.counts[rec.h][key] = table.counts[rec.h].get(key, 0) + 1
            table.totals[rec.h] += 1
        return table

    def __add__(self, other: "CountTable") -> "CountTable":
        merged = CountTable()
        for hv in (0, 1):
            for src in (self, other):
                for key, c in src.counts[hv].items():
                    merged.counts[hv][key] = merged.counts[hv].get(key, 0) + c
            merged.totals[hv] = self.totals[hv] + other.totals[hv]
        return merged

    def sequences(self, h: int):
        return self.counts[h].items()

    @staticmethod
    def _key_to_string(key) -> str:
        obs_order, bits = key
        return ",".join(f"D{o}={d}" for o, d in zip(obs_order, bits))

    @staticmethod
    def _string_to_key(text: str):
        obs_order, bits = [], []
        for part in text.split(","):
            name, val = part.split("=")
            obs_order.append(int(name.lstrip("D")))
            bits.append(int(val))
        return tuple(obs_order), tuple(bits)

    def to_dict(self) -> dict:
        return {
            "totals": {"h0": self.totals[0], "h1": self.totals[1]},
            "counts": {
                f"h{hv}": {self._key_to_string(k): c for k, c in self.counts[hv].items()}
                for hv in (0, 1)
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "CountTable":
        table = cls()
        for hv in (0, 1):
            table.totals[hv] = int(payload["totals"][f"h{hv}"])
            for text, c in payload["counts"][f"h{hv}"].items():
                table.counts[hv][cls._string_to_key(text)] = int(c)
        return table

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "CountTable":
        return cls.from_dict(json.loads(text))


def empirical_prob(table: CountTable, event, h: int) -> float:
    """Fraction of runs under hypothesis h whose sequence satisfies the predicate.

    ``event(observer_order, decisions)`` receives the collection order and
    the decisions in that order.
    """
    total = table.totals[h]
    if total == 0:
        raise EmptyTable(f"no runs recorded under hypothesis {h}")
    hits = sum(c for (order, bits), c in table.sequences(h) if event(order, bits))
    return hits / total


def _decision_of(order, bits, obs: int):
    return bits[order.index(obs)]


def ordered_conditional(table: CountTable, first, second, target, h: int):
    """P(target | first collected first, then second), with the sample size.

    ``first``, ``second`` and ``target`` are (observer_id, value) pairs.
    Returns (estimate, denominator_count).
    """
    first_obs, first_val = first
    second_obs, second_val = second
    target_obs, target_val = target
    num = den = 0
    for (order, bits), c in table.sequences(h):
        if order[0] != first_obs or order[1] != second_obs:
            continue
        if bits[0] != first_val or bits[1] != second_val:
            continue
        den += c
        if _decision_of(order, bits, target_obs) == target_val:
            num += c
    if den == 0:
        raise ZeroDenominator(
            f"no runs with D{first_obs}={first_val} collected before "
            f"D{second_obs}={second_val} under h={h}"
        )
    return num / den, den


def order_effect_test(est_a: float, n_a: int, est_b: float, n_b: int,
                      z_threshold: float = 3.0):
    """Two-proportion z statistic with pooled variance.

    Returns (z, significant) where significant means |z| >= z_threshold.
    """
    if n_a <= 0 or n_b <= 0:
        raise ZeroDenominator("both samples must be nonempty")
    pooled = (est_a * n_a + est_b * n_b) / (n_a + n_b)
    var = pooled * (1.0 - pooled) * (1.0 / n_a + 1.0 / n_b)
    if var <= 0.0:
        z = 0.0 if est_a == est_b else float("inf") * np.sign(est_a - est_b)
    else:
        z = (est_a - est_b) / sqrt(var)
    return float(z), bool(abs(z) >= z_threshold)


@dataclass(frozen=True)
class OrderedDistribution:
    """Per-hypothesis outcome distribution for one collection order."""

    order: tuple        # labels, e.g. ("D2", "D1", "D3")
    outcomes: tuple     # opaque outcome labels, aligned with p0/p1
    p0: tuple
    p1: tuple

    def __post_init__(self):
        for name in ("p0", "p1"):
            v = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, tuple(float(x) for x in v))
            if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
                raise ValueError(f"{name} must be a probability vector")
        if len(self.p0) != len(self.outcomes) or len(self.p1) != len(self.outcomes):
            raise ValueError("outcome labels and probabilities must align")

    @property
    def order_string(self) -> str:
        return ",".join(self.order)

    def to_dict(self) -> dict:
        return {
            "order": self.order_string,
            "outcomes": list(self.outcomes),
            "p0": list(self.p0),
            "p1": list(self.p1),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "OrderedDistribution":
        return cls(
            order=tuple(payload["order"].split(",")),
            outcomes=tuple(payload["outcomes"]),
            p0=tuple(payload["p0"]),
            p1=tuple(payload["p1"]),
        )


def ordered_distribution(table: CountTable, order) -> OrderedDistribution:
    """Outcome distribution conditioned on the realized collection order.

    Only runs whose observers arrived exactly in ``order`` (a tuple of
    observer ids) contribute; pooling other orders would erase the order
    dependence under study.
    """
    order = tuple(int(o) for o in order)
    n = len(order)
    outcomes = ["".join(str(b) for b in bits) for bits in product((0, 1), repeat=n)]
    vectors = {}
    for hv in (0, 1):
        counts = np.zeros(1 << n)
        for (obs_order, bits), c in table.sequences(hv):
            if obs_order != order:
                continue
            idx = int("".join(str(b) for b in bits), 2)
            counts[idx] += c
        total = counts.sum()
        if total == 0:
            raise InsufficientData(
                f"no runs collected in order {order} under hypothesis {hv}"
            )
        vectors[hv] = counts / total
    return OrderedDistribution(
        order=tuple(f"D{o}" for o in order),
        outcomes=tuple(outcomes),
        p0=tuple(vectors[0]),
        p1=tuple(vectors[1]),
    )


def decision_marginals(table: CountTable, h: int):
    """P(D_i = 1 | h) for every observer id appearing in the table."""
    total = table.totals[h]
    if total == 0:
        raise EmptyTable(f"no runs recorded under hypothesis {h}")
    ids = sorted({o for (order, _), _ in table.sequences(h) for o in order})
    out = []
    for obs in ids:
        hits = sum(c for (order, bits), c in table.sequences(h)
                   if _decision_of(order, bits, obs) == 1)
        out.append(hits / total)
    return tuple(out)


# ---------------------------------------------------------------------------
# conditional-probability tables and the order-effect report
# ---------------------------------------------------------------------------

def _row_label(second_obs, second_val, first_obs, first_val):
    prime = lambda v: "" if v else "'"  # noqa: E731
    return f"T_E{second_obs}{prime(second_val)}∘T_E{first_obs}{prime(first_val)}"


def conditional_table(table: CountTable, h: int, pair=(1, 2), target=3):
    """The 8-row conditional-probability table for one hypothesis.

    Two blocks of four rows: observer ``pair[1]`` collected first, then
    ``pair[0]`` (labelled ``T_Ea.T_Eb``: right factor first), followed by the
    transposed block. Columns are the complement and the target event.
    Returns (rows, flagged) where rows are (label, est_complement, est_target,
    n) with None entries on unobserved branches, listed in ``flagged``.
    """
    a, b = pair
    rows = []
    flagged = []
    for first_obs, second_obs in ((b, a), (a, b)):
        for second_val, first_val in product((0, 1), repeat=2):
            label = _row_label(second_obs, second_val, first_obs, first_val)
            try:
                est1, n = ordered_conditional(
                    table, (first_obs, first_val), (second_obs, second_val),
                    (target, 1), h)
                rows.append((label, 1.0 - est1, est1, n))
            except ZeroDenominator:
                rows.append((label, None, None, 0))
                flagged.append(label)
    return rows, flagged


def order_effect_report(table: CountTable, pair=(1, 2), target=3,
                        z_threshold: float = 3.0) -> dict:
    """Compare the two collection orders of a pair, branch by branch.

    For every hypothesis and every value combination, tests whether
    P(target=1 | Db=vb then Da=va) differs from P(target=1 | Da=va then Db=vb)
    by a two-proportion z test.
    """
    a, b = pair
    comparisons = []
    any_significant = False
    for h in (0, 1):
        for va, vb in product((0, 1), repeat=2):
            entry = {
                "h": h,
                "branch": f"D{a}={va},D{b}={vb}",
                "target": f"D{target}=1",
            }
            try:
                est_bf, n_bf = ordered_conditional(
                    table, (b, vb), (a, va), (target, 1), h)
                est_af, n_af = ordered_conditional(
                    table, (a, va), (b, vb), (target, 1), h)
            except ZeroDenominator:
                entry["z"] = None
                entry["significant"] = False
                comparisons.append(entry)
                continue
            z, sig = order_effect_test(est_bf, n_bf, est_af, n_af, z_threshold)
            entry.update({
                f"est_D{b}_first": est_bf, f"n_D{b}_first": n_bf,
                f"est_D{a}_first": est_af, f"n_D{a}_first": n_af,
                "z": z, "significant": sig,
            })
            any_significant = any_significant or sig
            comparisons.append(entry)
    return {
        "pair": [a, b],
        "target": target,
        "z_threshold": z_threshold,
        "significant_order_effect": any_significant,
        "comparisons": comparisons,
    }


# ---------------------------------------------------------------------------
# fitting a two-level model to decision marginals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FittedModel:
    """A state and rank-1 projections on R^2 reproducing given marginals."""

    rho: np.ndarray
    projections: tuple
    angles: tuple
    weight: float       # top diagonal entry of rho
    residual: float

    def reproduced(self):
        return tuple(float(np.trace(self.rho @ e).real) for e in self.projections)


def _line_probability(q: float, theta: float) -> float:
    # Tr[diag(q, 1-q) P(theta)] = q cos^2 + (1-q) sin^2
    c, s = np.cos(theta), np.sin(theta)
    return q * c * c + (1.0 - q) * s * s


def _best_angle(q: float, t: float):
    """Closed-form angle minimizing |line probability - t| for fixed q."""
    if abs(2.0 * q - 1.0) < 1e-15:
        return 0.0, abs(q - t)
    x = (2.0 * t - 1.0) / (2.0 * q - 1.0)
    x = min(1.0, max(-1.0, x))
    theta = 0.5 * np.arccos(x)
    return float(theta), abs(_line_probability(q, theta) - t)


def fit_von_neumann_model(targets, grid_step: float = 0.01,
                          refine_steps: int = 40) -> FittedModel:
    """Fit rho = diag(q, 1-q) and rank-1 projections E_i with Tr[rho E_i] = t_i.

    Coarse grid on q (angles solved in closed form per q), then shrinking
    local refinement of q. The minimizer is not unique; ties are broken
    toward the smallest (q, theta_1, ..., theta_n).
    """
    targets = [float(t) for t in targets]

    def residual_for(q):
        angles, devs = zip(*(_best_angle(q, t) for t in targets))
        return max(devs), angles

    best_q, (best_res, best_angles) = None, (np.inf, None)
    for q in np.arange(0.0, 1.0 + 1e-12, grid_step):
        res, angles = residual_for(q)
        if res < best_res - 1e-15:
            best_q, best_res, best_angles = q, res, angles
    step = grid_step
    for _ in range(refine_steps):
        step /= 2.0
        for q in (best_q - step, best_q + step):
            if not 0.0 <= q <= 1.0:
                continue
            res, angles = residual_for(q)
            if res < best_res - 1e-15 or (res <= best_res and q < best_q):
                best_q, best_res, best_angles = q, res, angles
    rho = np.diag([best_q, 1.0 - best_q]).astype(np.complex128)
    projections = tuple(projector_from_angle(t) for t in best_angles)
    return FittedModel(
        rho=rho,
        projections=projections,
        angles=tuple(float(t) for t in best_angles),
        weight=float(best_q),
        residual=float(best_res),
    )
