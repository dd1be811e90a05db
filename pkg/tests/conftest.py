"""Shared fixtures and random constructors for the test suite."""

import numpy as np
import pytest

from ncpt.linalg import rank1_projection


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def random_unitary(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng, dim):
    """Full-rank random density matrix."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    g = a @ a.conj().T + 1e-3 * np.eye(dim)
    return g / np.trace(g).real


def random_projection(rng, dim, rank=None):
    """Random orthogonal projection of the given (or random nontrivial) rank."""
    if rank is None:
        rank = int(rng.integers(1, dim))
    u = random_unitary(rng, dim)
    return u[:, :rank] @ u[:, :rank].conj().T


def random_povm(rng, dim, n_elements):
    """Random POVM: normalized Gram matrices, sum exactly the identity."""
    raw = []
    for _ in range(n_elements):
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        raw.append(a @ a.conj().T)
    total = np.sum(raw, axis=0)
    w, v = np.linalg.eigh(total)
    inv_sqrt = v @ np.diag(1.0 / np.sqrt(w)) @ v.conj().T
    return [inv_sqrt @ m @ inv_sqrt for m in raw]


def commuting_projections(rng, dim):
    """A pair of projections sharing an eigenbasis (hence commuting)."""
    u = random_unitary(rng, dim)
    d1 = rng.integers(0, 2, size=dim)
    d2 = rng.integers(0, 2, size=dim)
    e = u @ np.diag(d1.astype(complex)) @ u.conj().T
    f = u @ np.diag(d2.astype(complex)) @ u.conj().T
    return e, f


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)


# Per-observer outcome distributions used by the simulation tests: three
# finite alphabets with distinct marginals under the two hypotheses.
OBSERVER_PMFS = [
    {"h0": [0.20, 0.10, 0.15, 0.30, 0.25], "h1": [0.40, 0.20, 0.10, 0.15, 0.15]},
    {"h0": [0.20, 0.40, 0.30, 0.10], "h1": [0.25, 0.30, 0.20, 0.25]},
    {"h0": [0.25, 0.35, 0.40], "h1": [0.35, 0.50, 0.15]},
]


# Reference conditional-probability cells for the two collection orders of a
# pair (D1, D2) with target D3: P(D3=1 | first, then second), keyed by
# (h, first_obs, first_val, second_obs, second_val). Stored as a fixture;
# the sequence counts below reproduce them exactly with denominators of 10^4.
REFERENCE_CONDITIONALS = {
    (0, 2, 0, 1, 0): 0.4120, (0, 2, 1, 1, 0): 0.4797,
    (0, 2, 0, 1, 1): 0.4085, (0, 2, 1, 1, 1): 0.4628,
    (0, 1, 0, 2, 0): 0.3887, (0, 1, 0, 2, 1): 0.3974,
    (0, 1, 1, 2, 0): 0.3846, (0, 1, 1, 2, 1): 0.3905,
    (1, 2, 0, 1, 0): 0.8453, (1, 2, 1, 1, 0): 0.8816,
    (1, 2, 0, 1, 1): 0.8470, (1, 2, 1, 1, 1): 0.8780,
    (1, 1, 0, 2, 0): 0.8431, (1, 1, 0, 2, 1): 0.8482,
    (1, 1, 1, 2, 0): 0.8405, (1, 1, 1, 2, 1): 0.8440,
}


def reference_count_table(branch_size=10_000):
    """Synthetic count table whose conditionals equal REFERENCE_CONDITIONALS."""
    from ncpt.empirics import CountTable

    table = CountTable()
    for (h, fo, fv, so, sv), p in REFERENCE_CONDITIONALS.items():
        hits = round(p * branch_size)
        order = (fo, so, 3)
        table.counts[h][(order, (fv, sv, 1))] = hits
        table.counts[h][(order, (fv, sv, 0))] = branch_size - hits
        table.totals[h] += branch_size
    return table


def pvm_from_angles(angles):
    """Rank-1 two-outcome PVMs on R^2 from a list of angles (radians)."""
    out = []
    for theta in angles:
        p = rank1_projection([np.cos(theta), np.sin(theta)])
        out.append([np.eye(2) - p, p])
    return out
