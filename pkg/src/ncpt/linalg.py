"""Dense complex-Hermitian linear algebra for small matrices (dim <= 16).

Everything operates on plain ``numpy.ndarray`` values with complex dtype.
Matrices are validated by the ``require_*`` helpers rather than wrapped in
classes. The eigensolver is a cyclic Jacobi iteration, vectorized over a
batch axis so the alternating-projection solvers can diagonalize many small
matrices per sweep; at these sizes it is accurate to ~1e-14.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NonHermitianInput

# Default tolerances used throughout the package.
HERMITIAN_TOL = 1e-8
PSD_TOL = 1e-10
RANK_REL_TOL = 1e-8


def as_matrix(m) -> np.ndarray:
    """Coerce to a square complex128 array."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError("matrix entries must be finite")
    return a


def require_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate Hermitian symmetry and return the matrix as complex128."""
    a = as_matrix(m)
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > tol:
        raise NonHermitianInput(f"matrix deviates from Hermitian symmetry by {dev:.3e}")
    return a


def hermitian_part(m) -> np.ndarray:
    """(M + M^H) / 2."""
    a = as_matrix(m)
    return (a + a.conj().T) / 2


def _rotations(app: np.ndarray, aqq: np.ndarray, apq: np.ndarray):
    """Vectorized Jacobi rotations (c, s) zeroing the (p, q) entries.

    For each batch element the unitary [[c, s], [-conj(s), c]] (c real)
    diagonalizes [[app, apq], [conj(apq), aqq]].
    """
    beta = np.abs(apq)
    phase = apq / beta
    tau = (aqq - app) / (2.0 * beta)
    t = np.sign(tau) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
    t = np.where(tau == 0.0, 1.0, t)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c * phase
    return c, s


def eig_hermitian_batch(hs: np.ndarray):
    """Cyclic-Jacobi eigendecomposition of a stack of Hermitian matrices.

    ``hs`` has shape (B, n, n); symmetry is assumed, not checked. Returns
    ``(w, v)`` with eigenvalues (B, n) descending and eigenvector columns
    (B, n, n).
    """
    a = np.array(hs, dtype=np.complex128)
    b, n = a.shape[0], a.shape[-1]
    v = np.broadcast_to(np.eye(n, dtype=np.complex128), a.shape).copy()
    if n > 1 and b > 0:
        scale = np.abs(a).reshape(b, -1).max(axis=1)
        stop = 1e-15 * np.maximum(scale, 1e-300)
        for _ in range(60):
            done = True
            for p in range(n - 1):
                for q in range(p + 1, n):
                    idx = np.nonzero(np.abs(a[:, p, q]) > stop)[0]
                    if idx.size == 0:
                        continue
                    done = False
                    c, s = _rotations(
                        a[idx, p, p].real, a[idx, q, q].real, a[idx, p, q]
                    )
                    cc = c[:, None]
                    ss = s[:, None]
                    col_p = a[idx, :, p]
                    col_q = a[idx, :, q]
                    a[idx, :, p] = cc * col_p - np.conj(ss) * col_q
                    a[idx, :, q] = ss * col_p + cc * col_q
                    row_p = a[idx, p, :]
                    row_q = a[idx, q, :]
                    a[idx, p, :] = cc * row_p - ss * row_q
                    a[idx, q, :] = np.conj(ss) * row_p + cc * row_q
                    a[idx, p, q] = 0.0
                    a[idx, q, p] = 0.0
                    col_p = v[idx, :, p]
                    col_q = v[idx, :, q]
                    v[idx, :, p] = cc * col_p - np.conj(ss) * col_q
                    v[idx, :, q] = ss * col_p + cc * col_q
            if done:
                break
    w = np.real(np.diagonal(a, axis1=1, axis2=2)).copy()
    order = np.argsort(-w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return w, v


def eig_hermitian(h, tol: float = HERMITIAN_TOL):
    """Eigen-decomposition of a Hermitian matrix by cyclic Jacobi sweeps.

    Returns ``(eigenvalues, eigenvectors)`` with real eigenvalues sorted in
    descending order and orthonormal eigenvectors as the columns of the
    second array, so that ``h = V @ diag(w) @ V.conj().T``.
    """
    a = require_hermitian(h, tol)
    w, v = eig_hermitian_batch(a[None])
    return w[0], v[0]


def psd_clip_batch(hs: np.ndarray) -> np.ndarray:
    """Project a stack of Hermitian matrices onto the PSD cone (eigenvalue clip)."""
    w, v = eig_hermitian_batch(hs)
    w = np.maximum(w, 0.0)
    return np.einsum("bik,bk,bjk->bij", v, w, v.conj())


def is_psd(h, tol: float = PSD_TOL) -> bool:
    """True iff the smallest eigenvalue of the Hermitian matrix is >= -tol."""
    w, _ = eig_hermitian(h)
    return bool(w.size == 0 or w[-1] >= -tol)


def min_eigenvalue(h) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    w, _ = eig_hermitian(h)
    return float(w[-1])


def _onesided_jacobi(m: np.ndarray):
    """One-sided Jacobi SVD helper: returns (W, V) with m @ V = W, W's columns orthogonal.

    Column norms of W are the singular values; V is unitary.
    """
    w = m.astype(np.complex128).copy()
    n = m.shape[1]
    v = np.eye(n, dtype=np.complex128)
    scale = max(np.max(np.abs(m)), 1e-300)
    stop = (1e-15 * scale) ** 2 * n
    for _ in range(60):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                app = np.real(np.vdot(w[:, p], w[:, p]))
                aqq = np.real(np.vdot(w[:, q], w[:, q]))
                apq = np.vdot(w[:, p], w[:, q])
                if abs(apq) <= stop + 1e-30 * np.sqrt(app * aqq):
                    continue
                rotated = True
                c, s = _rotations(
                    np.array([app]), np.array([aqq]), np.array([apq])
                )
                c, s = c[0], s[0]
                col_p = w[:, p].copy()
                col_q = w[:, q].copy()
                w[:, p] = c * col_p - np.conj(s) * col_q
                w[:, q] = s * col_p + c * col_q
                col_p = v[:, p].copy()
                col_q = v[:, q].copy()
                v[:, p] = c * col_p - np.conj(s) * col_q
                v[:, q] = s * col_p + c * col_q
        if not rotated:
            break
    return w, v


def projection_onto_nullspace(m, rank_rel_tol: float = RANK_REL_TOL,
                              abs_tol: float = 0.0) -> np.ndarray:
    """Orthogonal projection onto the null space of an arbitrary square matrix.

    Built from a one-sided Jacobi SVD: right singular vectors whose singular
    value falls below ``rank_rel_tol`` times the largest one (or below the
    absolute floor ``abs_tol``, for callers whose inputs have unit scale)
    span the null space. The zero matrix maps to the identity.
    """
    a = as_matrix(m)
    w, v = _onesided_jacobi(a)
    sigma = np.sqrt(np.sum(np.abs(w) ** 2, axis=0))
    smax = np.max(sigma) if sigma.size else 0.0
    if smax <= abs_tol or smax == 0.0:
        return np.eye(a.shape[0], dtype=np.complex128)
    null_cols = v[:, sigma <= max(rank_rel_tol * smax, abs_tol)]
    return null_cols @ null_cols.conj().T


def product_chain(ms) -> np.ndarray:
    """Left-to-right product of a nonempty list of equally sized matrices."""
    mats = [as_matrix(m) for m in ms]
    if not mats:
        raise DimensionMismatch("product_chain needs at least one matrix")
    dim = mats[0].shape[0]
    out = mats[0].copy()
    for m in mats[1:]:
        if m.shape[0] != dim:
            raise DimensionMismatch(f"mixed dimensions {dim} and {m.shape[0]}")
        out = out @ m
    return out


def trace_real(m) -> float:
    """Real part of the trace (the trace of any Hermitian matrix is real)."""
    return float(np.trace(as_matrix(m)).real)


def require_density(rho, tol: float = 1e-10) -> np.ndarray:
    """Validate a density matrix: Hermitian, PSD, unit trace."""
    a = require_hermitian(rho)
    if not is_psd(a, tol):
        raise ValueError(f"state has eigenvalue below -{tol:g}")
    tr = trace_real(a)
    if abs(tr - 1.0) > tol:
        raise ValueError(f"state trace {tr} is not 1 within {tol:g}")
    return a


def require_projection(p, tol: float = 1e-10) -> np.ndarray:
    """Validate an orthogonal projection: Hermitian and idempotent."""
    a = require_hermitian(p)
    dev = np.max(np.abs(a @ a - a)) if a.size else 0.0
    if dev > tol:
        raise ValueError(f"matrix is not idempotent (deviation {dev:.3e})")
    return a


def rank1_projection(vec) -> np.ndarray:
    """Projection onto the span of a nonzero vector."""
    v = np.asarray(vec, dtype=np.complex128).reshape(-1)
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValueError("cannot project onto the span of the zero vector")
    v = v / nrm
    return np.outer(v, v.conj())


def projector_from_angle(theta: float) -> np.ndarray:
    """Rank-1 projection onto span((cos theta, sin theta)) in R^2 (theta in radians)."""
    return rank1_projection([np.cos(theta), np.sin(theta)])


def hermitian_basis(dim: int) -> np.ndarray:
    """Orthonormal basis of the real vector space of dim x dim Hermitian matrices.

    Returns an array of shape (dim**2, dim, dim), orthonormal under the
    trace inner product <A, B> = Tr[A^H B]; real coordinates in this basis
    identify Hermitian matrices with vectors in R^(dim^2).
    """
    out = np.zeros((dim * dim, dim, dim), dtype=np.complex128)
    k = 0
    for i in range(dim):
        out[k, i, i] = 1.0
        k += 1
    for i in range(dim):
        for j in range(i + 1, dim):
            out[k, i, j] = out[k, j, i] = 1.0 / np.sqrt(2.0)
            k += 1
            out[k, i, j] = -1.0j / np.sqrt(2.0)
            out[k, j, i] = 1.0j / np.sqrt(2.0)
            k += 1
    return out


def hermitian_to_vector(m, basis: np.ndarray) -> np.ndarray:
    """Real coordinates of a Hermitian matrix in an orthonormal Hermitian basis."""
    a = as_matrix(m)
    return np.real(np.einsum("kij,ji->k", basis, a))


def vector_to_hermitian(x, basis: np.ndarray) -> np.ndarray:
    """Hermitian matrix with the given real coordinates."""
    return np.einsum("k,kij->ij", np.asarray(x, dtype=float), basis)
