"""Binary minimum-error detection with classical, projective, and generalized
measurements, plus the feasibility problems that connect them.

The chain of solvers: `classical_min_error` is the threshold rule on outcome
probabilities; `solve_pvm_detection` realizes it with projection-valued
measurements and certifies optimality through the operator conditions in
`holevo_conditions_check`; `order_povm` builds the (generally non-projective)
measurement induced by collecting several projective measurements in a fixed
order; `solve_p5` optimizes over decision policies realizable on a given
measurement; `solve_p6_feasibility` searches for a (state, measurement) pair
reproducing target outcome distributions; `state_exists_for_povm` decides
whether any state reproduces a target distribution for a fixed measurement,
returning either a state or a separating-hyperplane certificate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import DimensionMismatch, NotAPvm
from .linalg import (
    eig_hermitian,
    eig_hermitian_batch,
    hermitian_basis,
    hermitian_to_vector,
    min_eigenvalue,
    psd_clip_batch,
    require_density,
    require_hermitian,
    require_projection,
    vector_to_hermitian,
)


@dataclass(frozen=True)
class DetectionProblem:
    """Priors and per-hypothesis outcome distributions on a finite alphabet.

    The decision costs default to plain error counting (wrong decisions cost
    1, right ones 0); other costs reweight the risk operators.
    """

    priors: tuple
    p0: tuple
    p1: tuple
    costs: tuple = (1.0, 0.0, 1.0, 0.0)   # (c10, c00, c01, c11)

    def __post_init__(self):
        object.__setattr__(self, "priors", tuple(float(z) for z in self.priors))
        object.__setattr__(self, "p0", tuple(float(p) for p in self.p0))
        object.__setattr__(self, "p1", tuple(float(p) for p in self.p1))
        z0, z1 = self.priors
        if z0 < 0 or z1 < 0 or abs(z0 + z1 - 1.0) > 1e-10:
            raise ValueError("priors must be a probability pair")
        for name in ("p0", "p1"):
            v = np.asarray(getattr(self, name))
            if v.size < 2 or np.any(v < 0) or abs(v.sum() - 1.0) > 1e-10:
                raise ValueError(f"{name} must be a probability vector of length >= 2")
        if len(self.p0) != len(self.p1):
            raise ValueError("p0 and p1 must share one alphabet")

    @property
    def n_outcomes(self) -> int:
        return len(self.p0)

    @classmethod
    def from_dict(cls, payload: dict) -> "DetectionProblem":
        return cls(
            priors=tuple(payload["priors"]),
            p0=tuple(payload["p0"]),
            p1=tuple(payload["p1"]),
            costs=tuple(payload.get("costs", (1.0, 0.0, 1.0, 0.0))),
        )

    def to_dict(self) -> dict:
        return {"priors": list(self.priors), "p0": list(self.p0),
                "p1": list(self.p1), "costs": list(self.costs)}


@dataclass(frozen=True)
class Povm:
    """Positive elements summing to the identity; `check=False` skips validation."""

    elements: tuple
    labels: tuple = None
    check: bool = True

    def __post_init__(self):
        elements = tuple(np.asarray(m, dtype=np.complex128) for m in self.elements)
        object.__setattr__(self, "elements", elements)
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(len(elements))))
        if self.check:
            dim = elements[0].shape[0]
            total = np.zeros((dim, dim), dtype=np.complex128)
            for m in elements:
                require_hermitian(m)
                if m.shape[0] != dim:
                    raise DimensionMismatch("POVM elements must share one dimension")
                if min_eigenvalue(m) < -1e-9:
                    raise ValueError("POVM element has eigenvalue below -1e-9")
                total += m
            if np.max(np.abs(total - np.eye(dim))) > 1e-8:
                raise ValueError("POVM elements must sum to the identity")

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self):
        return len(self.elements)


def is_pvm(povm: Povm, tol: float = 1e-8) -> bool:
    """True iff the elements are pairwise-orthogonal projections."""
    for i, e in enumerate(povm.elements):
        if np.max(np.abs(e @ e - e)) > tol:
            return False
        for f in povm.elements[i + 1:]:
            if np.max(np.abs(e @ f)) > tol:
                return False
    return True


@dataclass(frozen=True)
class RiskPair:
    """Prior-weighted states: W1 charges deciding 1 under h=0, W0 the reverse."""

    w1: np.ndarray
    w0: np.ndarray


def risk_pair(priors, rho0, rho1, costs=(1.0, 0.0, 1.0, 0.0)) -> RiskPair:
    """W1 = (c10 - c00) z0 rho0 and W0 = (c01 - c11) z1 rho1."""
    z0, z1 = priors
    c10, c00, c01, c11 = costs
    return RiskPair(
        w1=(c10 - c00) * z0 * np.asarray(rho0, dtype=np.complex128),
        w0=(c01 - c11) * z1 * np.asarray(rho1, dtype=np.complex128),
    )


@dataclass(frozen=True)
class DetectionSolution:
    """Detection operator pair, the per-outcome policy realizing it, and its cost."""

    pi1: np.ndarray
    pi0: np.ndarray
    policy: tuple
    error: float

    def to_dict(self) -> dict:
        return {
            "policy": list(self.policy),
            "error": self.error,
            "pi1_real": np.real(self.pi1).tolist(),
            "pi1_imag": np.imag(self.pi1).tolist(),
        }


def classical_min_error(prob: DetectionProblem) -> DetectionSolution:
    """Deterministic threshold rule: decide 1 iff z1 p1 >= z0 p0 per outcome."""
    z0, z1 = prob.priors
    p0 = np.asarray(prob.p0)
    p1 = np.asarray(prob.p1)
    policy = (z1 * p1 >= z0 * p0).astype(float)
    error = float(np.sum(np.minimum(z0 * p0, z1 * p1)))
    pi1 = np.diag(policy).astype(np.complex128)
    return DetectionSolution(
        pi1=pi1,
        pi0=np.eye(prob.n_outcomes) - pi1,
        policy=tuple(policy),
        error=error,
    )


def build_pvm_model(prob: DetectionProblem):
    """Diagonal states and the canonical-basis PVM reproducing the distributions."""
    n = prob.n_outcomes
    rho0 = np.diag(np.asarray(prob.p0, dtype=np.complex128))
    rho1 = np.diag(np.asarray(prob.p1, dtype=np.complex128))
    elements = []
    for i in range(n):
        e = np.zeros((n, n), dtype=np.complex128)
        e[i, i] = 1.0
        elements.append(e)
    return rho0, rho1, Povm(elements=tuple(elements))


def solve_pvm_detection(risks: RiskPair, pvm: Povm) -> DetectionSolution:
    """Minimum-cost detection operators realizable on a projective measurement.

    Per outcome the cheaper decision wins (ties decide 1); the resulting
    operators always satisfy the optimality conditions checked by
    `holevo_conditions_check`.
    """
    if not is_pvm(pvm):
        raise NotAPvm("measurement elements are not pairwise-orthogonal projections")
    cost1 = np.array([np.trace(risks.w1 @ m).real for m in pvm.elements])
    cost0 = np.array([np.trace(risks.w0 @ m).real for m in pvm.elements])
    policy = (cost1 <= cost0).astype(float)
    dim = pvm.dim
    pi1 = np.zeros((dim, dim), dtype=np.complex128)
    for b, m in zip(policy, pvm.elements):
        if b:
            pi1 += m
    return DetectionSolution(
        pi1=pi1,
        pi0=np.eye(dim) - pi1,
        policy=tuple(policy),
        error=float(np.sum(np.minimum(cost0, cost1))),
    )


def holevo_conditions_check(risks: RiskPair, pi0, pi1, tol: float = 1e-8) -> bool:
    """Necessary-and-sufficient operator conditions for optimal detectors.

    Checks W0 Pi0 + W1 Pi1 <= W_i and Pi0 W0 + Pi1 W1 <= W_i for i = 0, 1,
    and that the dual operator W0 Pi0 + W1 Pi1 is self-adjoint.
    """
    pi0 = np.asarray(pi0, dtype=np.complex128)
    pi1 = np.asarray(pi1, dtype=np.complex128)
    dim = pi0.shape[0]
    if np.max(np.abs(pi0 + pi1 - np.eye(dim))) > 1e-8:
        raise ValueError("detection operators must sum to the identity")
    dual = risks.w0 @ pi0 + risks.w1 @ pi1
    if np.max(np.abs(dual - dual.conj().T)) > tol:
        return False
    mirrored = pi0 @ risks.w0 + pi1 @ risks.w1
    for w in (risks.w0, risks.w1):
        for o in (dual, mirrored):
            diff = w - o
            diff = (diff + diff.conj().T) / 2
            if min_eigenvalue(diff) < -tol:
                return False
    return True


def order_povm(pvms) -> Povm:
    """The measurement induced by collecting projective measurements in order.

    ``pvms[0]`` is measured first. For outcomes (i1, ..., in) the element is
    the nested conjugation mu1(i1) mu2(i2) ... mun(in) ... mu2(i2) mu1(i1),
    obtained by propagating the state-update rule through the sequence. The
    elements are positive and sum to the identity; they are projections only
    when all the factors commute.
    """
    validated = []
    dim = None
    for pvm in pvms:
        try:
            elems = [require_projection(m) for m in pvm]
        except ValueError as exc:
            raise NotAPvm(f"factor element is not a projection: {exc}") from exc
        if dim is None:
            dim = elems[0].shape[0]
        if any(e.shape[0] != dim for e in elems):
            raise DimensionMismatch("all measurements must act on one space")
        total = np.sum(elems, axis=0)
        if np.max(np.abs(total - np.eye(dim))) > 1e-8:
            raise NotAPvm("factor measurement does not resolve the identity")
        for i, e in enumerate(elems):
            for f in elems[i + 1:]:
                if np.max(np.abs(e @ f)) > 1e-8:
                    raise NotAPvm("factor measurement elements are not orthogonal")
        validated.append(elems)

    elements = []
    labels = []
    for outcome in product(*(range(len(p)) for p in validated)):
        core = validated[-1][outcome[-1]]
        for depth in range(len(validated) - 2, -1, -1):
            m = validated[depth][outcome[depth]]
            core = m @ core @ m
        elements.append((core + core.conj().T) / 2)
        labels.append(",".join(str(i) for i in outcome))
    return Povm(elements=tuple(elements), labels=tuple(labels))


def sequence_distribution(rho, povm: Povm) -> np.ndarray:
    """Outcome probabilities Tr[rho M(i)], with rounding dust clipped to zero."""
    rho = require_density(rho)
    p = np.array([np.trace(rho @ m).real for m in povm.elements])
    if np.min(p) < -1e-8:
        raise ValueError(f"distribution has entry {np.min(p):.3e}; invalid measurement")
    return np.maximum(p, 0.0)


def solve_p5(risks: RiskPair, povm: Povm) -> DetectionSolution:
    """Minimum-cost decision policy over outcomes of a fixed measurement.

    The cost is linear in the per-outcome decision probabilities, so each
    outcome independently takes the cheaper pure decision (ties decide 1).
    """
    cost1 = np.array([np.trace(risks.w1 @ m).real for m in povm.elements])
    cost0 = np.array([np.trace(risks.w0 @ m).real for m in povm.elements])
    policy = (cost1 <= cost0).astype(float)
    dim = povm.dim
    pi1 = np.zeros((dim, dim), dtype=np.complex128)
    for b, m in zip(policy, povm.elements):
        if b:
            pi1 += m
    return DetectionSolution(
        pi1=pi1,
        pi0=np.eye(dim) - pi1,
        policy=tuple(policy),
        error=float(np.sum(np.minimum(cost0, cost1))),
    )


def min_error_over_orders(dists, priors):
    """Per-order minimum error achieved by policies on the ordered outcomes.

    Each ordered distribution contributes sum_i min(z0 p0_i, z1 p1_i).
    Returns (rows, best_order_string) with rows in input order.
    """
    if not dists:
        raise ValueError("need at least one ordered distribution")
    z0, z1 = priors
    rows = []
    for dist in dists:
        err = float(np.sum(np.minimum(z0 * np.asarray(dist.p0),
                                      z1 * np.asarray(dist.p1))))
        rows.append((dist.order_string, err))
    best = min(rows, key=lambda r: r[1])[0]
    return rows, best


# ---------------------------------------------------------------------------
# alternating-projection feasibility solvers
# ---------------------------------------------------------------------------

def _affine_projector(c: np.ndarray, b: np.ndarray):
    """Projector onto the least-squares solution set of C x = b.

    When the system is consistent this is the affine set itself; otherwise
    the projection targets the manifold minimizing ||C x - b||.
    """
    gram_pinv = np.linalg.pinv(c @ c.T, rcond=1e-12)

    def project(x):
        return x - c.T @ (gram_pinv @ (c @ x - b))

    return project


@dataclass
class _DykstraState:
    x: np.ndarray
    p_inc: np.ndarray
    q_inc: np.ndarray


def _dykstra_step(state: _DykstraState, project_cone, project_affine):
    y = project_cone(state.x + state.p_inc)
    state.p_inc = state.x + state.p_inc - y
    x_new = project_affine(y + state.q_inc)
    state.q_inc = y + state.q_inc - x_new
    move = float(np.max(np.abs(x_new - state.x)))
    state.x = x_new
    return y, move


def solve_p6_feasibility(rho0, rho1, prob: DetectionProblem, k: int,
                         max_iter: int = 50_000, move_tol: float = 1e-10,
                         success_tol: float = 1e-6):
    """Search for a measurement reproducing both outcome distributions.

    Dykstra's alternating projections between the affine set of trace and
    completeness constraints and the product of PSD cones. Returns
    (t_star, povm) where t_star is the residual infeasibility radius (max
    trace violation, negative-eigenvalue excess, completeness violation) at
    the best PSD-feasible iterate; the measurement is returned only when
    t_star <= success_tol, otherwise (best_t, None).
    """
    rho0 = require_density(rho0)
    rho1 = require_density(rho1)
    if rho0.shape[0] != k:
        raise DimensionMismatch("states must act on the requested dimension")
    n = prob.n_outcomes
    basis = hermitian_basis(k)
    d = k * k

    rows = []
    b = []
    v0 = hermitian_to_vector(rho0, basis)
    v1 = hermitian_to_vector(rho1, basis)
    for i in range(n):
        for vec, target in ((v0, prob.p0[i]), (v1, prob.p1[i])):
            row = np.zeros(n * d)
            row[i * d:(i + 1) * d] = vec
            rows.append(row)
            b.append(target)
    eye_vec = hermitian_to_vector(np.eye(k), basis)
    for r in range(d):
        row = np.zeros(n * d)
        row[r::d] = 1.0
        rows.append(row)
        b.append(eye_vec[r])
    c = np.array(rows)
    b = np.array(b)
    project_affine = _affine_projector(c, b)

    def project_cone(x):
        mats = np.stack([vector_to_hermitian(x[i * d:(i + 1) * d], basis)
                         for i in range(n)])
        clipped = psd_clip_batch(mats)
        return np.concatenate([hermitian_to_vector(m, basis) for m in clipped])

    def infeasibility(mats):
        t = 0.0
        total = np.zeros((k, k), dtype=np.complex128)
        for i, m in enumerate(mats):
            t = max(t, abs(np.trace(rho0 @ m).real - prob.p0[i]))
            t = max(t, abs(np.trace(rho1 @ m).real - prob.p1[i]))
            total += m
        t = max(t, float(np.max(np.abs(total - np.eye(k)))))
        return t

    start = np.concatenate([hermitian_to_vector(np.eye(k) / n, basis)] * n)
    state = _DykstraState(x=project_affine(start), p_inc=np.zeros(n * d),
                          q_inc=np.zeros(n * d))
    best_t, best_mats = np.inf, None
    for it in range(max_iter):
        y, move = _dykstra_step(state, project_cone, project_affine)
        if it % 25 == 0 or move < move_tol:
            mats = [vector_to_hermitian(y[i * d:(i + 1) * d], basis)
                    for i in range(n)]
            t = infeasibility(mats)
            if t < best_t:
                best_t, best_mats = t, mats
            if t <= success_tol * 1e-2 or move < move_tol:
                break
    if best_t <= success_tol:
        return best_t, Povm(elements=tuple(best_mats), check=False)
    return best_t, None


@dataclass(frozen=True)
class StateExistenceProblem:
    """A fixed measurement, a target distribution, and their vectorized form."""

    povm: Povm
    target: tuple
    basis: np.ndarray = field(init=False, compare=False)
    a_matrix: np.ndarray = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "target", tuple(float(p) for p in self.target))
        if len(self.target) != len(self.povm):
            raise ValueError("target length must match the measurement")
        basis = hermitian_basis(self.povm.dim)
        a = np.stack([hermitian_to_vector(m, basis) for m in self.povm.elements])
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "a_matrix", a)


@dataclass(frozen=True)
class StateExistenceResult:
    status: str                      # "feasible" | "certificate" | "unknown"
    rho: np.ndarray = None
    certificate: np.ndarray = None
    residual: float = None
    note: str = ""

    def to_dict(self) -> dict:
        out = {"status": self.status, "note": self.note}
        if self.rho is not None:
            out["rho_real"] = np.real(self.rho).tolist()
            out["rho_imag"] = np.imag(self.rho).tolist()
            out["residual"] = self.residual
        if self.certificate is not None:
            out["certificate"] = np.asarray(self.certificate).tolist()
        return out


def _verify_certificate(problem: StateExistenceProblem, v: np.ndarray,
                        tol: float = 1e-8):
    """Re-verify a separating vector before returning it."""
    scale = np.max(np.abs(v))
    if scale <= 0:
        return None
    v = v / scale
    witness = vector_to_hermitian(problem.a_matrix.T @ v, problem.basis)
    if min_eigenvalue(witness) < -tol:
        return None
    if float(np.dot(v, problem.target)) >= -tol:
        return None
    return v


def state_exists_for_povm(problem: StateExistenceProblem,
                          max_iter: int = 50_000, move_tol: float = 1e-10,
                          residual_tol: float = 1e-6) -> StateExistenceResult:
    """Decide whether some PSD state reproduces the target distribution.

    Requires one strictly positive element (which makes the achievable cone
    closed); otherwise the safe answer is unknown. Feasible instances return
    a PSD matrix whose traces against the measurement reproduce the target
    within ``residual_tol``; infeasible ones return a separating vector v
    with matrix(A^T v) PSD and v . target < 0, re-verified before returning.
    The trace of a feasible state is reported but not constrained: only cone
    membership is required here.
    """
    a = problem.a_matrix
    target = np.array(problem.target)
    k = problem.povm.dim
    if not any(min_eigenvalue(m) > 1e-10 for m in problem.povm.elements):
        return StateExistenceResult(
            status="unknown",
            note="no strictly positive element; achievable cone may not be closed",
        )

    # targets outside the row space are separated by the residual itself
    x_ls = np.linalg.pinv(a, rcond=1e-12) @ target
    range_residual = a @ x_ls - target
    if np.max(np.abs(range_residual)) > 1e-8:
        v = _verify_certificate(problem, range_residual)
        if v is not None:
            return StateExistenceResult(status="certificate", certificate=v)

    def project_cone(x):
        mat = vector_to_hermitian(x, problem.basis)
        return hermitian_to_vector(psd_clip_batch(mat[None])[0], problem.basis)

    project_affine = _affine_projector(a, target)

    state = _DykstraState(x=project_affine(np.zeros(k * k)),
                          p_inc=np.zeros(k * k), q_inc=np.zeros(k * k))
    best_res, best_x = np.inf, None
    for it in range(max_iter):
        y, move = _dykstra_step(state, project_cone, project_affine)
        if it % 25 == 0 or move < move_tol:
            res = float(np.max(np.abs(a @ y - target)))
            if res < best_res:
                best_res, best_x = res, y
            if res < residual_tol * 1e-2 or move < move_tol:
                break

    if best_res < residual_tol:
        rho = vector_to_hermitian(best_x, problem.basis)
        trace = float(np.trace(rho).real)
        note = ""
        if abs(trace - 1.0) > 1e-6:
            note = (f"state trace is {trace:.6f}; only cone membership is "
                    "constrained by this formulation")
        return StateExistenceResult(status="feasible", rho=rho,
                                    residual=best_res, note=note)

    # infeasible: plain alternating projections converge to the gap pair,
    # whose displacement lies in the row space and yields the separator
    s = project_cone(state.x)
    for _ in range(20_000):
        a_pt = project_affine(s)
        s_new = project_cone(a_pt)
        if np.max(np.abs(s_new - s)) < 1e-13:
            s = s_new
            break
        s = s_new
    a_pt = project_affine(s)
    d = a_pt - s
    if np.max(np.abs(d)) < 1e-12:
        return StateExistenceResult(status="unknown",
                                    note="alternating projections stalled without a gap")
    w = np.linalg.pinv(a @ a.T, rcond=1e-12) @ (a @ d)
    v = _verify_certificate(problem, -w)
    if v is not None:
        return StateExistenceResult(status="certificate", certificate=v)
    return StateExistenceResult(status="unknown",
                                note="gap vector failed certificate verification")


def detection_report(prob: DetectionProblem) -> dict:
    """Solve one detection problem along the classical and projective routes."""
    classical = classical_min_error(prob)
    rho0, rho1, pvm = build_pvm_model(prob)
    risks = risk_pair(prob.priors, rho0, rho1, prob.costs)
    projective = solve_pvm_detection(risks, pvm)
    return {
        "problem": prob.to_dict(),
        "classical": {"error": classical.error, "policy": list(classical.policy)},
        "projective": {
            "error": projective.error,
            "policy": list(projective.policy),
            "optimality_conditions": holevo_conditions_check(
                risks, projective.pi0, projective.pi1),
        },
    }
