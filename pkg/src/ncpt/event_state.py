"""Event-state-operation calculus for two concrete probability models.

The von Neumann model: events are orthogonal projections on C^dim, states
are density matrices, and conditioning on an event E maps a state rho to
E rho E / Tr[rho E]. The classical model: events are subsets of a finite
sample space (bitmasks), states are probability vectors, and conditioning
restricts and renormalizes.

Composite operations are ordered lists of projections. Throughout this
package the factor list is written in chronological order: the first factor
is the event conditioned on first. The composed map is then
``rho -> U rho U^H / Tr[U rho U^H]`` with ``U = factors[-1] @ ... @ factors[0]``,
and the event orthocomplementary to the operation is the projection onto
the null space of U (out-of-domain states are exactly those certain for it).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, OutOfDomain
from .linalg import (
    hermitian_part,
    product_chain,
    projection_onto_nullspace,
    require_projection,
    trace_real,
)

DOMAIN_TOL = 1e-12


# ---------------------------------------------------------------------------
# von Neumann model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Operation:
    """An ordered conditioning chain with its cached matrix product.

    ``factors`` lists the projections in the order they are applied;
    ``product`` is factors[-1] @ ... @ factors[0], so the composed map is
    rho -> product @ rho @ product^H (normalized).
    """

    factors: tuple
    product: np.ndarray = field(compare=False)

    def __len__(self):
        return len(self.factors)

    @property
    def dim(self) -> int:
        return self.factors[0].shape[0]


def make_operation(factors) -> Operation:
    """Validate the projections and cache their reversed product."""
    mats = tuple(require_projection(f) for f in factors)
    if not mats:
        raise ValueError("an operation needs at least one factor")
    dim = mats[0].shape[0]
    if any(m.shape[0] != dim for m in mats):
        raise DimensionMismatch("operation factors must share one dimension")
    return Operation(factors=mats, product=product_chain(list(reversed(mats))))


def event_probability(e, rho) -> float:
    """P(E, rho) = Tr[rho E]."""
    return float(np.trace(np.asarray(rho) @ np.asarray(e)).real)


def apply_operation(e, rho, tol: float = DOMAIN_TOL) -> np.ndarray:
    """Condition a state on one event: E rho E / Tr[rho E]."""
    e = np.asarray(e, dtype=np.complex128)
    rho = np.asarray(rho, dtype=np.complex128)
    p = event_probability(e, rho)
    if p <= tol:
        raise OutOfDomain(f"event has probability {p:.3e} in this state")
    return hermitian_part(e @ rho @ e) / p


def compose_and_apply(op: Operation, rho, tol: float = DOMAIN_TOL) -> np.ndarray:
    """Apply a conditioning chain (first factor first) to a state."""
    u = op.product
    rho = np.asarray(rho, dtype=np.complex128)
    out = u @ rho @ u.conj().T
    weight = float(np.trace(out).real)
    if weight <= tol:
        raise OutOfDomain(f"chain has probability {weight:.3e} in this state")
    return hermitian_part(out) / weight


def in_domain(op: Operation, rho, tol: float = DOMAIN_TOL) -> bool:
    """True iff the state lies in the domain of the chain."""
    u = op.product
    return float(np.trace(u @ np.asarray(rho) @ u.conj().T).real) > tol


def involution(op: Operation) -> Operation:
    """Reverse the conditioning order."""
    return make_operation(tuple(reversed(op.factors)))


def operation_orthocomplement(op: Operation) -> np.ndarray:
    """Event certain exactly on the states outside the chain's domain.

    This is the projection onto the null space of the chain's product
    matrix; a state is out of domain iff its range lies in that null space.
    Products of projections have spectral norm at most 1, so singular values
    below an absolute 1e-9 floor are rounding noise, not real directions.
    """
    return projection_onto_nullspace(op.product, abs_tol=1e-9)


def are_compatible(e, f, tol: float = 1e-10) -> bool:
    """Events are compatible iff their projections commute."""
    e = np.asarray(e, dtype=np.complex128)
    f = np.asarray(f, dtype=np.complex128)
    if e.shape != f.shape:
        raise DimensionMismatch("projections must share one dimension")
    return bool(np.max(np.abs(e @ f - f @ e)) <= tol)


def meet(e, f) -> np.ndarray:
    """Projection onto the intersection of the ranges of two projections.

    Computed as the null-space projection of (I-E) + (I-F): a vector is in
    both ranges iff it is annihilated by both complements.
    """
    e = require_projection(e)
    f = require_projection(f)
    eye = np.eye(e.shape[0], dtype=np.complex128)
    return projection_onto_nullspace((eye - e) + (eye - f))


def join(e, f) -> np.ndarray:
    """Projection onto the closed span of the two ranges (De Morgan dual of meet)."""
    e = require_projection(e)
    f = require_projection(f)
    eye = np.eye(e.shape[0], dtype=np.complex128)
    return eye - meet(eye - e, eye - f)


def probe_states(dim: int, n: int = 200):
    """Deterministic probe set: n pseudo-random full-rank states + basis states.

    Used to decide statistical equality of operations; the seed is fixed so
    equality is a stable, reproducible predicate.
    """
    rng = np.random.default_rng(96040 + dim)
    states = []
    for _ in range(n):
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        g = a @ a.conj().T + 1e-6 * np.eye(dim)
        states.append(g / np.trace(g).real)
    for i in range(dim):
        s = np.zeros((dim, dim), dtype=np.complex128)
        s[i, i] = 1.0
        states.append(s)
    return states


def operations_equal(a: Operation, b: Operation, n_states: int = 200,
                     tol: float = 1e-8) -> bool:
    """Statistical equality of two chains: agreement on the probe set.

    Two chains are equal iff they have the same domain pattern on the probe
    states and their outputs agree within ``tol`` wherever defined.
    """
    if a.dim != b.dim:
        raise DimensionMismatch("operations act on different dimensions")
    for rho in probe_states(a.dim, n_states):
        da, db = in_domain(a, rho), in_domain(b, rho)
        if da != db:
            return False
        if not da:
            continue
        out_a = compose_and_apply(a, rho)
        out_b = compose_and_apply(b, rho)
        if np.max(np.abs(out_a - out_b)) > tol:
            return False
    return True


@dataclass(frozen=True)
class EventSet:
    """A finite event logic on C^dim: projections including 0 and I, closed under complement."""

    dim: int
    events: tuple

    def __post_init__(self):
        eye = np.eye(self.dim)
        mats = [np.asarray(e) for e in self.events]
        if not any(np.allclose(e, 0) for e in mats):
            raise ValueError("event set must contain the impossible event")
        if not any(np.allclose(e, eye) for e in mats):
            raise ValueError("event set must contain the certain event")
        for e in mats:
            require_projection(e)
            comp = eye - e
            if not any(np.allclose(comp, f, atol=1e-10) for f in mats):
                raise ValueError("event set must be closed under complement")

    @classmethod
    def from_angles(cls, angles) -> "EventSet":
        """The rank-1 event set on R^2 generated by lines at the given angles."""
        from .linalg import projector_from_angle

        eye = np.eye(2, dtype=np.complex128)
        events = [np.zeros((2, 2), dtype=np.complex128), eye]
        for theta in angles:
            p = projector_from_angle(theta)
            events.extend([p, eye - p])
        return cls(dim=2, events=tuple(events))

    def nontrivial(self):
        eye = np.eye(self.dim)
        return [e for e in self.events
                if not np.allclose(e, 0) and not np.allclose(e, eye)]


# ---------------------------------------------------------------------------
# classical model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassicalModel:
    """Finite classical probability model: subsets as bitmask events."""

    sample_space_size: int
    events: tuple          # bitmasks over range(sample_space_size)
    measures: tuple        # probability vectors

    def __post_init__(self):
        full = (1 << self.sample_space_size) - 1
        for e in self.events:
            if not 0 <= e <= full:
                raise ValueError(f"event bitmask {e} outside the sample space")
        for mu in self.measures:
            v = np.asarray(mu, dtype=float)
            if v.shape != (self.sample_space_size,) or np.any(v < 0):
                raise ValueError("measures must be nonnegative vectors on the sample space")
            if abs(v.sum() - 1.0) > 1e-12:
                raise ValueError("measures must sum to 1")

    @property
    def full_event(self) -> int:
        return (1 << self.sample_space_size) - 1


def event_mask_to_indices(e: int, size: int):
    return [i for i in range(size) if e >> i & 1]


def classical_probability(e: int, mu) -> float:
    """mu(E) for a bitmask event."""
    mu = np.asarray(mu, dtype=float)
    idx = event_mask_to_indices(e, mu.size)
    return float(mu[idx].sum())


def classical_operation(model: ClassicalModel, e: int, mu) -> np.ndarray:
    """Conditional measure mu(. intersect E) / mu(E)."""
    mu = np.asarray(mu, dtype=float)
    mass = classical_probability(e, mu)
    if mass <= 0.0:
        raise OutOfDomain("conditioning event has zero measure")
    out = np.zeros_like(mu)
    idx = event_mask_to_indices(e, model.sample_space_size)
    out[idx] = mu[idx] / mass
    return out


# ---------------------------------------------------------------------------
# axiom verification suites
# ---------------------------------------------------------------------------

@dataclass
class AxiomCheck:
    check_id: str
    instance: str
    max_deviation: float
    passed: bool


@dataclass
class AxiomReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_json(self, indent=2) -> str:
        payload = {
            "passed": self.passed,
            "checks": [
                {
                    "id": c.check_id,
                    "instance": c.instance,
                    "max_deviation": c.max_deviation,
                    "passed": c.passed,
                }
                for c in self.checks
            ],
        }
        return json.dumps(payload, indent=indent)


def _record(checks, check_id, instance, dev, tol):
    checks.append(AxiomCheck(check_id, instance, float(dev), bool(dev <= tol)))


def axiom_suite(events: EventSet, states, apply_fn=None, tol: float = 1e-8) -> AxiomReport:
    """Verify the testable conditioning axioms on a von Neumann event set.

    ``apply_fn(E, rho)`` defaults to the model's conditioning map; passing a
    different map (e.g. an unnormalized one) makes the corresponding checks
    fail, which is the point of the report.
    """
    apply_fn = apply_fn or apply_operation
    checks = []
    eye = np.eye(events.dim, dtype=np.complex128)
    nontrivial = events.nontrivial()
    states = [np.asarray(s, dtype=np.complex128) for s in states]

    # conditioning on a certain event leaves the state unchanged
    for i, rho in enumerate(states):
        dev = np.max(np.abs(apply_fn(eye, rho) - rho))
        _record(checks, "certain_event_fixed_point", f"certain event, state {i}", dev, tol)
    for j, e in enumerate(nontrivial):
        r = trace_real(e)
        rho_e = e / r
        dev = np.max(np.abs(apply_fn(e, rho_e) - rho_e))
        _record(checks, "certain_event_fixed_point", f"event {j}, supported state", dev, tol)

    # after conditioning, the conditioning event is certain
    for j, e in enumerate(nontrivial):
        worst = 0.0
        used = 0
        for rho in states:
            p = event_probability(e, rho)
            if p <= DOMAIN_TOL:
                continue
            used += 1
            worst = max(worst, abs(event_probability(e, apply_fn(e, rho)) - 1.0))
        if used:
            _record(checks, "conditioned_event_certain", f"event {j}, {used} states", worst, tol)

    # conditioning is idempotent
    for j, e in enumerate(nontrivial):
        worst = 0.0
        for rho in states:
            if event_probability(e, rho) <= DOMAIN_TOL:
                continue
            once = apply_fn(e, rho)
            worst = max(worst, np.max(np.abs(apply_fn(e, once) - once)))
        _record(checks, "idempotent_conditioning", f"event {j}", worst, tol)

    # nested events: conditional probability is the ratio of probabilities
    nested = []
    for e1 in events.events:
        for e2 in events.events:
            if e2 is e1:
                continue
            if np.allclose(e2 @ e1, e2, atol=1e-10) and trace_real(e2) > 0.5:
                nested.append((e1, e2))
    for k, (e1, e2) in enumerate(nested):
        worst = 0.0
        used = 0
        for rho in states:
            p1 = event_probability(e1, rho)
            if p1 <= 1e-6:
                continue
            used += 1
            lhs = event_probability(e2, apply_fn(e1, rho))
            rhs = event_probability(e2, rho) / p1
            worst = max(worst, abs(lhs - rhs))
        if used:
            _record(checks, "nested_conditional_ratio", f"nested pair {k}", worst, tol)

    # compatible events: conditioning sees the meet
    pairs = [(e1, e2) for i, e1 in enumerate(nontrivial)
             for e2 in nontrivial[i + 1:] if are_compatible(e1, e2)]
    for k, (e1, e2) in enumerate(pairs):
        both = meet(e1, e2)
        worst = 0.0
        used = 0
        for rho in states:
            if event_probability(e1, rho) <= 1e-6:
                continue
            used += 1
            cond = apply_fn(e1, rho)
            worst = max(worst, abs(event_probability(e2, cond) -
                                   event_probability(both, cond)))
        if used:
            _record(checks, "compatible_meet_agreement", f"compatible pair {k}", worst, tol)

    # probability is linear over mixtures of states
    if len(states) >= 2:
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(20):
            t = rng.dirichlet(np.ones(len(states)))
            mix = sum(ti * s for ti, s in zip(t, states))
            for e in nontrivial:
                direct = event_probability(e, mix)
                summed = sum(ti * event_probability(e, s) for ti, s in zip(t, states))
                worst = max(worst, abs(direct - summed))
        _record(checks, "mixture_linearity", "20 dirichlet mixtures", worst, tol)

    # reversal consistency: chains equal as maps have equal reversals
    equal_pairs = []
    for j, e in enumerate(nontrivial):
        equal_pairs.append((make_operation([e]), make_operation([e, e]), f"event {j}: E vs E,E"))
    for k, (e1, e2) in enumerate(pairs):
        equal_pairs.append((make_operation([e1, e2]), make_operation([e2, e1]),
                            f"commuting pair {k}"))
    for op_a, op_b, label in equal_pairs:
        if not operations_equal(op_a, op_b, n_states=50):
            _record(checks, "involution_reversal_consistency", label + " (not equal)", 1.0, tol)
            continue
        rev_ok = operations_equal(involution(op_a), involution(op_b), n_states=50)
        _record(checks, "involution_reversal_consistency", label, 0.0 if rev_ok else 1.0, tol)

    # the orthocomplement event is certain exactly off the domain
    rng = np.random.default_rng(11)
    for j, e in enumerate(nontrivial[:4]):
        op = make_operation([e, nontrivial[(j + 1) % len(nontrivial)]])
        q = operation_orthocomplement(op)
        worst = 0.0
        if trace_real(q) > 1e-8:
            for _ in range(10):
                a = rng.normal(size=(events.dim, events.dim))
                sigma = q @ (a @ a.T + 1e-3 * np.eye(events.dim)) @ q
                tr = np.trace(sigma).real
                if tr <= 1e-12:
                    continue
                sigma = sigma / tr
                if in_domain(op, sigma):
                    worst = max(worst, 1.0)
                worst = max(worst, abs(event_probability(q, sigma) - 1.0))
        for rho in states:
            if in_domain(op, rho) and event_probability(q, rho) > 1.0 - 1e-10:
                worst = max(worst, 1.0)
        _record(checks, "orthocomplement_certainty", f"chain {j}", worst, tol)

    return AxiomReport(checks=checks)


def classical_axiom_suite(model: ClassicalModel, measures=None, operation_fn=None,
                          tol: float = 1e-12) -> AxiomReport:
    """Verify the conditioning axioms on a finite classical model."""
    operation_fn = operation_fn or (lambda e, mu: classical_operation(model, e, mu))
    measures = [np.asarray(m, dtype=float)
                for m in (measures if measures is not None else model.measures)]
    checks = []
    full = model.full_event
    nontrivial = [e for e in model.events if e not in (0, full)]

    for i, mu in enumerate(measures):
        dev = np.max(np.abs(operation_fn(full, mu) - mu))
        _record(checks, "certain_event_fixed_point", f"certain event, measure {i}", dev, tol)

    for j, e in enumerate(nontrivial):
        worst_certain = 0.0
        worst_idem = 0.0
        used = 0
        for mu in measures:
            if classical_probability(e, mu) <= 0.0:
                continue
            used += 1
            nu = operation_fn(e, mu)
            worst_certain = max(worst_certain, abs(classical_probability(e, nu) - 1.0))
            worst_idem = max(worst_idem, np.max(np.abs(operation_fn(e, nu) - nu)))
        if used:
            _record(checks, "conditioned_event_certain", f"event {j}", worst_certain, tol)
            _record(checks, "idempotent_conditioning", f"event {j}", worst_idem, tol)

    # nested subsets
    k = 0
    for e1 in nontrivial + [full]:
        for e2 in nontrivial:
            if e2 == e1 or (e2 & e1) != e2:
                continue
            worst = 0.0
            used = 0
            for mu in measures:
                p1 = classical_probability(e1, mu)
                if p1 <= 0.0:
                    continue
                used += 1
                lhs = classical_probability(e2, operation_fn(e1, mu))
                worst = max(worst, abs(lhs - classical_probability(e2, mu) / p1))
            if used:
                _record(checks, "nested_conditional_ratio", f"nested pair {k}", worst, tol)
            k += 1

    # all classical events are compatible: conditioning sees the intersection
    for k, (e1, e2) in enumerate((a, b) for i, a in enumerate(nontrivial)
                                 for b in nontrivial[i + 1:]):
        worst = 0.0
        used = 0
        for mu in measures:
            if classical_probability(e1, mu) <= 0.0:
                continue
            used += 1
            nu = operation_fn(e1, mu)
            worst = max(worst, abs(classical_probability(e2, nu) -
                                   classical_probability(e1 & e2, nu)))
        if used:
            _record(checks, "compatible_meet_agreement", f"pair {k}", worst, tol)

    # commutativity of conditioning
    worst = 0.0
    used = 0
    for e1 in nontrivial:
        for e2 in nontrivial:
            for mu in measures:
                if classical_probability(e1 & e2, mu) <= 0.0:
                    continue
                used += 1
                ab = operation_fn(e1, operation_fn(e2, mu))
                ba = operation_fn(e2, operation_fn(e1, mu))
                worst = max(worst, np.max(np.abs(ab - ba)))
    if used:
        _record(checks, "operation_commutativity", f"{used} instances", worst, tol)

    # mixtures
    if len(measures) >= 2:
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(20):
            t = rng.dirichlet(np.ones(len(measures)))
            mix = sum(ti * m for ti, m in zip(t, measures))
            for e in nontrivial:
                direct = classical_probability(e, mix)
                summed = sum(ti * classical_probability(e, m) for ti, m in zip(t, measures))
                worst = max(worst, abs(direct - summed))
        _record(checks, "mixture_linearity", "20 dirichlet mixtures", worst, tol)

    return AxiomReport(checks=checks)
