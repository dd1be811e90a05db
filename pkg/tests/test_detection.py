from itertools import product

import numpy as np
import pytest

from conftest import (
    commuting_projections,
    pvm_from_angles,
    random_density,
    random_povm,
)
from ncpt.detection import (
    DetectionProblem,
    Povm,
    StateExistenceProblem,
    build_pvm_model,
    classical_min_error,
    detection_report,
    holevo_conditions_check,
    is_pvm,
    min_error_over_orders,
    order_povm,
    risk_pair,
    sequence_distribution,
    solve_p5,
    solve_p6_feasibility,
    solve_pvm_detection,
    state_exists_for_povm,
)
from ncpt.empirics import OrderedDistribution
from ncpt.errors import NotAPvm
from ncpt.linalg import min_eigenvalue, projector_from_angle, vector_to_hermitian

# Two-stage measurement fixtures: outcome distributions for the two
# collection orders of a pair (3-outcome, then 2-outcome), priors (0.4, 0.6).
ORDER_A = OrderedDistribution(
    order=("Y1", "Y2"),
    outcomes=("1,1", "1,2", "2,1", "2,2", "3,1", "3,2"),
    p0=(0.10, 0.20, 0.20, 0.15, 0.25, 0.10),
    p1=(0.15, 0.30, 0.15, 0.25, 0.10, 0.05),
)
ORDER_B = OrderedDistribution(
    order=("Y2", "Y1"),
    outcomes=("1,1", "2,1", "1,2", "2,2", "1,3", "2,3"),
    p0=(0.25, 0.05, 0.25, 0.10, 0.05, 0.30),
    p1=(0.15, 0.30, 0.13, 0.27, 0.12, 0.03),
)
PRIORS = (0.4, 0.6)

P0 = projector_from_angle(0.0)
P45 = projector_from_angle(np.pi / 4)


def brute_force_min_error(prob):
    """Enumerate all deterministic per-outcome policies."""
    z0, z1 = prob.priors
    p0, p1 = np.asarray(prob.p0), np.asarray(prob.p1)
    best = np.inf
    for bits in product((0, 1), repeat=prob.n_outcomes):
        d = np.asarray(bits)
        err = float(np.sum(z0 * p0 * d + z1 * p1 * (1 - d)))
        best = min(best, err)
    return best


def forward_triple(rng, n, k, priors=None):
    """A (state pair, measurement) triple together with the distributions it induces."""
    povm = random_povm(rng, k, n)
    rho0 = random_density(rng, k)
    rho1 = random_density(rng, k)
    p0 = [float(np.trace(rho0 @ m).real) for m in povm]
    p1 = [float(np.trace(rho1 @ m).real) for m in povm]
    if priors is None:
        z1 = float(rng.uniform(0.2, 0.8))
        priors = (1.0 - z1, z1)
    prob = DetectionProblem(priors=priors, p0=p0, p1=p1)
    return rho0, rho1, Povm(elements=tuple(povm)), prob


class TestClassicalMinError:
    def test_first_order_fixture(self):
        prob = DetectionProblem(priors=PRIORS, p0=ORDER_A.p0, p1=ORDER_A.p1)
        assert classical_min_error(prob).error == pytest.approx(0.35, abs=1e-9)

    def test_second_order_fixture(self):
        prob = DetectionProblem(priors=PRIORS, p0=ORDER_B.p0, p1=ORDER_B.p1)
        assert classical_min_error(prob).error == pytest.approx(0.266, abs=1e-9)

    def test_indistinguishable(self):
        prob = DetectionProblem(priors=(0.3, 0.7), p0=(0.5, 0.5), p1=(0.5, 0.5))
        assert classical_min_error(prob).error == pytest.approx(0.3, abs=1e-12)

    def test_ties_decide_one(self):
        prob = DetectionProblem(priors=(0.5, 0.5), p0=(0.5, 0.5), p1=(0.5, 0.5))
        assert classical_min_error(prob).policy == (1.0, 1.0)

    def test_matches_brute_force(self, rng):
        for _ in range(30):
            n = int(rng.integers(2, 9))
            z1 = float(rng.uniform(0.1, 0.9))
            prob = DetectionProblem(
                priors=(1 - z1, z1),
                p0=tuple(rng.dirichlet(np.ones(n))),
                p1=tuple(rng.dirichlet(np.ones(n))),
            )
            assert classical_min_error(prob).error == \
                pytest.approx(brute_force_min_error(prob), abs=1e-12)


class TestBuildPvmModel:
    def test_point_mass_state(self):
        prob = DetectionProblem(priors=(0.5, 0.5), p0=(1.0, 0.0), p1=(0.5, 0.5))
        rho0, _, _ = build_pvm_model(prob)
        assert np.allclose(rho0, [[1, 0], [0, 0]])

    def test_reproduces_distributions(self, rng):
        prob = DetectionProblem(priors=(0.5, 0.5),
                                p0=tuple(rng.dirichlet(np.ones(5))),
                                p1=tuple(rng.dirichlet(np.ones(5))))
        rho0, rho1, pvm = build_pvm_model(prob)
        for i, m in enumerate(pvm.elements):
            assert np.trace(rho0 @ m).real == pytest.approx(prob.p0[i], abs=1e-15)
            assert np.trace(rho1 @ m).real == pytest.approx(prob.p1[i], abs=1e-15)
        assert is_pvm(pvm)

    def test_fixture_trace_cell(self):
        prob = DetectionProblem(priors=PRIORS, p0=ORDER_A.p0, p1=ORDER_A.p1)
        rho0, _, pvm = build_pvm_model(prob)
        assert np.trace(rho0 @ pvm.elements[2]).real == pytest.approx(0.2, abs=1e-15)


class TestSolvePvmDetection:
    def test_fixture_cost_and_purity(self):
        prob = DetectionProblem(priors=PRIORS, p0=ORDER_A.p0, p1=ORDER_A.p1)
        rho0, rho1, pvm = build_pvm_model(prob)
        sol = solve_pvm_detection(risk_pair(prob.priors, rho0, rho1), pvm)
        assert sol.error == pytest.approx(0.35, abs=1e-9)
        assert set(sol.policy) <= {0.0, 1.0}

    def test_certain_prior_never_decides_one(self):
        prob = DetectionProblem(priors=(1.0, 0.0),
                                p0=(0.4, 0.3, 0.3), p1=(0.2, 0.3, 0.5))
        rho0, rho1, pvm = build_pvm_model(prob)
        sol = solve_pvm_detection(risk_pair(prob.priors, rho0, rho1), pvm)
        assert np.max(np.abs(sol.pi1)) == 0.0
        assert sol.error == pytest.approx(0.0, abs=1e-15)

    def test_agrees_with_classical_and_brute_force(self, rng):
        for _ in range(10):
            prob = DetectionProblem(priors=(0.45, 0.55),
                                    p0=tuple(rng.dirichlet(np.ones(4))),
                                    p1=tuple(rng.dirichlet(np.ones(4))))
            rho0, rho1, pvm = build_pvm_model(prob)
            sol = solve_pvm_detection(risk_pair(prob.priors, rho0, rho1), pvm)
            assert sol.error == pytest.approx(classical_min_error(prob).error, abs=1e-12)
            assert sol.error == pytest.approx(brute_force_min_error(prob), abs=1e-12)

    def test_solution_satisfies_optimality_conditions(self, rng):
        for _ in range(10):
            prob = DetectionProblem(priors=(0.45, 0.55),
                                    p0=tuple(rng.dirichlet(np.ones(4))),
                                    p1=tuple(rng.dirichlet(np.ones(4))))
            rho0, rho1, pvm = build_pvm_model(prob)
            risks = risk_pair(prob.priors, rho0, rho1)
            sol = solve_pvm_detection(risks, pvm)
            assert holevo_conditions_check(risks, sol.pi0, sol.pi1)

    def test_rejects_non_projective_measurement(self, rng):
        povm = Povm(elements=tuple(random_povm(rng, 2, 3)))
        rho0, rho1 = random_density(rng, 2), random_density(rng, 2)
        with pytest.raises(NotAPvm):
            solve_pvm_detection(risk_pair((0.5, 0.5), rho0, rho1), povm)


class TestHolevoConditions:
    def test_anti_optimal_policy_fails(self):
        prob = DetectionProblem(priors=(0.5, 0.5),
                                p0=(0.8, 0.2), p1=(0.1, 0.9))
        rho0, rho1, pvm = build_pvm_model(prob)
        risks = risk_pair(prob.priors, rho0, rho1)
        sol = solve_pvm_detection(risks, pvm)
        # swap the detectors: strictly suboptimal, so a condition must break
        assert not holevo_conditions_check(risks, sol.pi1, sol.pi0)

    def test_equal_risks_accept_any_valid_pair(self, rng):
        w = random_density(rng, 3) * 0.5
        risks = risk_pair((0.5, 0.5), w / np.trace(w).real * 2 * 0.5,
                          w / np.trace(w).real * 2 * 0.5)
        for _ in range(5):
            dim = 3
            u, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
            lam = rng.uniform(0, 1, size=dim)
            pi1 = u @ np.diag(lam) @ u.T
            pi0 = np.eye(dim) - pi1
            assert holevo_conditions_check(risks, pi0, pi1)

    def test_requires_resolution_of_identity(self, rng):
        risks = risk_pair((0.5, 0.5), random_density(rng, 2), random_density(rng, 2))
        with pytest.raises(ValueError):
            holevo_conditions_check(risks, np.eye(2), np.eye(2))


class TestOrderPovm:
    def test_commuting_factors_give_projections(self, rng):
        e, f = commuting_projections(rng, 4)
        pvm_a = [e, np.eye(4) - e]
        pvm_b = [f, np.eye(4) - f]
        ordered = order_povm([pvm_a, pvm_b])
        for m in ordered.elements:
            assert np.max(np.abs(m @ m - m)) < 1e-9

    def test_completeness_random_pair(self, rng):
        for dim in (2, 3):
            u, _ = np.linalg.qr(rng.normal(size=(dim, dim))
                                + 1j * rng.normal(size=(dim, dim)))
            pvm_a = [np.outer(u[:, i], u[:, i].conj()) for i in range(dim)]
            v, _ = np.linalg.qr(rng.normal(size=(dim, dim))
                                + 1j * rng.normal(size=(dim, dim)))
            pvm_b = [np.outer(v[:, i], v[:, i].conj()) for i in range(dim)]
            ordered = order_povm([pvm_a, pvm_b])
            assert np.allclose(np.sum(ordered.elements, axis=0), np.eye(dim), atol=1e-10)
            for m in ordered.elements:
                assert min_eigenvalue(m) > -1e-10

    def test_tilted_pair_is_not_projective(self):
        pvm_a = [P0, np.eye(2) - P0]
        pvm_b = [P45, np.eye(2) - P45]
        ordered = order_povm([pvm_a, pvm_b])
        # hand product: P0 P45 P0 = e1 e1^H / 2
        sigma = ordered.elements[0]
        assert np.allclose(sigma, [[0.5, 0], [0, 0]], atol=1e-12)
        assert np.max(np.abs(sigma @ sigma - sigma)) > 0.2
        assert not is_pvm(ordered)

    def test_three_factor_chain(self):
        pvms = pvm_from_angles([0.0, np.pi / 4, 1.2])
        ordered = order_povm(pvms)
        assert len(ordered) == 8
        assert ordered.labels[0] == "0,0,0"
        assert np.allclose(np.sum(ordered.elements, axis=0), np.eye(2), atol=1e-10)

    def test_first_factor_is_outermost(self):
        pvms = pvm_from_angles([0.0, np.pi / 4])
        ordered = order_povm(pvms)
        # element for outcomes (1, 1): P0-line projector outermost
        idx = ordered.labels.index("1,1")
        expect = P0 @ P45 @ P0
        assert np.allclose(ordered.elements[idx], expect, atol=1e-12)

    def test_rejects_non_pvm_factor(self, rng):
        bad = random_povm(rng, 2, 2)
        with pytest.raises(NotAPvm):
            order_povm([bad])


class TestSequenceDistribution:
    def test_eigenstate_of_commuting_factors(self, rng):
        e, f = commuting_projections(rng, 3)
        if np.trace(e).real in (0.0, 3.0):
            e = np.diag([1.0, 0.0, 0.0]).astype(complex)
        ordered = order_povm([[e, np.eye(3) - e], [f, np.eye(3) - f]])
        w, v = np.linalg.eigh(e)
        vec = v[:, -1]  # eigenvector with eigenvalue 1
        rho = np.outer(vec, vec.conj())
        p = sequence_distribution(rho, ordered)
        mass_on_first_slice = p[ordered.labels.index("0,0")] + \
            p[ordered.labels.index("0,1")]
        assert mass_on_first_slice == pytest.approx(1.0, abs=1e-10)

    def test_maximally_mixed_state(self, rng):
        ordered = order_povm(pvm_from_angles([0.0, 1.0]))
        p = sequence_distribution(np.eye(2) / 2, ordered)
        expect = [np.trace(m).real / 2 for m in ordered.elements]
        assert np.allclose(p, expect, atol=1e-12)

    def test_hand_worked_pair(self):
        # state diag(.7,.3); lines at 0/90 then 45/135 degrees
        rho = np.diag([0.7, 0.3]).astype(complex)
        pvm_a = [P0, np.eye(2) - P0]
        pvm_b = [P45, np.eye(2) - P45]
        ordered = order_povm([pvm_a, pvm_b])
        p = sequence_distribution(rho, ordered)
        assert np.allclose(p, [0.35, 0.35, 0.15, 0.15], atol=1e-12)
        assert p.sum() == pytest.approx(1.0, abs=1e-9)


class TestSolveP5:
    def test_reduces_to_pvm_solver_on_canonical_model(self, rng):
        prob = DetectionProblem(priors=(0.35, 0.65),
                                p0=tuple(rng.dirichlet(np.ones(5))),
                                p1=tuple(rng.dirichlet(np.ones(5))))
        rho0, rho1, pvm = build_pvm_model(prob)
        risks = risk_pair(prob.priors, rho0, rho1)
        assert solve_p5(risks, pvm).error == \
            pytest.approx(solve_pvm_detection(risks, pvm).error, abs=1e-12)

    def test_realizable_triple_recovers_classical_error(self, rng):
        for _ in range(10):
            rho0, rho1, povm, prob = forward_triple(rng, n=5, k=3)
            risks = risk_pair(prob.priors, rho0, rho1)
            sol = solve_p5(risks, povm)
            assert sol.error == pytest.approx(classical_min_error(prob).error, abs=1e-9)

    def test_fixture_value_via_povm_route(self):
        prob = DetectionProblem(priors=PRIORS, p0=ORDER_A.p0, p1=ORDER_A.p1)
        rho0, rho1, pvm = build_pvm_model(prob)
        assert solve_p5(risk_pair(prob.priors, rho0, rho1), pvm).error == \
            pytest.approx(0.35, abs=1e-9)

    def test_matches_policy_grid_oracle(self, rng):
        # the cost is separable and linear per coordinate, so the grid
        # minimum (which includes the endpoints) equals the analytic one
        for _ in range(10):
            rho0, rho1, povm, prob = forward_triple(rng, n=4, k=2)
            risks = risk_pair(prob.priors, rho0, rho1)
            sol = solve_p5(risks, povm)
            grid = np.linspace(0.0, 1.0, 21)
            total = 0.0
            for m in povm.elements:
                c1 = np.trace(risks.w1 @ m).real
                c0 = np.trace(risks.w0 @ m).real
                total += min(b * c1 + (1 - b) * c0 for b in grid)
            assert sol.error == pytest.approx(total, abs=1e-9)

    def test_policy_is_pure_and_detectors_valid(self, rng):
        rho0, rho1, povm, prob = forward_triple(rng, n=6, k=2)
        risks = risk_pair(prob.priors, rho0, rho1)
        sol = solve_p5(risks, povm)
        assert set(sol.policy) <= {0.0, 1.0}
        assert np.allclose(sol.pi0 + sol.pi1, np.eye(2), atol=1e-10)
        assert min_eigenvalue((sol.pi1 + sol.pi1.conj().T) / 2) > -1e-9


class TestSolveP6:
    def test_forward_generated_instances_recovered(self, rng):
        for _ in range(3):
            rho0, rho1, _, prob = forward_triple(rng, n=3, k=2)
            t, povm = solve_p6_feasibility(rho0, rho1, prob, k=2)
            assert t <= 1e-6
            assert povm is not None
            for i, m in enumerate(povm.elements):
                assert np.trace(rho0 @ m).real == pytest.approx(prob.p0[i], abs=1e-5)
                assert np.trace(rho1 @ m).real == pytest.approx(prob.p1[i], abs=1e-5)
                assert min_eigenvalue(m) > -1e-8

    def test_scalar_space_mismatch(self):
        prob = DetectionProblem(priors=(0.5, 0.5), p0=(0.9, 0.1), p1=(0.5, 0.5))
        rho = np.array([[1.0]], dtype=complex)
        t, povm = solve_p6_feasibility(rho, rho, prob, k=1)
        gap = max(abs(a - b) for a, b in zip(prob.p0, prob.p1))
        assert povm is None
        assert t >= gap / 2 - 1e-9
        assert t == pytest.approx(gap / 2, abs=1e-6)

    def test_identical_states_cannot_split_distributions(self, rng):
        rho = random_density(rng, 2)
        prob = DetectionProblem(priors=(0.5, 0.5), p0=(0.8, 0.2), p1=(0.4, 0.6))
        t, povm = solve_p6_feasibility(rho, rho, prob, k=2)
        assert povm is None
        assert t >= max(abs(a - b) for a, b in zip(prob.p0, prob.p1)) / 2 - 1e-9


class TestMinErrorOverOrders:
    def test_two_order_fixture(self):
        rows, best = min_error_over_orders([ORDER_A, ORDER_B], PRIORS)
        assert rows[0] == ("Y1,Y2", pytest.approx(0.35, abs=1e-9))
        assert rows[1] == ("Y2,Y1", pytest.approx(0.266, abs=1e-9))
        assert best == "Y2,Y1"

    def test_identical_distributions(self):
        twin = OrderedDistribution(order=("Y2", "Y1"), outcomes=ORDER_A.outcomes,
                                   p0=ORDER_A.p0, p1=ORDER_A.p1)
        rows, _ = min_error_over_orders([ORDER_A, twin], PRIORS)
        assert rows[0][1] == pytest.approx(rows[1][1], abs=1e-15)

    def test_bounded_by_blind_guess(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 9))
            dist = OrderedDistribution(
                order=("A",), outcomes=tuple(str(i) for i in range(n)),
                p0=tuple(rng.dirichlet(np.ones(n))),
                p1=tuple(rng.dirichlet(np.ones(n))))
            z1 = float(rng.uniform(0.1, 0.9))
            rows, _ = min_error_over_orders([dist], (1 - z1, z1))
            assert rows[0][1] <= min(1 - z1, z1) + 1e-9


class TestStateExistence:
    def test_forward_generated_states_found(self, rng):
        for _ in range(5):
            k = int(rng.integers(2, 4))
            n = int(rng.integers(2, 5))
            povm = Povm(elements=tuple(random_povm(rng, k, n)))
            rho = random_density(rng, k)
            target = tuple(np.trace(rho @ m).real for m in povm.elements)
            problem = StateExistenceProblem(povm=povm, target=target)
            result = state_exists_for_povm(problem)
            assert result.status == "feasible"
            assert result.residual < 1e-6
            for m, t in zip(povm.elements, target):
                assert np.trace(result.rho @ m).real == pytest.approx(t, abs=1e-5)
            assert min_eigenvalue(result.rho) > -1e-8

    def test_scalar_mismatch_certified(self):
        povm = Povm(elements=(np.array([[0.5]]), np.array([[0.5]])))
        problem = StateExistenceProblem(povm=povm, target=(0.9, 0.1))
        result = state_exists_for_povm(problem)
        assert result.status == "certificate"
        v = result.certificate
        witness = vector_to_hermitian(problem.a_matrix.T @ v, problem.basis)
        assert min_eigenvalue(witness) >= -1e-8
        assert float(np.dot(v, problem.target)) < -1e-8

    def test_perturbed_pvm_uniform_target(self):
        m1 = 0.8 * np.diag([1.0, 0.0]) + 0.1 * np.eye(2)
        m2 = 0.8 * np.diag([0.0, 1.0]) + 0.1 * np.eye(2)
        povm = Povm(elements=(m1.astype(complex), m2.astype(complex)))
        problem = StateExistenceProblem(povm=povm, target=(0.5, 0.5))
        result = state_exists_for_povm(problem)
        assert result.status == "feasible"
        for m in povm.elements:
            assert np.trace(result.rho @ m).real == pytest.approx(0.5, abs=1e-6)

    def test_duplicated_elements_with_unequal_targets(self, rng):
        base = random_povm(rng, 2, 3)
        half = base[0] / 2
        povm = Povm(elements=(half, half, base[1], base[2]))
        rho = random_density(rng, 2)
        t_half = np.trace(rho @ half).real
        rest = [np.trace(rho @ m).real for m in base[1:]]
        # duplicate elements force equal coordinates; make them differ
        delta = 0.8 * t_half
        target = (t_half + delta, t_half - delta, rest[0], rest[1])
        problem = StateExistenceProblem(povm=povm, target=target)
        result = state_exists_for_povm(problem)
        assert result.status == "certificate"
        v = result.certificate
        witness = vector_to_hermitian(problem.a_matrix.T @ v, problem.basis)
        assert min_eigenvalue(witness) >= -1e-8
        assert float(np.dot(v, problem.target)) < -1e-8

    def test_no_positive_definite_element_is_unknown(self):
        povm = Povm(elements=(np.diag([1.0, 0.0]).astype(complex),
                              np.diag([0.0, 1.0]).astype(complex)))
        problem = StateExistenceProblem(povm=povm, target=(0.5, 0.5))
        result = state_exists_for_povm(problem)
        assert result.status == "unknown"


def test_detection_report_round_trip():
    prob = DetectionProblem(priors=PRIORS, p0=ORDER_A.p0, p1=ORDER_A.p1)
    report = detection_report(prob)
    assert report["classical"]["error"] == pytest.approx(0.35, abs=1e-9)
    assert report["projective"]["error"] == pytest.approx(0.35, abs=1e-9)
    assert report["projective"]["optimality_conditions"] is True
