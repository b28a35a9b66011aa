import itertools

import numpy as np
import pytest

from qpservo import qp
from qpservo.qp import (
    BOUND_SENTINEL,
    KKTMultipliers,
    QPProblem,
    dump_problem,
    kkt_residual,
    load_problem,
    solve,
)


def free_bounds(m):
    return np.full(m, -BOUND_SENTINEL), np.full(m, BOUND_SENTINEL)


def problem(Q, c, A_eq=None, b_eq=None, A_in=None, b_in=None, lower=None, upper=None):
    m = np.asarray(Q).shape[0]
    lo, up = free_bounds(m)
    return QPProblem(
        Q, c,
        A_eq if A_eq is not None else np.zeros((0, m)),
        b_eq if b_eq is not None else np.zeros(0),
        A_in if A_in is not None else np.zeros((0, m)),
        b_in if b_in is not None else np.zeros(0),
        lower if lower is not None else lo,
        upper if upper is not None else up,
    )


def enumeration_oracle(p: QPProblem):
    """Global optimum by enumerating candidate active sets.

    Solves the equality-constrained KKT system for every subset of the
    stacked inequality/box rows (sizes up to the remaining degrees of
    freedom) and keeps the feasible candidate with the lowest objective.
    Returns None when no candidate is feasible (infeasible problem).
    """
    G, h, _ = qp._stacked_inequalities(p)
    m = p.n_vars
    n_eq = p.A_eq.shape[0]
    best = None
    for size in range(0, m - n_eq + 1):
        for subset in itertools.combinations(range(G.shape[0]), size):
            A = np.vstack([p.A_eq, G[list(subset)]])
            b = np.concatenate([p.b_eq, h[list(subset)]])
            k = A.shape[0]
            KKT = np.zeros((m + k, m + k))
            KKT[:m, :m] = p.Q
            KKT[:m, m:] = A.T
            KKT[m:, :m] = A
            rhs = np.concatenate([-p.c, b])
            try:
                sol = np.linalg.solve(KKT, rhs)
            except np.linalg.LinAlgError:
                continue
            x = sol[:m]
            if k and np.max(np.abs(A @ x - b)) > 1e-8:
                continue
            if G.shape[0] and np.max(G @ x - h) > 1e-9:
                continue
            obj = p.objective(x)
            if best is None or obj < best[0]:
                best = (obj, x)
    return best


def random_problem(rng, max_vars=4, max_ineq=3, with_eq=True):
    m = int(rng.integers(1, max_vars + 1))
    L = rng.normal(size=(m, m))
    Q = L @ L.T + 0.5 * np.eye(m)
    c = rng.normal(size=m)
    r = int(rng.integers(0, max_ineq + 1))
    A_in = rng.normal(size=(r, m))
    b_in = rng.normal(size=r)
    lower = rng.uniform(-3.0, -0.05, m)
    upper = rng.uniform(0.05, 3.0, m)
    n_eq = int(with_eq and m >= 2 and rng.random() < 0.3)
    A_eq = rng.normal(size=(n_eq, m))
    b_eq = rng.normal(size=n_eq)
    return QPProblem(Q, c, A_eq, b_eq, A_in, b_in, lower, upper)


class TestValidation:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            problem(np.array([[1.0, 0.1], [0.0, 1.0]]), np.zeros(2))

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            problem(np.diag([1.0, -1.0]), np.zeros(2))

    def test_rejects_crossed_bounds(self):
        with pytest.raises(ValueError):
            problem(np.eye(2), np.zeros(2), lower=np.array([1.0, 0.0]),
                    upper=np.array([0.0, 1.0]))

    def test_rejects_too_many_equalities(self):
        with pytest.raises(ValueError):
            problem(np.eye(2), np.zeros(2), A_eq=np.eye(3, 2), b_eq=np.zeros(3))


class TestSolveBasics:
    def test_unconstrained_minimum(self):
        s = solve(problem(np.eye(2), np.zeros(2)))
        assert s.status == qp.OPTIMAL
        assert np.allclose(s.x, 0.0)
        assert s.objective == pytest.approx(0.0, abs=1e-12)

    def test_projection_onto_hyperplane(self):
        s = solve(problem(np.eye(2), np.zeros(2),
                          A_eq=np.array([[1.0, 1.0]]), b_eq=np.array([1.0])))
        assert s.status == qp.OPTIMAL
        assert np.allclose(s.x, [0.5, 0.5], atol=1e-10)

    def test_active_box(self):
        s = solve(problem(np.eye(2), np.array([-10.0, 0.0]),
                          lower=np.array([-1.0, -1.0]), upper=np.array([1.0, 1.0])))
        assert s.status == qp.OPTIMAL
        assert np.allclose(s.x, [1.0, 0.0], atol=1e-10)

    def test_infeasible_detected(self):
        # x <= -1 conflicts with x >= 0
        s = solve(problem(np.eye(1), np.zeros(1),
                          A_in=np.array([[1.0]]), b_in=np.array([-1.0]),
                          lower=np.array([0.0]), upper=np.array([2.0])))
        assert s.status == qp.INFEASIBLE

    def test_repeated_solves_agree(self, rng):
        p = random_problem(rng)
        a = solve(p)
        b = solve(p)
        assert a.status == b.status
        if a.status == qp.OPTIMAL:
            assert np.max(np.abs(a.x - b.x)) <= 10 * 1e-8


class TestOracleComparison:
    def test_random_qps_match_enumeration(self, rng):
        n_optimal = n_infeasible = 0
        for _ in range(400):
            p = random_problem(rng)
            s = solve(p)
            best = enumeration_oracle(p)
            if best is None:
                assert s.status == qp.INFEASIBLE
                n_infeasible += 1
                continue
            n_optimal += 1
            assert s.status == qp.OPTIMAL
            assert abs(s.objective - best[0]) < 1e-6
            assert np.max(np.abs(s.x - best[1])) < 1e-5
            assert s.kkt_residual <= 1e-8
        assert n_optimal >= 200 and n_infeasible >= 10


class TestInvariants:
    def test_objective_scaling_keeps_argmin(self, rng):
        for _ in range(30):
            p = random_problem(rng)
            s = solve(p)
            if s.status != qp.OPTIMAL:
                continue
            scaled = QPProblem(3.0 * p.Q, 3.0 * p.c, p.A_eq, p.b_eq, p.A_in, p.b_in,
                               p.lower, p.upper)
            s2 = solve(scaled)
            assert s2.status == qp.OPTIMAL
            assert np.max(np.abs(s.x - s2.x)) <= 10 * 1e-8

    def test_constraint_row_scaling_keeps_argmin(self, rng):
        for _ in range(30):
            p = random_problem(rng)
            if p.A_in.shape[0] == 0:
                continue
            s = solve(p)
            if s.status != qp.OPTIMAL:
                continue
            scale = 2.5
            s2 = solve(QPProblem(p.Q, p.c, p.A_eq, p.b_eq,
                                 scale * p.A_in, scale * p.b_in, p.lower, p.upper))
            assert s2.status == qp.OPTIMAL
            assert np.max(np.abs(s.x - s2.x)) <= 10 * 1e-8

    def test_box_respected(self, rng):
        for _ in range(50):
            p = random_problem(rng)
            s = solve(p)
            if s.status == qp.OPTIMAL:
                assert np.all(s.x >= p.lower - 1e-8)
                assert np.all(s.x <= p.upper + 1e-8)

    def test_non_binding_inequality_is_inert(self, rng):
        for _ in range(30):
            p = random_problem(rng, max_ineq=0)
            s = solve(p)
            if s.status != qp.OPTIMAL:
                continue
            # a constraint satisfied with 1.0 of slack at the optimum
            a = rng.normal(size=p.n_vars)
            b = np.array([a @ s.x + 1.0])
            s2 = solve(QPProblem(p.Q, p.c, p.A_eq, p.b_eq, a.reshape(1, -1), b,
                                 p.lower, p.upper))
            assert s2.status == qp.OPTIMAL
            assert np.max(np.abs(s.x - s2.x)) <= 10 * 1e-8


class TestKKTResidual:
    def test_exact_equality_optimum(self):
        # analytic optimum of min 1/2 x'Qx + c'x s.t. sum(x) = 1
        Q = np.diag([2.0, 4.0])
        c = np.array([-1.0, -2.0])
        A = np.array([[1.0, 1.0]])
        # stationarity: Qx + c + A' nu = 0, with sum(x) = 1
        # => x = Q^-1 (-c - A' nu); solve for nu via the constraint
        KKT = np.block([[Q, A.T], [A, np.zeros((1, 1))]])
        sol = np.linalg.solve(KKT, np.array([1.0, 2.0, 1.0]))
        x, nu = sol[:2], sol[2:]
        p = problem(Q, c, A_eq=A, b_eq=np.array([1.0]))
        mult = KKTMultipliers(nu, np.zeros(0), np.zeros(2), np.zeros(2))
        assert kkt_residual(p, x, mult) < 1e-12

    def test_perturbation_grows_residual(self):
        Q = np.diag([2.0, 4.0])
        c = np.array([-1.0, -2.0])
        p = problem(Q, c)
        x_opt = np.linalg.solve(Q, -c)
        mult = KKTMultipliers(np.zeros(0), np.zeros(0), np.zeros(2), np.zeros(2))
        assert kkt_residual(p, x_opt, mult) < 1e-12
        d = np.array([1e-3, 0.0])
        res = kkt_residual(p, x_opt + d, mult)
        assert res == pytest.approx(np.abs(Q @ d)[0], rel=1e-6)

    def test_infeasible_point_reports_violation(self):
        p = problem(np.eye(2), np.zeros(2),
                    A_in=np.array([[1.0, 0.0]]), b_in=np.array([-1.0]))
        mult = KKTMultipliers(np.zeros(0), np.zeros(1), np.zeros(2), np.zeros(2))
        x = np.array([0.5, 0.0])
        assert kkt_residual(p, x, mult) == pytest.approx(1.5)


class TestDump:
    def test_round_trip(self, tmp_path, rng):
        p = random_problem(rng)
        path = tmp_path / "problem.yaml"
        dump_problem(p, path)
        p2 = load_problem(path)
        for name in ("Q", "c", "A_eq", "b_eq", "A_in", "b_in", "lower", "upper"):
            assert np.array_equal(getattr(p, name), getattr(p2, name))
        s1, s2 = solve(p), solve(p2)
        assert s1.status == s2.status
