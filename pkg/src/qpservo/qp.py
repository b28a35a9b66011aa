"""Dense strictly convex quadratic programs.

    min  1/2 x^T Q x + c^T x
    s.t. A_eq x  = b_eq
         A_in x <= b_in
         lower <= x <= upper

Solved with a primal active-set method. Problem sizes here are tiny (a
dozen variables, a few dozen rows), so every working-set change re-solves a
dense KKT system from scratch; no factorization updates. A feasible start
comes from the equality-constrained optimum when that already satisfies the
inequalities, otherwise from a HiGHS feasibility LP, which also certifies
infeasibility.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from scipy.optimize import linprog

# Bounds at or beyond this magnitude mean "unbounded" and are skipped in
# constraint handling and residuals.
BOUND_SENTINEL = 1e12

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max_iterations"

_FEAS_TOL = 1e-9
_STEP_TOL = 1e-11
_DUAL_TOL = 1e-11


@dataclass(frozen=True)
class QPProblem:
    Q: np.ndarray
    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_in: np.ndarray
    b_in: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        m = Q.shape[0]
        if Q.shape != (m, m):
            raise ValueError("Q must be square")
        if np.max(np.abs(Q - Q.T)) > 1e-10:
            raise ValueError("Q must be symmetric within 1e-10")
        try:
            np.linalg.cholesky(Q)
        except np.linalg.LinAlgError:
            raise ValueError("Q must be positive definite")
        arrays = {
            "Q": Q,
            "c": _as_vector(self.c, m, "c"),
            "A_eq": _as_matrix(self.A_eq, m, "A_eq"),
            "b_eq": None,
            "A_in": _as_matrix(self.A_in, m, "A_in"),
            "b_in": None,
            "lower": _as_vector(self.lower, m, "lower"),
            "upper": _as_vector(self.upper, m, "upper"),
        }
        arrays["b_eq"] = _as_vector(self.b_eq, arrays["A_eq"].shape[0], "b_eq")
        arrays["b_in"] = _as_vector(self.b_in, arrays["A_in"].shape[0], "b_in")
        if arrays["A_eq"].shape[0] > m:
            raise ValueError("more equality constraints than variables")
        if np.any(arrays["lower"] > arrays["upper"]):
            raise ValueError("lower must be <= upper elementwise")
        for name, a in arrays.items():
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n_vars(self) -> int:
        return self.Q.shape[0]

    @staticmethod
    def unconstrained(Q, c) -> "QPProblem":
        m = np.asarray(Q).shape[0]
        return QPProblem(
            Q, c,
            np.zeros((0, m)), np.zeros(0),
            np.zeros((0, m)), np.zeros(0),
            np.full(m, -BOUND_SENTINEL), np.full(m, BOUND_SENTINEL),
        )

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.Q @ x + self.c @ x)


def _as_vector(a, length, name) -> np.ndarray:
    a = np.array(a, dtype=float).reshape(-1)
    if a.shape != (length,):
        raise ValueError(f"{name} must have length {length}")
    return a


def _as_matrix(a, n_cols, name) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.size == 0:
        return a.reshape(0, n_cols)
    if a.ndim != 2 or a.shape[1] != n_cols:
        raise ValueError(f"{name} must have {n_cols} columns")
    return a


@dataclass
class KKTMultipliers:
    eq: np.ndarray
    ineq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @staticmethod
    def zeros(problem: QPProblem) -> "KKTMultipliers":
        return KKTMultipliers(
            np.zeros(problem.A_eq.shape[0]),
            np.zeros(problem.A_in.shape[0]),
            np.zeros(problem.n_vars),
            np.zeros(problem.n_vars),
        )


@dataclass
class QPSolution:
    x: np.ndarray
    status: str
    objective: float
    kkt_residual: float
    iterations: int
    multipliers: KKTMultipliers


def _stacked_inequalities(problem: QPProblem):
    """General + box rows as (G, h, tags); sentinel bounds are dropped."""
    m = problem.n_vars
    rows, bounds, tags = [], [], []
    for i in range(problem.A_in.shape[0]):
        rows.append(problem.A_in[i])
        bounds.append(problem.b_in[i])
        tags.append(("in", i))
    eye = np.eye(m)
    for j in range(m):
        if problem.upper[j] < BOUND_SENTINEL:
            rows.append(eye[j])
            bounds.append(problem.upper[j])
            tags.append(("up", j))
    for j in range(m):
        if problem.lower[j] > -BOUND_SENTINEL:
            rows.append(-eye[j])
            bounds.append(-problem.lower[j])
            tags.append(("lo", j))
    G = np.array(rows) if rows else np.zeros((0, m))
    return G, np.array(bounds), tags


def _solve_kkt(Q, g, A):
    """min 1/2 p^T Q p + g^T p s.t. A p = 0; returns (p, multipliers)."""
    m = Q.shape[0]
    k = A.shape[0]
    if k == 0:
        return np.linalg.solve(Q, -g), np.zeros(0)
    KKT = np.zeros((m + k, m + k))
    KKT[:m, :m] = Q
    KKT[:m, m:] = A.T
    KKT[m:, :m] = A
    rhs = np.concatenate([-g, np.zeros(k)])
    try:
        sol = np.linalg.solve(KKT, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
    return sol[:m], sol[m:]


def _phase1(problem: QPProblem):
    """Feasible point via HiGHS, or None when the constraint set is empty."""
    m = problem.n_vars
    bounds = []
    for j in range(m):
        lo = problem.lower[j] if problem.lower[j] > -BOUND_SENTINEL else None
        up = problem.upper[j] if problem.upper[j] < BOUND_SENTINEL else None
        bounds.append((lo, up))
    res = linprog(
        np.zeros(m),
        A_ub=problem.A_in if problem.A_in.shape[0] else None,
        b_ub=problem.b_in if problem.A_in.shape[0] else None,
        A_eq=problem.A_eq if problem.A_eq.shape[0] else None,
        b_eq=problem.b_eq if problem.A_eq.shape[0] else None,
        bounds=bounds,
        method="highs",
    )
    if not res.success:
        return None
    return np.asarray(res.x, dtype=float)


def solve(problem: QPProblem, tolerance: float = 1e-8, max_iterations: int = 500) -> QPSolution:
    """Primal active-set solve.

    `optimal` guarantees the KKT residual is at or below `tolerance`; an
    empty or contradictory constraint set comes back `infeasible`, never as
    a silently wrong answer.
    """
    G, h, tags = _stacked_inequalities(problem)
    A_eq, b_eq = problem.A_eq, problem.b_eq
    n_eq = A_eq.shape[0]
    Q, c = problem.Q, problem.c

    # Start at the equality-constrained optimum when it is already feasible,
    # otherwise fall back to a feasibility LP.
    x = _eqp_point(Q, c, A_eq, b_eq)
    if x is None or not _is_feasible(x, A_eq, b_eq, G, h):
        x = _phase1(problem)
        if x is None:
            return QPSolution(
                np.zeros(problem.n_vars), INFEASIBLE, float("nan"),
                float("inf"), 0, KKTMultipliers.zeros(problem),
            )

    working: list[int] = []
    iterations = 0
    lam = np.zeros(0)
    eq_mults = np.zeros(n_eq)
    converged = False
    while iterations < max_iterations:
        iterations += 1
        g = Q @ x + c
        A_act = np.vstack([A_eq, G[working]])
        p, mults = _solve_kkt(Q, g, A_act)
        eq_mults, lam = mults[:n_eq], mults[n_eq:]

        if np.max(np.abs(p), initial=0.0) <= _STEP_TOL * max(1.0, np.linalg.norm(x)):
            if lam.size == 0 or np.min(lam) >= -_DUAL_TOL:
                converged = True
                break
            working.remove(working[int(np.argmin(lam))])
            continue

        # Ratio test over rows outside the working set; ties and exact
        # blocks resolve to the smallest row index for determinism.
        alpha = 1.0
        blocking = -1
        for i in range(G.shape[0]):
            if i in working:
                continue
            gp = G[i] @ p
            if gp <= 1e-13:
                continue
            ai = max((h[i] - G[i] @ x) / gp, 0.0)
            if ai < alpha - 1e-15:
                alpha = ai
                blocking = i
        x = x + alpha * p
        if blocking >= 0:
            working.append(blocking)

    mult = _collect_multipliers(problem, tags, working, lam)
    mult.eq = eq_mults
    res = kkt_residual(problem, x, mult)
    status = OPTIMAL if converged and res <= tolerance else MAX_ITERATIONS
    return QPSolution(x, status, problem.objective(x), res, iterations, mult)


def _eqp_point(Q, c, A_eq, b_eq):
    """Optimum of the equality-only problem (ignoring inequalities)."""
    m = Q.shape[0]
    k = A_eq.shape[0]
    KKT = np.zeros((m + k, m + k))
    KKT[:m, :m] = Q
    KKT[:m, m:] = A_eq.T
    KKT[m:, :m] = A_eq
    rhs = np.concatenate([-c, b_eq])
    try:
        sol = np.linalg.solve(KKT, rhs)
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(KKT, rhs, rcond=None)
    x = sol[:m]
    if np.max(np.abs(A_eq @ x - b_eq), initial=0.0) > 1e-7:
        return None  # inconsistent equalities
    return x


def _is_feasible(x, A_eq, b_eq, G, h, tol=_FEAS_TOL):
    if A_eq.shape[0] and np.max(np.abs(A_eq @ x - b_eq)) > tol:
        return False
    if G.shape[0] and np.max(G @ x - h) > tol:
        return False
    return True


def _collect_multipliers(problem, tags, working, lam) -> KKTMultipliers:
    mult = KKTMultipliers.zeros(problem)
    for idx, value in zip(working, lam):
        kind, j = tags[idx]
        if kind == "in":
            mult.ineq[j] = value
        elif kind == "up":
            mult.upper[j] = value
        else:
            mult.lower[j] = value
    return mult


def kkt_residual(problem: QPProblem, x: np.ndarray, multipliers: KKTMultipliers) -> float:
    """Infinity-norm KKT residual: max of stationarity, primal and dual
    feasibility, and complementary slackness. Sentinel bounds are skipped."""
    x = np.asarray(x, dtype=float)
    mu = multipliers

    stat = problem.Q @ x + problem.c
    if problem.A_eq.shape[0]:
        stat = stat + problem.A_eq.T @ mu.eq
    if problem.A_in.shape[0]:
        stat = stat + problem.A_in.T @ mu.ineq
    stat = stat - mu.lower + mu.upper
    res = float(np.max(np.abs(stat), initial=0.0))

    if problem.A_eq.shape[0]:
        res = max(res, float(np.max(np.abs(problem.A_eq @ x - problem.b_eq))))
    lo_mask = problem.lower > -BOUND_SENTINEL
    up_mask = problem.upper < BOUND_SENTINEL
    gaps = []
    if problem.A_in.shape[0]:
        slack = problem.b_in - problem.A_in @ x
        res = max(res, float(np.max(-slack, initial=0.0)))
        gaps.append(np.abs(mu.ineq * slack))
    if np.any(lo_mask):
        slack = (x - problem.lower)[lo_mask]
        res = max(res, float(np.max(-slack, initial=0.0)))
        gaps.append(np.abs(mu.lower[lo_mask] * slack))
    if np.any(up_mask):
        slack = (problem.upper - x)[up_mask]
        res = max(res, float(np.max(-slack, initial=0.0)))
        gaps.append(np.abs(mu.upper[up_mask] * slack))

    res = max(res, float(np.max(-mu.ineq, initial=0.0)))
    res = max(res, float(np.max(-mu.lower, initial=0.0)))
    res = max(res, float(np.max(-mu.upper, initial=0.0)))
    for gap in gaps:
        res = max(res, float(np.max(gap, initial=0.0)))
    return res


def dump_problem(problem: QPProblem, path) -> None:
    """Write the problem to a YAML file for offline reproduction."""
    data = {
        name: getattr(problem, name).tolist()
        for name in ("Q", "c", "A_eq", "b_eq", "A_in", "b_in", "lower", "upper")
    }
    Path(path).write_text(yaml.safe_dump(data, sort_keys=False))


def load_problem(path) -> QPProblem:
    data = yaml.safe_load(Path(path).read_text())
    m = len(data["c"])
    for key in ("A_eq", "A_in"):
        if not data[key]:
            data[key] = np.zeros((0, m))
    return QPProblem(**{k: np.array(v, dtype=float) for k, v in data.items()})
