"""Dense convex quadratic programming by a primal active-set method.

Solves  min 0.5 x'Hx + f'x  subject to  Aeq x = beq,  Ain x <= bin  for small
dense problems (tens of variables).  A phase-1 linear program finds a feasible
starting point or certifies infeasibility; phase 2 walks the active set with
KKT solves.  Robustness matters more than speed at these sizes, so every
verdict is backed by a residual or a certificate.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

DEFAULT_TOL = 1e-9
MAX_ITERATIONS = 200


@dataclass(frozen=True)
class QuadraticProgram:
    """min 0.5 x'hessian x + linear'x  s.t.  eq_lhs x = eq_rhs, ineq_lhs x <= ineq_rhs."""

    hessian: np.ndarray
    linear: np.ndarray
    eq_lhs: np.ndarray = None
    eq_rhs: np.ndarray = None
    ineq_lhs: np.ndarray = None
    ineq_rhs: np.ndarray = None

    def __post_init__(self):
        n = np.asarray(self.linear).size
        h = np.atleast_2d(np.asarray(self.hessian, dtype=float))
        object.__setattr__(self, "hessian", h)
        object.__setattr__(self, "linear", np.asarray(self.linear, dtype=float).ravel())
        for name, rows in (("eq", self.eq_lhs), ("ineq", self.ineq_lhs)):
            lhs = np.zeros((0, n)) if rows is None else np.atleast_2d(np.asarray(rows, dtype=float))
            rhs_attr = getattr(self, f"{name}_rhs")
            rhs = np.zeros(0) if rhs_attr is None else np.asarray(rhs_attr, dtype=float).ravel()
            if lhs.shape[0] != rhs.shape[0] or (lhs.size and lhs.shape[1] != n):
                raise ValueError(f"{name} constraint system inconsistent with {n} variables")
            object.__setattr__(self, f"{name}_lhs", lhs)
            object.__setattr__(self, f"{name}_rhs", rhs)
        if n:
            if h.shape != (n, n):
                raise ValueError(f"hessian shape {h.shape} does not match {n} variables")
            if np.max(np.abs(h - h.T)) > 1e-12:
                raise ValueError("hessian must be symmetric within 1e-12")
            if np.linalg.eigvalsh(0.5 * (h + h.T)).min() < -1e-10:
                raise ValueError("hessian must be positive semidefinite")

    @property
    def n_vars(self):
        return self.linear.size

    def objective(self, x):
        x = np.asarray(x, dtype=float).ravel()
        return float(0.5 * x @ self.hessian @ x + self.linear @ x)


@dataclass(frozen=True)
class QpSolution:
    """Solver outcome.  ``certificate`` carries the phase-1 optimum on infeasibility."""

    point: np.ndarray
    value: float
    status: str  # optimal | infeasible | max_iterations
    iterations: int = 0
    certificate: float = field(default=0.0)


def _phase1(qp: QuadraticProgram):
    """Feasible point via LP: min t s.t. Ain x - t <= bin, Aeq x = beq, t >= 0."""
    n = qp.n_vars
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    a_ub = b_ub = a_eq = b_eq = None
    if qp.ineq_lhs.shape[0]:
        a_ub = np.hstack([qp.ineq_lhs, -np.ones((qp.ineq_lhs.shape[0], 1))])
        b_ub = qp.ineq_rhs
    if qp.eq_lhs.shape[0]:
        a_eq = np.hstack([qp.eq_lhs, np.zeros((qp.eq_lhs.shape[0], 1))])
        b_eq = qp.eq_rhs
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=[(None, None)] * n + [(0.0, None)], method="highs")
    if not res.success:
        return None, np.inf
    return res.x[:n], float(res.x[-1])


def solve(qp: QuadraticProgram, tol: float = DEFAULT_TOL,
          max_iterations: int = MAX_ITERATIONS) -> QpSolution:
    """Solve the QP; never returns a silently wrong answer.

    ``optimal`` means KKT residuals are within tol.  ``infeasible`` carries the
    phase-1 optimum (> tol) as certificate.  ``max_iterations`` signals
    ill-conditioning after the iteration cap.
    """
    n = qp.n_vars
    if n == 0:
        eq_ok = qp.eq_rhs.size == 0 or np.max(np.abs(qp.eq_rhs)) <= tol
        in_ok = qp.ineq_rhs.size == 0 or np.min(qp.ineq_rhs) >= -tol
        if eq_ok and in_ok:
            return QpSolution(np.zeros(0), 0.0, "optimal")
        miss = 0.0
        if qp.ineq_rhs.size:
            miss = max(miss, float(-np.min(qp.ineq_rhs)))
        if qp.eq_rhs.size:
            miss = max(miss, float(np.max(np.abs(qp.eq_rhs))))
        return QpSolution(np.zeros(0), np.inf, "infeasible", certificate=miss)

    x0, violation = _phase1(qp)
    if x0 is None or violation > tol:
        return QpSolution(np.full(n, np.nan), np.inf, "infeasible",
                          certificate=violation)

    # eliminate equalities: x = x0 + Z y with Z spanning the nullspace of eq_lhs
    if qp.eq_lhs.shape[0]:
        _, svals, vt = np.linalg.svd(qp.eq_lhs)
        rank = int(np.sum(svals > 1e-11 * max(1.0, svals[0])))
        null_basis = vt[rank:].T
        if null_basis.shape[1] == 0:
            # equalities pin the point; only feasibility of inequalities remains
            value = qp.objective(x0)
            return QpSolution(x0, value, "optimal", iterations=0)
    else:
        null_basis = np.eye(n)

    h = null_basis.T @ qp.hessian @ null_basis
    f = null_basis.T @ (qp.hessian @ x0 + qp.linear)
    a_in = qp.ineq_lhs @ null_basis if qp.ineq_lhs.shape[0] else np.zeros((0, null_basis.shape[1]))
    b_in = qp.ineq_rhs - qp.ineq_lhs @ x0 if qp.ineq_lhs.shape[0] else np.zeros(0)
    m = null_basis.shape[1]
    y = np.zeros(m)
    working = []

    for it in range(1, max_iterations + 1):
        grad = h @ y + f
        a_w = a_in[working] if working else np.zeros((0, m))
        m_w = a_w.shape[0]
        kkt = np.block([[h, a_w.T], [a_w, np.zeros((m_w, m_w))]])
        rhs = np.concatenate([-grad, np.zeros(m_w)])
        try:
            sol = np.linalg.solve(kkt, rhs)
            if not np.all(np.isfinite(sol)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        step = sol[:m]
        multipliers = sol[m:]

        at_subspace_min = np.linalg.norm(step, np.inf) <= 1e-9 * (1.0 + np.linalg.norm(y, np.inf))
        if not at_subspace_min:
            alpha = 1.0
            blocking = -1
            slack = b_in - a_in @ y
            along = a_in @ step
            for j in range(a_in.shape[0]):
                if j in working or along[j] <= 1e-12:
                    continue
                ratio = slack[j] / along[j]
                if ratio < alpha - 1e-14:
                    alpha = max(ratio, 0.0)
                    blocking = j
            y = y + alpha * step
            if blocking >= 0:
                working.append(blocking)
                continue
            # unblocked full step lands on the subspace minimizer, whose
            # multipliers we already hold; fall through to the test below
        if not working or np.min(multipliers) >= -tol:
            x = x0 + null_basis @ y
            return QpSolution(x, qp.objective(x), "optimal", iterations=it)
        working.pop(int(np.argmin(multipliers)))

    x = x0 + null_basis @ y
    return QpSolution(x, qp.objective(x), "max_iterations", iterations=max_iterations)
