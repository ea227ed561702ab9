"""Prediction model, costs, terminal ingredients, and the scheduling OCP.

The overall plant model couples three blocks: the disturbed linear plant, the
actuator's held input, and the token-bucket level.  The controller solves, at
every step, an optimal control problem over both a binary transmission
schedule and the continuous inputs.  Binary and continuous parts decouple
cleanly: for a fixed schedule the bucket trajectory is a constant, the held
input is a selection among transmitted values, and the remaining problem is a
dense convex QP in the transmitted inputs (plus the initial nominal state
when a transmission is scheduled immediately).  The schedule dimension is
handled by exact enumeration, which is cheap at horizons up to ~10.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import Polytope, affine_image, prune, subset
from .network import Schedule, bucket_trajectory, enumerate_feasible_schedules
from .qpsolve import QuadraticProgram, solve as solve_qp
from .tube import TubeParams, lift, lqr_gain, tighten

VALUE_TIE_TOL = 1e-9
LYAPUNOV_MARGIN = 1e-8


@dataclass(frozen=True)
class NcsModel:
    """Plant, constraint sets, bucket parameters, and cost weights."""

    A: np.ndarray
    B: np.ndarray
    x_p_set: Polytope
    u_p_set: Polytope
    w_p_set: Polytope
    g: int
    c: int
    b: int
    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, dtype=float)))
        object.__setattr__(self, "B", np.atleast_2d(np.asarray(self.B, dtype=float)))
        for name in ("Q", "R", "S"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        n, m = self.B.shape
        if self.A.shape != (n, n):
            raise ValueError(f"A must be {n}x{n} to match B")
        for name, mat, size in (("Q", self.Q, n), ("R", self.R, m), ("S", self.S, m)):
            if mat.shape != (size, size):
                raise ValueError(f"{name} must be {size}x{size}")
            if np.max(np.abs(mat - mat.T)) > 1e-12:
                raise ValueError(f"{name} must be symmetric")
        if np.linalg.eigvalsh(self.Q).min() <= 0:
            raise ValueError("Q must be positive definite")
        if np.linalg.eigvalsh(self.R).min() <= 0:
            raise ValueError("R must be positive definite")
        if np.linalg.eigvalsh(self.S).min() <= 0:
            raise ValueError("S must be positive definite")
        if np.linalg.eigvalsh(self.R - self.S).min() < -1e-12:
            raise ValueError("R - S must be positive semidefinite")
        if self.x_p_set.dim != n or self.w_p_set.dim != n:
            raise ValueError("state/disturbance sets must match plant dimension")
        if self.u_p_set.dim != m:
            raise ValueError("input set must match input dimension")
        if self.g < 1 or self.c < self.g or self.b < self.c - self.g:
            raise ValueError("bucket parameters require g >= 1, c >= g, b >= c - g")

    @property
    def n_states(self):
        return self.B.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    @property
    def cycle_length(self):
        """Base period: steps needed to earn one transmission's tokens."""
        return math.ceil(self.c / self.g)


@dataclass(frozen=True)
class NcsState:
    """Composite state: plant state, held actuator value, bucket level."""

    x_p: np.ndarray
    u_s: np.ndarray
    beta: int

    def __post_init__(self):
        object.__setattr__(self, "x_p", np.asarray(self.x_p, dtype=float).ravel())
        object.__setattr__(self, "u_s", np.asarray(self.u_s, dtype=float).ravel())
        object.__setattr__(self, "beta", int(self.beta))


def ncs_step(x: NcsState, u, model: NcsModel, w=None) -> NcsState:
    """One step of the overall dynamics; ``u`` is a pair (u_c, gamma).

    The applied plant input is the transmitted value on gamma=1 and the held
    value otherwise; the bucket gains g and pays gamma*c, saturating at b.
    Raises on a transmission the bucket cannot afford.
    """
    u_c, gamma = u
    if gamma not in (0, 1):
        raise ValueError("gamma must be 0 or 1")
    raw = x.beta + model.g - gamma * model.c
    if raw < 0:
        raise ValueError(f"token violation: level {x.beta} cannot afford transmission")
    applied = np.asarray(u_c, dtype=float).ravel() if gamma else x.u_s
    x_p_next = model.A @ x.x_p + model.B @ applied
    if w is not None:
        x_p_next = x_p_next + np.asarray(w, dtype=float).ravel()
    return NcsState(x_p_next, applied, min(raw, model.b))


def stage_cost(x: NcsState, u, model: NcsModel) -> float:
    """Quadratic running cost on plant state and the effectively applied input."""
    u_c, gamma = u
    applied = np.asarray(u_c, dtype=float).ravel() if gamma else x.u_s
    return float(x.x_p @ model.Q @ x.x_p + applied @ model.R @ applied)


def rotated_stage_cost(x: NcsState, u, model: NcsModel) -> float:
    """Stage cost shifted by the held-input storage u_s' S u_s.

    Telescopes along trajectories; nonnegative whenever R - S is positive
    semidefinite, which is what makes it usable as a convergence certificate.
    """
    u_c, gamma = u
    successor = np.asarray(u_c, dtype=float).ravel() if gamma else x.u_s
    storage_now = float(x.u_s @ model.S @ x.u_s)
    storage_next = float(successor @ model.S @ successor)
    return stage_cost(x, u, model) + storage_now - storage_next


def horizon_length(k: int, N_max: int, M: int) -> int:
    """Cyclically shrinking horizon N_max - (k mod M)."""
    if M < 1 or N_max < M:
        raise ValueError("need N_max >= M >= 1")
    return N_max - (k % M)


# --------------------------------------------------------------------------
# terminal ingredients
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TerminalIngredients:
    """Terminal gain, cost matrix, plant-state terminal region, cycle length."""

    K_f: np.ndarray
    P_f: np.ndarray
    x_f_p: Polytope
    M: int

    def to_json_dict(self):
        return {
            "K_f": np.asarray(self.K_f).tolist(),
            "P_f": np.asarray(self.P_f).tolist(),
            "x_f_p": self.x_f_p.to_json_dict(),
            "M": self.M,
        }

    @classmethod
    def from_json_dict(cls, data):
        return cls(
            K_f=np.atleast_2d(np.asarray(data["K_f"], dtype=float)),
            P_f=np.atleast_2d(np.asarray(data["P_f"], dtype=float)),
            x_f_p=Polytope.from_json_dict(data["x_f_p"]),
            M=int(data["M"]),
        )


def _closed_loop_maps(model: NcsModel, K_f, M):
    lifted = lift(model.A, model.B, M)
    return lifted, [lifted[i][0] + lifted[i][1] @ K_f for i in range(M + 1)]


def synth_terminal(model: NcsModel, xbar_set: Polytope, ubar_set: Polytope,
                   M: int = None, max_fixpoint_iters: int = 100) -> TerminalIngredients:
    """Terminal gain, cost, and region for the M-step transmit-then-hold cycle.

    K_f is the LQ gain of the lifted pair (A_M, B_M) with weights (Q, M R).
    P_f solves the discrete Lyapunov equation whose right-hand side is the
    full cycle cost plus a small margin, so the cycle-wise decrease condition
    holds with numerical slack.  The terminal region is the maximal
    invariant subset of the constraint region
    C = {x in tightened X : K_f x in tightened U, intermediate hold states
    in tightened X}, computed by the standard backward fixpoint.
    """
    if M is None:
        M = model.cycle_length
    lifted = lift(model.A, model.B, M)
    a_m, b_m = lifted[M]
    n = model.n_states
    ctrb = np.hstack([np.linalg.matrix_power(a_m, i) @ b_m for i in range(n)])
    if np.linalg.matrix_rank(ctrb) < n:
        raise ValueError("lifted pair (A_M, B_M) is not controllable")
    K_f = lqr_gain(a_m, b_m, model.Q, M * model.R)
    _, closed = _closed_loop_maps(model, K_f, M)
    rhs = sum(closed[i].T @ model.Q @ closed[i] for i in range(M))
    rhs = rhs + M * K_f.T @ model.R @ K_f + LYAPUNOV_MARGIN * np.eye(n)
    P_f = scipy.linalg.solve_discrete_lyapunov(closed[M].T, rhs)
    P_f = 0.5 * (P_f + P_f.T)

    rows = [xbar_set.normals]
    offs = [xbar_set.offsets]
    rows.append(ubar_set.normals @ K_f)
    offs.append(ubar_set.offsets)
    for i in range(1, M):
        rows.append(xbar_set.normals @ closed[i])
        offs.append(xbar_set.offsets)
    region = prune(Polytope(np.vstack(rows), np.concatenate(offs)))
    if region.is_empty:
        raise ValueError("terminal constraint region is empty")

    for _ in range(max_fixpoint_iters):
        pre_rows = region.normals @ closed[M]
        candidate = prune(Polytope(np.vstack([region.normals, pre_rows]),
                                   np.concatenate([region.offsets, region.offsets])))
        if candidate.is_empty:
            raise ValueError("terminal region fixpoint collapsed to the empty set")
        if subset(region, candidate, 1e-9) and subset(candidate, region, 1e-9):
            region = candidate
            break
        region = candidate
    else:
        raise ValueError(f"terminal region fixpoint not reached in {max_fixpoint_iters} iterations")

    if not region.contains_origin():
        raise ValueError("terminal region does not contain the origin")
    return TerminalIngredients(K_f=K_f, P_f=P_f, x_f_p=region, M=M)


def verify_terminal(ti: TerminalIngredients, model: NcsModel, xbar_set: Polytope,
                    ubar_set: Polytope, tol: float = 1e-9) -> bool:
    """Check the terminal region containments and the cycle decrease condition."""
    M = ti.M
    _, closed = _closed_loop_maps(model, ti.K_f, M)
    region = ti.x_f_p
    if region.is_empty or not region.contains_origin(tol):
        return False
    if not subset(region, xbar_set, tol):
        return False
    if not subset(affine_image(ti.K_f, region), ubar_set, tol):
        return False
    for i in range(1, M):
        if not subset(affine_image(closed[i], region), xbar_set, tol):
            return False
    if not subset(affine_image(closed[M], region), region, tol):
        return False
    if np.linalg.eigvalsh(0.5 * (ti.P_f + ti.P_f.T)).min() <= 0:
        return False
    cycle_cost = sum(closed[i].T @ model.Q @ closed[i] for i in range(M))
    cycle_cost = cycle_cost + M * ti.K_f.T @ model.R @ ti.K_f
    residual = -(closed[M].T @ ti.P_f @ closed[M] - ti.P_f) - cycle_cost
    return bool(np.linalg.eigvalsh(0.5 * (residual + residual.T)).min() >= -tol)


def terminal_control(xbar: NcsState, ti: TerminalIngredients, i: int):
    """Cycle-periodic terminal law: transmit K_f xbar_p at cycle start, then hold."""
    if not 0 <= i <= ti.M - 1:
        raise ValueError(f"cycle index {i} outside [0, {ti.M - 1}]")
    if i == 0:
        return np.asarray(ti.K_f @ xbar.x_p).ravel(), 1
    return np.zeros(ti.K_f.shape[0]), 0


# --------------------------------------------------------------------------
# fixed-schedule QP
# --------------------------------------------------------------------------

class _FixedScheduleProblem:
    """Dense QP for one schedule plus the affine maps to rebuild trajectories.

    Decision vector: [xbar_p(0), ubar_s(0)] when the schedule transmits at
    step 0, followed by one transmitted input per scheduled transmission.
    Dynamics are eliminated by forward substitution; the bucket trajectory is
    a schedule-only constant.  Constant constraint violations (bucket bounds,
    fixed initial state outside its constraints) become an inconsistent row
    so that infeasibility always surfaces through the QP solver.
    """

    def __init__(self, x: NcsState, xbar: NcsState, sched: Schedule,
                 model: NcsModel, tube: TubeParams, ti: TerminalIngredients,
                 xbar_set: Polytope, ubar_set: Polytope):
        n, m = model.n_states, model.n_inputs
        bits = sched.bits
        N = sched.n_steps
        tx = sched.tx_indices
        free_initial = bool(bits) and bits[0] == 1

        if free_initial:
            n_vars = n + m + m * len(tx)
            uc_offset = n + m
        else:
            n_vars = m * len(tx)
            uc_offset = 0
        self.n_vars = n_vars
        self.schedule = sched
        self.uc_slices = {}
        for pos, i in enumerate(tx):
            self.uc_slices[i] = slice(uc_offset + m * pos, uc_offset + m * (pos + 1))

        beta0 = x.beta if free_initial else xbar.beta
        self.beta_levels, bucket_ok = bucket_trajectory(
            beta0, sched, model.g, model.c, model.b)

        if free_initial:
            xp_c = np.zeros((n, n_vars)); xp_c[:, :n] = np.eye(n)
            xp_d = np.zeros(n)
            us_c = np.zeros((m, n_vars)); us_c[:, n:n + m] = np.eye(m)
            us_d = np.zeros(m)
        else:
            xp_c = np.zeros((n, n_vars)); xp_d = xbar.x_p.copy()
            us_c = np.zeros((m, n_vars)); us_d = xbar.u_s.copy()

        hess = np.zeros((n_vars, n_vars))
        lin = np.zeros(n_vars)
        self.constant = 0.0
        ineq_rows, ineq_rhs = [], []

        def add_quadratic(coef, off, weight):
            nonlocal hess, lin
            hess += 2.0 * coef.T @ weight @ coef
            lin += 2.0 * coef.T @ weight @ off
            self.constant += float(off @ weight @ off)

        def add_membership(coef, off, poly):
            for normal, offset in zip(poly.normals, poly.offsets):
                ineq_rows.append(normal @ coef)
                ineq_rhs.append(offset - float(normal @ off))

        def add_inconsistent():
            ineq_rows.append(np.zeros(n_vars))
            ineq_rhs.append(-1.0)

        # initial coupling: real state must sit in the tube around the new
        # nominal state (free initial), or the nominal state is carried over
        if free_initial:
            for normal, offset in zip(tube.omega_p.normals, tube.omega_p.offsets):
                ineq_rows.append(-(normal @ xp_c))
                ineq_rhs.append(offset - float(normal @ (x.x_p - xp_d)))
            for normal, offset in zip(tube.k_omega_p.normals, tube.k_omega_p.offsets):
                ineq_rows.append(-(normal @ us_c))
                ineq_rhs.append(offset - float(normal @ (x.u_s - us_d)))

        if not bucket_ok:
            add_inconsistent()

        add_quadratic(us_c, us_d, model.S)  # held-input storage at horizon start

        self.xp_maps = [(xp_c.copy(), xp_d.copy())]
        self.us_maps = [(us_c.copy(), us_d.copy())]
        for i in range(N):
            add_membership(xp_c, xp_d, xbar_set)
            add_membership(us_c, us_d, ubar_set)
            if bits[i] == 1:
                uc_c = np.zeros((m, n_vars))
                uc_c[:, self.uc_slices[i]] = np.eye(m)
                uc_d = np.zeros(m)
                add_membership(uc_c, uc_d, ubar_set)
                add_quadratic(xp_c, xp_d, model.Q)
                add_quadratic(uc_c, uc_d, model.R)
                xp_c = model.A @ xp_c + model.B @ uc_c
                xp_d = model.A @ xp_d + model.B @ uc_d
                us_c, us_d = uc_c, uc_d
            else:
                add_quadratic(xp_c, xp_d, model.Q)
                add_quadratic(us_c, us_d, model.R)
                xp_c = model.A @ xp_c + model.B @ us_c
                xp_d = model.A @ xp_d + model.B @ us_d
            self.xp_maps.append((xp_c.copy(), xp_d.copy()))
            self.us_maps.append((us_c.copy(), us_d.copy()))

        # terminal region on all three blocks
        add_membership(xp_c, xp_d, ti.x_f_p)
        add_membership(us_c, us_d, ubar_set)
        if not model.c - model.g <= self.beta_levels[N] <= model.b:
            add_inconsistent()
        add_quadratic(xp_c, xp_d, ti.P_f)

        self.qp = QuadraticProgram(
            hessian=hess, linear=lin,
            ineq_lhs=np.array(ineq_rows) if ineq_rows else None,
            ineq_rhs=np.array(ineq_rhs) if ineq_rhs else None,
        )

    def trajectories(self, z):
        xbar_traj = tuple(
            NcsState(c @ z + d, self.us_maps[i][0] @ z + self.us_maps[i][1],
                     self.beta_levels[i])
            for i, (c, d) in enumerate(self.xp_maps)
        )
        m = self.us_maps[0][0].shape[0]
        ubar_traj = tuple(
            (z[self.uc_slices[i]].copy() if bit else np.zeros(m), bit)
            for i, bit in enumerate(self.schedule.bits)
        )
        return xbar_traj, ubar_traj


def build_fixed_schedule_qp(x: NcsState, xbar: NcsState, sched: Schedule,
                            model: NcsModel, tube: TubeParams,
                            ti: TerminalIngredients,
                            xbar_set: Polytope = None,
                            ubar_set: Polytope = None) -> QuadraticProgram:
    """QP over the continuous decisions for one fixed transmission schedule.

    The caller is responsible for schedule admissibility; tightened sets are
    derived from the tube when not supplied.
    """
    if xbar_set is None or ubar_set is None:
        xbar_set, ubar_set = tighten(model.x_p_set, model.u_p_set, tube)
    return _FixedScheduleProblem(x, xbar, sched, model, tube, ti,
                                 xbar_set, ubar_set).qp


# --------------------------------------------------------------------------
# schedule-enumerated OCP
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OcpSolution:
    """Chosen schedule, nominal trajectories, and optimal value."""

    schedule: Schedule
    xbar_traj: tuple
    ubar_traj: tuple
    value: float
    status: str  # optimal | infeasible

    @classmethod
    def infeasible(cls):
        return cls(Schedule(()), (), (), float("inf"), "infeasible")


def solve_ocp(x: NcsState, xbar: NcsState, s: int, k: int, model: NcsModel,
              tube: TubeParams, ti: TerminalIngredients, N_max: int, H: int,
              M: int = None, force_initial_tx: bool = False,
              xbar_set: Polytope = None, ubar_set: Polytope = None) -> OcpSolution:
    """Exact solution of the scheduling OCP by enumeration over schedules.

    Every admissible, bucket-feasible schedule of the current horizon length
    gets its own QP; the best feasible one wins.  Ties within 1e-9 prefer
    fewer transmissions, then the lexicographically smallest bit-string, so
    runs are reproducible and tokens are conserved.
    """
    if M is None:
        M = ti.M
    if not (N_max >= H >= M):
        raise ValueError(f"need N_max >= H >= M, got N_max={N_max}, H={H}, M={M}")
    if xbar_set is None or ubar_set is None:
        xbar_set, ubar_set = tighten(model.x_p_set, model.u_p_set, tube)

    N = horizon_length(k, N_max, M)
    candidates = []
    for sched in enumerate_feasible_schedules(N, H, s, x.beta, model.g, model.c,
                                              model.b, require_initial_tx=force_initial_tx):
        problem = _FixedScheduleProblem(x, xbar, sched, model, tube, ti,
                                        xbar_set, ubar_set)
        result = solve_qp(problem.qp)
        if result.status == "max_iterations":
            raise RuntimeError(f"QP did not converge for schedule {sched}")
        if result.status == "optimal":
            total = result.value + problem.constant
            candidates.append((total, sched.n_tx, str(sched), sched, problem, result))

    if not candidates:
        return OcpSolution.infeasible()
    best_value = min(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] <= best_value + VALUE_TIE_TOL]
    winner = min(tied, key=lambda c: (c[1], c[2]))
    total, _, _, sched, problem, result = winner
    xbar_traj, ubar_traj = problem.trajectories(result.point)
    return OcpSolution(schedule=sched, xbar_traj=xbar_traj, ubar_traj=ubar_traj,
                       value=float(total), status="optimal")
