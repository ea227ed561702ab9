"""Closed-loop execution, disturbance generation, and run monitors.

The loop follows the receding-horizon scheme exactly: solve the scheduling
OCP, transmit the corrected input when the chosen schedule starts with a
transmission (forcing one at startup), advance the nominal state to the
solver's one-step-ahead prediction, and step the real plant with a sampled
disturbance.  Infeasibility is logged and the run truncated rather than
aborted, which keeps failed tube or terminal sizings diagnosable.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .geometry import Polytope
from .mpc import NcsModel, NcsState, TerminalIngredients, \
    rotated_stage_cost, stage_cost, ncs_step, solve_ocp
from .network import counter_update
from .tube import TubeParams, error_feedback, tighten

DISTURBANCE_KINDS = ("zero", "uniform_box", "vertex_adversarial", "trace")


@dataclass(frozen=True)
class DisturbanceModel:
    """Sample source for plant disturbances, always inside the bounding set."""

    kind: str
    w_p_set: Polytope
    seed: int = 0
    trace: np.ndarray = None

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}, "
                             f"expected one of {DISTURBANCE_KINDS}")
        if self.kind == "trace":
            if self.trace is None:
                raise ValueError("trace disturbance needs a trace array")
            object.__setattr__(self, "trace",
                               np.atleast_2d(np.asarray(self.trace, dtype=float)))


def sample_disturbance(model: DisturbanceModel, k: int) -> np.ndarray:
    """Disturbance for step k; deterministic given (seed, k)."""
    dim = model.w_p_set.dim
    if model.kind == "zero":
        return np.zeros(dim)
    if model.kind == "trace":
        if k >= model.trace.shape[0]:
            raise IndexError(f"disturbance trace exhausted at step {k}")
        return model.trace[k].copy()
    rng = np.random.default_rng((int(model.seed), int(k)))
    if model.kind == "vertex_adversarial":
        verts = model.w_p_set.vertices()
        order = np.lexsort(verts.T[::-1])
        return verts[order][rng.integers(len(verts))].copy()
    lo, hi = model.w_p_set.bounding_box()
    for _ in range(10000):
        draw = rng.uniform(lo, hi)
        if model.w_p_set.contains(draw):
            return draw
    raise RuntimeError("rejection sampling failed; disturbance set too thin")


@dataclass(frozen=True)
class SimConfig:
    """Run parameters for the closed loop."""

    N_max: int
    H: int
    T_steps: int
    x0: np.ndarray
    u_s0: np.ndarray
    beta0: int
    disturbance: DisturbanceModel


@dataclass(frozen=True)
class LogRecord:
    k: int
    x: NcsState
    xbar: NcsState
    u_c: np.ndarray
    gamma: int
    s: int
    N: int
    ocp_value: float
    rotated_value: float
    stage_cost: float
    feasible: bool


@dataclass
class ClosedLoopLog:
    """Per-step records of one closed-loop run."""

    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def transmissions(self):
        return [r.k for r in self.records if r.gamma == 1]

    def to_csv(self, path):
        if not self.records:
            raise ValueError("refusing to write an empty log")
        n = self.records[0].x.x_p.size
        m = self.records[0].x.u_s.size
        header = (["k"] + [f"xp{i}" for i in range(n)] + [f"us{i}" for i in range(m)]
                  + ["beta", "gamma", "s", "N", "ocp_value", "rotated_value",
                     "stage_cost", "feasible"]
                  + [f"nom_xp{i}" for i in range(n)] + [f"nom_us{i}" for i in range(m)]
                  + ["nom_beta"] + [f"uc{i}" for i in range(m)])
        fmt = lambda v: f"{float(v):.17g}"
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for r in self.records:
                row = ([r.k] + [fmt(v) for v in r.x.x_p] + [fmt(v) for v in r.x.u_s]
                       + [r.x.beta, r.gamma, r.s, r.N, fmt(r.ocp_value),
                          fmt(r.rotated_value), fmt(r.stage_cost), int(r.feasible)]
                       + [fmt(v) for v in r.xbar.x_p] + [fmt(v) for v in r.xbar.u_s]
                       + [r.xbar.beta] + [fmt(v) for v in r.u_c])
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            n = sum(1 for h in header if h.startswith("xp"))
            m = sum(1 for h in header if h.startswith("us"))
            col = {name: i for i, name in enumerate(header)}
            records = []
            for row in reader:
                x = NcsState(
                    [float(row[col[f"xp{i}"]]) for i in range(n)],
                    [float(row[col[f"us{i}"]]) for i in range(m)],
                    int(float(row[col["beta"]])),
                )
                xbar = NcsState(
                    [float(row[col[f"nom_xp{i}"]]) for i in range(n)],
                    [float(row[col[f"nom_us{i}"]]) for i in range(m)],
                    int(float(row[col["nom_beta"]])),
                )
                records.append(LogRecord(
                    k=int(row[col["k"]]), x=x, xbar=xbar,
                    u_c=np.array([float(row[col[f"uc{i}"]]) for i in range(m)]),
                    gamma=int(row[col["gamma"]]), s=int(row[col["s"]]),
                    N=int(row[col["N"]]),
                    ocp_value=float(row[col["ocp_value"]]),
                    rotated_value=float(row[col["rotated_value"]]),
                    stage_cost=float(row[col["stage_cost"]]),
                    feasible=bool(int(row[col["feasible"]])),
                ))
        return cls(records)


def run_closed_loop(model: NcsModel, tube: TubeParams, ti: TerminalIngredients,
                    config: SimConfig) -> ClosedLoopLog:
    """Execute the rollout scheme for T_steps or until infeasibility.

    Startup transmits unconditionally (the schedule enumeration at k=0 is
    restricted to schedules opening with a transmission), and the initial
    nominal state is the measured state itself, so the initial error is zero.
    """
    M = ti.M
    if not (config.N_max >= config.H >= M):
        raise ValueError(f"need N_max >= H >= M, got "
                         f"N_max={config.N_max}, H={config.H}, M={M}")
    if config.beta0 < model.c - model.g:
        raise ValueError(f"beta0={config.beta0} cannot afford the startup "
                         f"transmission (needs >= {model.c - model.g})")
    xbar_set, ubar_set = tighten(model.x_p_set, model.u_p_set, tube)

    x = NcsState(config.x0, config.u_s0, config.beta0)
    xbar = x
    s = 0
    log = ClosedLoopLog()
    for k in range(config.T_steps):
        sol = solve_ocp(x, xbar, s, k, model, tube, ti, config.N_max, config.H,
                        force_initial_tx=(k == 0),
                        xbar_set=xbar_set, ubar_set=ubar_set)
        N_k = config.N_max - (k % M)
        if sol.status != "optimal":
            log.records.append(LogRecord(
                k=k, x=x, xbar=xbar, u_c=np.zeros(model.n_inputs), gamma=0,
                s=s, N=N_k, ocp_value=float("nan"), rotated_value=float("nan"),
                stage_cost=float("nan"), feasible=False))
            break
        u_c_nominal, gamma = sol.ubar_traj[0]
        if gamma:
            u_c = error_feedback(u_c_nominal, x.x_p, sol.xbar_traj[0].x_p, tube.K)
        else:
            u_c = np.zeros(model.n_inputs)
        w = sample_disturbance(config.disturbance, k)
        log.records.append(LogRecord(
            k=k, x=x, xbar=sol.xbar_traj[0], u_c=u_c, gamma=gamma, s=s, N=N_k,
            ocp_value=sol.value,
            rotated_value=rotated_stage_cost(sol.xbar_traj[0], (u_c_nominal, gamma), model),
            stage_cost=stage_cost(x, (u_c, gamma), model),
            feasible=True))
        x = ncs_step(x, (u_c, gamma), model, w)
        xbar = sol.xbar_traj[1]
        s = counter_update(s, gamma)
    return log


def check_log(log: ClosedLoopLog, model: NcsModel, tube: TubeParams, H: int,
              tol: float = 1e-7) -> dict:
    """Monitors for the closed-loop guarantees.

    Checks, over the feasible prefix of the log: every length-H window holds
    at least one transmission; real state and applied input never violate the
    original constraints; the real-minus-nominal error stays in the tube with
    matching bucket levels; and spent tokens never exceed earned ones.  Tail
    norms of the nominal plant state and held input indicate convergence.
    """
    if not log.records:
        raise ValueError("cannot check an empty log")
    records = list(log.records)
    feasible = [r for r in records if r.feasible]

    gammas = [r.gamma for r in feasible]
    window_min = None
    if len(gammas) >= H:
        window_min = min(sum(gammas[i:i + H]) for i in range(len(gammas) - H + 1))

    constraint_violations = 0
    tube_violations = 0
    for r in feasible:
        state_ok = model.x_p_set.contains(r.x.x_p, tol)
        held_ok = model.u_p_set.contains(r.x.u_s, tol)
        applied = r.u_c if r.gamma else r.x.u_s
        input_ok = model.u_p_set.contains(applied, tol)
        beta_ok = 0 <= r.x.beta <= model.b
        if not (state_ok and held_ok and input_ok and beta_ok):
            constraint_violations += 1
        err_ok = (tube.omega_p.contains(r.x.x_p - r.xbar.x_p, tol)
                  and tube.k_omega_p.contains(r.x.u_s - r.xbar.u_s, tol)
                  and r.x.beta == r.xbar.beta)
        if not err_ok:
            tube_violations += 1

    tail = feasible[-10:]
    tail_xbar = max(float(np.linalg.norm(r.xbar.x_p)) for r in tail)
    tail_ubar = max(float(np.linalg.norm(r.xbar.u_s)) for r in tail)

    total_tx = sum(gammas)
    beta0 = records[0].x.beta
    token_ok = model.c * total_tx <= beta0 + len(feasible) * model.g

    report = {
        "steps": len(records),
        "feasible_steps": len(feasible),
        "all_feasible": len(feasible) == len(records),
        "window_min_tx": window_min,
        "window_ok": window_min is None or window_min >= 1,
        "constraint_violations": constraint_violations,
        "tube_violations": tube_violations,
        "transmissions": total_tx,
        "token_ok": token_ok,
        "tail_xbar_norm": tail_xbar,
        "tail_ubar_norm": tail_ubar,
    }
    report["ok"] = (report["all_feasible"] and report["window_ok"]
                    and constraint_violations == 0 and tube_violations == 0
                    and token_ok)
    return report
