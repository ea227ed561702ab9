"""Experiment configuration and command-line entry points.

Subcommands:
  tube       synthesize and verify the error tube, write it as JSON
  terminal   synthesize and verify terminal ingredients, write them as JSON
  run        execute the closed loop, write a CSV log plus a JSON summary
  check      re-verify a CSV log against all closed-loop monitors
  schedules  enumerate admissible, bucket-feasible schedules (debugging aid)

Exit codes: 0 success, 1 infeasibility or verification failure, 2 usage error.
"""

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Polytope
from .mpc import NcsModel, TerminalIngredients, synth_terminal, verify_terminal
from .network import enumerate_feasible_schedules
from .sim import ClosedLoopLog, DisturbanceModel, SimConfig, check_log, run_closed_loop
from .tube import TubeParams, synth_tube, tighten, verify_rci


class ConfigError(ValueError):
    """Configuration file failed validation; message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated experiment description."""

    model: NcsModel
    N_max: int
    H: int
    T_steps: int
    x0: np.ndarray
    u_s0: np.ndarray
    beta0: int
    disturbance_kind: str
    disturbance_seed: int
    disturbance_trace: np.ndarray
    tube_file: str
    terminal_file: str

    @property
    def M(self):
        return self.model.cycle_length

    def sim_config(self, seed=None):
        dist = DisturbanceModel(
            kind=self.disturbance_kind, w_p_set=self.model.w_p_set,
            seed=self.disturbance_seed if seed is None else seed,
            trace=self.disturbance_trace)
        return SimConfig(N_max=self.N_max, H=self.H, T_steps=self.T_steps,
                         x0=self.x0, u_s0=self.u_s0, beta0=self.beta0,
                         disturbance=dist)


def _require(data, key, context):
    if key not in data:
        raise ConfigError(f"missing field '{context}.{key}'" if context else
                          f"missing field '{key}'")
    return data[key]


def load_config(path) -> ExperimentConfig:
    """Load and eagerly validate an experiment JSON file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc

    plant = _require(data, "plant", "")
    sets = _require(data, "sets", "")
    bucket = _require(data, "bucket", "")
    weights = _require(data, "weights", "")
    horizons = _require(data, "horizons", "")
    sim = _require(data, "sim", "")

    try:
        x_p_set = Polytope.from_json_dict(_require(sets, "x_p", "sets"))
        u_p_set = Polytope.from_json_dict(_require(sets, "u_p", "sets"))
        w_p_set = Polytope.from_json_dict(_require(sets, "w_p", "sets"))
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid polytope in 'sets': {exc}") from exc
    for name, poly in (("x_p", x_p_set), ("u_p", u_p_set), ("w_p", w_p_set)):
        if not poly.contains_origin():
            raise ConfigError(f"'sets.{name}' must contain the origin")

    try:
        model = NcsModel(
            A=_require(plant, "A", "plant"), B=_require(plant, "B", "plant"),
            x_p_set=x_p_set, u_p_set=u_p_set, w_p_set=w_p_set,
            g=int(_require(bucket, "g", "bucket")),
            c=int(_require(bucket, "c", "bucket")),
            b=int(_require(bucket, "b", "bucket")),
            Q=_require(weights, "Q", "weights"),
            R=_require(weights, "R", "weights"),
            S=_require(weights, "S", "weights"))
    except ValueError as exc:
        raise ConfigError(f"model validation failed: {exc}") from exc

    N_max = int(_require(horizons, "N_max", "horizons"))
    H = int(_require(horizons, "H", "horizons"))
    M = model.cycle_length
    if H < M:
        raise ConfigError(f"'horizons.H'={H} must be >= cycle length M={M} "
                          f"(= ceil(c/g)): the tube cannot bridge a full token cycle")
    if N_max < H:
        raise ConfigError(f"'horizons.N_max'={N_max} must be >= H={H}")

    dist = _require(sim, "disturbance", "sim")
    kind = _require(dist, "kind", "sim.disturbance")
    trace = None
    if kind == "trace":
        trace_path = Path(_require(dist, "file", "sim.disturbance"))
        if not trace_path.is_absolute():
            trace_path = path.parent / trace_path
        trace = np.loadtxt(trace_path, delimiter=",", ndmin=2)

    x0 = np.asarray(_require(sim, "x0", "sim"), dtype=float).ravel()
    u_s0 = np.asarray(_require(sim, "u_s0", "sim"), dtype=float).ravel()
    beta0 = int(_require(sim, "beta0", "sim"))
    if x0.size != model.n_states:
        raise ConfigError(f"'sim.x0' has {x0.size} entries, plant has {model.n_states} states")
    if u_s0.size != model.n_inputs:
        raise ConfigError(f"'sim.u_s0' has {u_s0.size} entries, plant has {model.n_inputs} inputs")
    if not u_p_set.contains(u_s0):
        raise ConfigError("'sim.u_s0' must lie in the input constraint set")
    if not 0 <= beta0 <= model.b:
        raise ConfigError(f"'sim.beta0'={beta0} outside [0, {model.b}]")

    return ExperimentConfig(
        model=model, N_max=N_max, H=H,
        T_steps=int(_require(sim, "T_steps", "sim")),
        x0=x0, u_s0=u_s0, beta0=beta0,
        disturbance_kind=kind,
        disturbance_seed=int(dist.get("seed", 0)),
        disturbance_trace=trace,
        tube_file=data.get("tube_file"),
        terminal_file=data.get("terminal_file"),
    )


def _resolve_tube(config: ExperimentConfig, config_path):
    if config.tube_file:
        tube_path = Path(config.tube_file)
        if not tube_path.is_absolute() and config_path is not None:
            tube_path = Path(config_path).parent / tube_path
        tube = TubeParams.from_json_dict(json.loads(tube_path.read_text()))
        if tube.H != config.H:
            raise ConfigError(f"tube file holds H={tube.H}, config expects H={config.H}")
        return tube
    m = config.model
    return synth_tube(m.A, m.B, m.Q, m.R, m.w_p_set, config.H)


def _resolve_terminal(config: ExperimentConfig, tube: TubeParams, config_path):
    if config.terminal_file:
        term_path = Path(config.terminal_file)
        if not term_path.is_absolute() and config_path is not None:
            term_path = Path(config_path).parent / term_path
        return TerminalIngredients.from_json_dict(json.loads(term_path.read_text()))
    xbar_set, ubar_set = tighten(config.model.x_p_set, config.model.u_p_set, tube)
    return synth_terminal(config.model, xbar_set, ubar_set)


def _cmd_tube(args):
    config = load_config(args.config)
    m = config.model
    tube = synth_tube(m.A, m.B, m.Q, m.R, m.w_p_set, config.H)
    if not verify_rci(tube.omega_p, tube.K, tube.H, m.A, m.B, m.w_p_set):
        print("tube verification FAILED", file=sys.stderr)
        return 1
    tighten(m.x_p_set, m.u_p_set, tube)  # raises if the tube eats the constraints
    out = Path(args.out) if args.out else Path("tube.json")
    out.write_text(json.dumps(tube.to_json_dict(), indent=2))
    if not args.quiet:
        print(f"tube written to {out} (facets: {tube.omega_p.normals.shape[0]})")
    return 0


def _cmd_terminal(args):
    config = load_config(args.config)
    tube = _resolve_tube(config, args.config)
    xbar_set, ubar_set = tighten(config.model.x_p_set, config.model.u_p_set, tube)
    ti = synth_terminal(config.model, xbar_set, ubar_set)
    if not verify_terminal(ti, config.model, xbar_set, ubar_set):
        print("terminal ingredient verification FAILED", file=sys.stderr)
        return 1
    out = Path(args.out) if args.out else Path("terminal.json")
    out.write_text(json.dumps(ti.to_json_dict(), indent=2))
    if not args.quiet:
        print(f"terminal ingredients written to {out} (M={ti.M})")
    return 0


def _cmd_run(args):
    config = load_config(args.config)
    tube = _resolve_tube(config, args.config)
    ti = _resolve_terminal(config, tube, args.config)
    sim = config.sim_config(seed=args.seed)
    log = run_closed_loop(config.model, tube, ti, sim)
    out = Path(args.out) if args.out else Path("run.csv")
    log.to_csv(out)
    report = check_log(log, config.model, tube, config.H)
    summary_path = out.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(report, indent=2))
    if not args.quiet:
        for key, value in report.items():
            print(f"{key}: {value}")
        print(f"log written to {out}, summary to {summary_path}")
    return 0 if report["ok"] else 1


def _cmd_check(args):
    config = load_config(args.config)
    tube = _resolve_tube(config, args.config)
    log = ClosedLoopLog.from_csv(args.log)
    report = check_log(log, config.model, tube, config.H)
    if not args.quiet:
        for key, value in report.items():
            print(f"{key}: {value}")
    return 0 if report["ok"] else 1


def _cmd_schedules(args):
    if args.config:
        config = load_config(args.config)
        g, c, b = config.model.g, config.model.c, config.model.b
    else:
        g, c, b = args.g, args.c, args.b
    scheds = enumerate_feasible_schedules(args.N, args.H, args.s, args.beta, g, c, b)
    for sched in scheds:
        print(sched)
    if not args.quiet:
        print(f"{len(scheds)} feasible schedules", file=sys.stderr)
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="rolltube",
        description="Robust rollout tube MPC under a token-bucket traffic specification")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command")

    p_tube = sub.add_parser("tube", help="synthesize and write the error tube")
    p_tube.add_argument("--config", required=True)
    p_tube.add_argument("--out")
    p_tube.set_defaults(func=_cmd_tube)

    p_term = sub.add_parser("terminal", help="synthesize and write terminal ingredients")
    p_term.add_argument("--config", required=True)
    p_term.add_argument("--out")
    p_term.set_defaults(func=_cmd_terminal)

    p_run = sub.add_parser("run", help="run the closed loop and write a CSV log")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out")
    p_run.add_argument("--seed", type=int, help="override the disturbance seed")
    p_run.set_defaults(func=_cmd_run)

    p_check = sub.add_parser("check", help="re-verify a CSV log")
    p_check.add_argument("log")
    p_check.add_argument("--config", required=True)
    p_check.set_defaults(func=_cmd_check)

    p_sched = sub.add_parser("schedules", help="enumerate feasible schedules")
    p_sched.add_argument("--N", type=int, required=True)
    p_sched.add_argument("--H", type=int, required=True)
    p_sched.add_argument("--s", type=int, default=0)
    p_sched.add_argument("--beta", type=int, required=True)
    p_sched.add_argument("--config")
    p_sched.add_argument("--g", type=int, default=1)
    p_sched.add_argument("--c", type=int, default=3)
    p_sched.add_argument("--b", type=int, default=10)
    p_sched.set_defaults(func=_cmd_schedules)
    return parser


def dispatch(argv) -> int:
    """Parse arguments and run the chosen subcommand; returns the exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
