"""Robust rollout tube MPC with token-bucket transmission scheduling.

A library for co-designing control inputs and network transmission schedules
for disturbed linear plants whose actuator updates travel over a rate-limited
network.  The controller keeps the real state inside a tube around a nominal
prediction while a schedule constraint bounds the time between transmissions.
"""

__version__ = "0.1.0"

from .geometry import Polytope, minkowski_sum, pontryagin_diff, affine_image, support, subset
from .qpsolve import QuadraticProgram, QpSolution, solve as solve_qp
from .network import TokenBucket, Schedule, bucket_step, bucket_trajectory, \
    in_schedule_set, enumerate_feasible_schedules, counter_update
from .tube import LiftedMatrices, TubeParams, lift, disturbance_sums, verify_rci, \
    synth_rci_scaled_template, error_feedback, tighten, error_containment_trial, \
    default_template, synth_tube
from .mpc import NcsModel, NcsState, TerminalIngredients, OcpSolution, ncs_step, \
    stage_cost, rotated_stage_cost, horizon_length, synth_terminal, verify_terminal, \
    build_fixed_schedule_qp, solve_ocp, terminal_control
from .sim import DisturbanceModel, ClosedLoopLog, SimConfig, run_closed_loop, \
    sample_disturbance, check_log
from .cli import ExperimentConfig, load_config, dispatch
