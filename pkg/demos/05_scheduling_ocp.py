"""One solve of the joint control/scheduling problem, dissected.

At each step the controller enumerates every admissible, affordable
transmission schedule for the current (cyclically shrinking) horizon, solves
a dense QP per schedule, and keeps the cheapest.  This script solves a single
instance away from the origin and prints what the optimizer chose.
"""

import numpy as np

from rolltube.cli import load_config
from rolltube.mpc import NcsState, horizon_length, solve_ocp, synth_terminal
from rolltube.network import enumerate_feasible_schedules
from rolltube.tube import synth_tube, tighten

config = load_config("demos/double_integrator.json")
model = config.model
tube = synth_tube(model.A, model.B, model.Q, model.R, model.w_p_set, config.H)
xbar_set, ubar_set = tighten(model.x_p_set, model.u_p_set, tube)
ti = synth_terminal(model, xbar_set, ubar_set)

# Startup corner: full horizon, forced transmission, state far from rest.
state = NcsState([6.0, -2.0], [0.0], 10)
k, s = 0, 0
N = horizon_length(k, config.N_max, ti.M)
candidates = enumerate_feasible_schedules(N, config.H, s, state.beta,
                                          model.g, model.c, model.b,
                                          require_initial_tx=True)
print(f"horizon N({k}) = {N}, candidate schedules: {len(candidates)}")

sol = solve_ocp(state, state, s, k, model, tube, ti, config.N_max, config.H,
                force_initial_tx=True)
print("chosen schedule:", sol.schedule)
print("optimal value:", round(sol.value, 3))
print("planned transmitted inputs:",
      [np.round(u, 3).tolist() for u, gamma in sol.ubar_traj if gamma])
print("predicted nominal plant states:")
for i, xs in enumerate(sol.xbar_traj):
    print(f"  i={i}: x_p={np.round(xs.x_p, 3)}  u_s={np.round(xs.u_s, 3)}  "
          f"beta={xs.beta}")

# The same state with an empty bucket and a stale counter has no admissible
# schedule at all: the window demands a transmission the bucket cannot pay.
starved = NcsState([6.0, -2.0], [0.0], 1)
print("\nstarved-bucket instance:",
      solve_ocp(starved, starved, config.H - 1, 0, model, tube, ti,
                config.N_max, config.H).status)
