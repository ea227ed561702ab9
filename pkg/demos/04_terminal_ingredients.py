"""Terminal ingredients for the transmit-then-hold cycle.

The bucket earns a transmission every M = ceil(c/g) steps, so the natural
terminal behavior is periodic: transmit a linear feedback at the cycle start,
then hold it.  The terminal cost must decrease over one full cycle, and the
terminal region must be invariant for the M-step closed loop while keeping
all intermediate hold states feasible.
"""

import numpy as np

from rolltube.cli import load_config
from rolltube.mpc import synth_terminal, terminal_control, verify_terminal, NcsState
from rolltube.tube import lift, synth_tube, tighten

config = load_config("demos/double_integrator.json")
model = config.model
print("cycle length M = ceil(c/g) =", model.cycle_length)

tube = synth_tube(model.A, model.B, model.Q, model.R, model.w_p_set, config.H)
xbar_set, ubar_set = tighten(model.x_p_set, model.u_p_set, tube)

ti = synth_terminal(model, xbar_set, ubar_set)
print("terminal gain K_f:", np.round(ti.K_f, 4))
print("terminal cost P_f:\n", np.round(ti.P_f, 2))

lifted = lift(model.A, model.B, ti.M)
cycle_map = lifted[ti.M][0] + lifted[ti.M][1] @ ti.K_f
print("spectral radius of the cycle map:",
      round(max(abs(np.linalg.eigvals(cycle_map))), 4))

print("terminal region vertices:")
print(np.round(ti.x_f_p.vertices(), 3))
print("all containment and decrease conditions verified:",
      verify_terminal(ti, model, xbar_set, ubar_set))

# The terminal law itself: transmit K_f * xbar_p at the cycle start, then
# coast on the held value.
x = NcsState([2.0, -1.0], [0.0], 10)
for i in range(ti.M):
    u_c, gamma = terminal_control(x, ti, i)
    print(f"cycle step {i}: transmit={gamma} u_c={np.round(u_c, 3)}")
