"""Full closed-loop experiment: disturbed plant, shared network, monitors.

Reproduces the benchmark run: double integrator started at (6, -2) under
uniform disturbances, 100 steps, token bucket g=1/c=3/b=10, hold window H=5.
Saves a plot of the state trajectory and the transmission pattern when
matplotlib is available.
"""

import numpy as np

from rolltube.cli import load_config
from rolltube.mpc import synth_terminal
from rolltube.sim import check_log, run_closed_loop
from rolltube.tube import synth_tube, tighten

config = load_config("demos/double_integrator.json")
model = config.model

tube = synth_tube(model.A, model.B, model.Q, model.R, model.w_p_set, config.H)
xbar_set, ubar_set = tighten(model.x_p_set, model.u_p_set, tube)
ti = synth_terminal(model, xbar_set, ubar_set)

log = run_closed_loop(model, tube, ti, config.sim_config())
report = check_log(log, model, tube, config.H)

tx = log.transmissions()
gaps = np.diff([0] + tx)
print("feasible steps:", report["feasible_steps"], "of", report["steps"])
print("transmissions at k =", tx)
print("largest inter-transmission gap:", int(gaps.max()), f"(window H={config.H})")
print("constraint violations:", report["constraint_violations"])
print("tube violations:", report["tube_violations"])
print("tail nominal state norm:", round(report["tail_xbar_norm"], 4))

inside = [tube.omega_p.contains(r.x.x_p, 1e-7) for r in log]
first_settled = next((k for k in range(len(inside)) if all(inside[k:])), None)
print("plant state permanently inside the tube cross section from k =",
      first_settled)

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed; skipping the plot")
else:
    xs = np.array([r.x.x_p for r in log])
    fig, (ax_state, ax_tx) = plt.subplots(
        2, 1, figsize=(7, 5), height_ratios=[3, 1], sharex=True)
    ax_state.plot(xs[:, 0], label="position")
    ax_state.plot(xs[:, 1], label="velocity")
    bound = tube.omega_p.bounding_box()[1]
    ax_state.axhspan(-bound[0], bound[0], alpha=0.2, label="tube extent (pos)")
    ax_state.legend()
    ax_state.set_ylabel("plant state")
    ax_tx.vlines(tx, 0, 1)
    ax_tx.set_yticks([])
    ax_tx.set_xlabel("time step k")
    ax_tx.set_ylabel("tx")
    fig.tight_layout()
    fig.savefig("closed_loop.png", dpi=120)
    print("plot written to closed_loop.png")
