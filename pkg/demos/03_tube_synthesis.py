"""Synthesizing the error tube for held feedback.

Between transmissions the actuator replays the last received input, so the
correction K(x_p - xbar_p) computed at a transmission acts in open loop for
up to H steps.  The tube cross section must absorb the accumulated
disturbance under every hold length from 1 to H.  The synthesis scales a
template polytope adapted to the closed-loop geometry by the smallest factor
that makes that true.
"""

import numpy as np

from rolltube import Polytope
from rolltube.tube import default_template, disturbance_sums, lift, lqr_gain, \
    synth_rci_scaled_template, synth_tube, tighten, verify_rci

A = np.array([[1.0, 0.1], [0.0, 1.0]])
B = np.array([[0.005], [0.1]])
Q = 10.0 * np.eye(2)
R = np.array([[1.0]])
W = Polytope.box([-0.02, -0.02], [0.02, 0.02])
H = 5

K = lqr_gain(A, B, Q, R)
print("error-feedback gain K:", np.round(K, 4))

# The held input acts through the lifted maps A^i and sum_j A^j B.
lifted = lift(A, B, H)
for i in (1, 3, 5):
    a_i, b_i = lifted[i]
    closed = a_i + b_i @ K
    print(f"spectral radius of hold-{i} closed loop:",
          round(max(abs(np.linalg.eigvals(closed))), 4))

# Disturbance accumulates over the hold; D_5 is already 5 boxes deep.
sums = disturbance_sums(A, W, H)
print("accumulated disturbance bound after 5 held steps:",
      np.round(sums[-1].bounding_box()[1], 4))

# An axis-aligned box template cannot absorb these maps (the position row of
# the held dynamics expands it), so the default template is a polygon tangent
# to the Riccati-metric unit ball.
template = default_template(A, B, Q, R)
print("\ntemplate facets:", template.normals.shape[0])
omega_p = synth_rci_scaled_template(template, K, H, A, B, W)
print("scaled cross-section bounding box:",
      np.round(omega_p.bounding_box()[1], 4))
print("invariance verified:", verify_rci(omega_p, K, H, A, B, W))

# Shrinking by one percent must break invariance: the scaling is minimal.
shrunk = Polytope(omega_p.normals, 0.99 * omega_p.offsets)
print("1% smaller cross section still invariant:",
      verify_rci(shrunk, K, H, A, B, W))

# One-call synthesis bundles gain, template, scaling, and re-verification,
# and the tube then tightens the constraint sets for the nominal predictions.
tube = synth_tube(A, B, Q, R, W, H)
xbar_set, ubar_set = tighten(Polytope.box([-8, -8], [8, 8]),
                             Polytope.box([-15], [15]), tube)
print("\ntightened state box:", np.round(xbar_set.bounding_box()[1], 3))
print("tightened input interval:", np.round(ubar_set.bounding_box()[1], 3))
print("input headroom consumed by the correction term:",
      np.round(tube.k_omega_p.bounding_box()[1], 3))
