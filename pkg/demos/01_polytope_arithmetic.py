"""Polytope arithmetic walkthrough: the set operations behind the controller.

Every constraint-handling step of the controller reduces to a handful of
exact operations on low-dimensional polytopes.  This script shows them on
hand-checkable boxes.
"""

import numpy as np

from rolltube import Polytope, affine_image, minkowski_sum, pontryagin_diff, \
    subset, support

state_box = Polytope.box([-8.0, -8.0], [8.0, 8.0])
error_box = Polytope.box([-0.5, -0.5], [0.5, 0.5])

# Minkowski sum: every point reachable as "a point of P plus a point of Q".
grown = minkowski_sum(error_box, Polytope.box([-0.1, -0.1], [0.1, 0.1]))
print("error_box (+) small box vertices:")
print(np.round(grown.vertices(), 3))

# Pontryagin difference: the states that stay inside state_box even after
# adding any point of error_box.  This is how constraints get tightened.
tightened = pontryagin_diff(state_box, error_box)
print("\nstate_box (-) error_box vertices:")
print(np.round(tightened.vertices(), 3))

# Over-tightening is reported as an explicit empty set, not an exception.
consumed = pontryagin_diff(Polytope.box([-1.0], [1.0]), Polytope.box([-2.0], [2.0]))
print("\nover-tightened interval is empty:", consumed.is_empty)

# Affine images track how sets propagate through dynamics, including maps
# that drop rank: the image of a square under a row vector is an interval.
gain = np.array([[-2.5, -3.4]])
input_image = affine_image(gain, error_box)
print("\nimage of the error box under the feedback gain:",
      np.round(input_image.vertices().ravel(), 3))

# Support functions and containment back everything above.
print("\nsupport of state_box along (1, 1):", support(state_box, [1.0, 1.0]))
print("tightened set fits inside the original:", subset(tightened, state_box))
print("the reverse fails as expected:", subset(state_box, tightened))

# The defining under-approximation property of the difference:
roundtrip = minkowski_sum(tightened, error_box)
print("(P - Q) + Q stays inside P:", subset(roundtrip, state_box, 1e-9))
