"""Shared fixtures: the disturbed double-integrator benchmark instance."""

import numpy as np
import pytest

from rolltube.geometry import Polytope
from rolltube.mpc import NcsModel, synth_terminal
from rolltube.tube import synth_tube, tighten

H_HOLD = 5
N_MAX = 6


@pytest.fixture(scope="session")
def di_model():
    return NcsModel(
        A=[[1.0, 0.1], [0.0, 1.0]],
        B=[[0.005], [0.1]],
        x_p_set=Polytope.box([-8.0, -8.0], [8.0, 8.0]),
        u_p_set=Polytope.box([-15.0], [15.0]),
        w_p_set=Polytope.box([-0.02, -0.02], [0.02, 0.02]),
        g=1, c=3, b=10,
        Q=10.0 * np.eye(2), R=[[1.0]], S=[[1e-6]],
    )


@pytest.fixture(scope="session")
def di_tube(di_model):
    m = di_model
    return synth_tube(m.A, m.B, m.Q, m.R, m.w_p_set, H_HOLD)


@pytest.fixture(scope="session")
def di_tightened(di_model, di_tube):
    return tighten(di_model.x_p_set, di_model.u_p_set, di_tube)


@pytest.fixture(scope="session")
def di_terminal(di_model, di_tightened):
    xbar_set, ubar_set = di_tightened
    return synth_terminal(di_model, xbar_set, ubar_set)
