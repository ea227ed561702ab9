"""Tube synthesis and verification, checked against trajectory simulation."""

import itertools

import numpy as np
import pytest

from rolltube.geometry import Polytope, affine_image, subset
from rolltube.tube import (
    TubeParams, TubeSynthesisError, TighteningError, default_template,
    disturbance_sums, error_containment_trial, error_feedback, lift, lqr_gain,
    synth_rci_scaled_template, synth_tube, tighten, verify_rci,
)


class TestLift:
    def test_double_integrator_powers(self):
        lifted = lift([[1.0, 0.1], [0.0, 1.0]], [[0.005], [0.1]], 2)
        a2, b2 = lifted[2]
        assert np.allclose(a2, [[1.0, 0.2], [0.0, 1.0]])
        assert np.allclose(b2.ravel(), [0.02, 0.2])

    def test_first_step_is_plant(self):
        a = np.array([[0.5, 0.1], [0.0, 0.9]])
        b = np.array([[1.0], [2.0]])
        lifted = lift(a, b, 1)
        assert np.allclose(lifted[1][0], a)
        assert np.allclose(lifted[1][1], b)

    def test_base_case_and_recurrence(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((3, 3))
        b = rng.standard_normal((3, 2))
        lifted = lift(a, b, 6)
        assert np.allclose(lifted[0][0], np.eye(3))
        assert np.allclose(lifted[0][1], 0.0)
        for i in range(6):
            a_i, b_i = lifted[i]
            a_n, b_n = lifted[i + 1]
            assert np.allclose(a_n, a @ a_i)
            assert np.array_equal(b_n, a @ b_i + b)  # recurrence holds exactly

    def test_matches_power_series_oracle(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((2, 2))
        b = rng.standard_normal((2, 1))
        lifted = lift(a, b, 5)
        for i in range(6):
            assert np.allclose(lifted[i][0], np.linalg.matrix_power(a, i))
            series = sum(np.linalg.matrix_power(a, j) @ b for j in range(i)) \
                if i else np.zeros_like(b)
            assert np.allclose(lifted[i][1], series)


class TestDisturbanceSums:
    def test_first_sum_is_the_set_itself(self):
        w = Polytope.box([-0.1, -0.1], [0.1, 0.1])
        sums = disturbance_sums(np.eye(2), w, 3)
        assert sums[0] == w

    def test_identity_dynamics_scales_box(self):
        w = Polytope.box([-0.1, -0.1], [0.1, 0.1])
        sums = disturbance_sums(np.eye(2), w, 4)
        for i, d in enumerate(sums, start=1):
            assert d == Polytope.box([-0.1 * i, -0.1 * i], [0.1 * i, 0.1 * i])

    def test_vertex_sum_oracle(self, di_model):
        sums = disturbance_sums(di_model.A, di_model.w_p_set, 2)
        w_verts = di_model.w_p_set.vertices()
        mapped = w_verts @ di_model.A.T
        brute = Polytope.from_vertices(
            np.array([a + b for a in w_verts for b in mapped]))
        assert sums[1] == brute


class TestVerifyRci:
    def test_scalar_hand_check_passes(self):
        # 0.5 * [-0.2, 0.2] + [-0.1, 0.1] = [-0.2, 0.2]
        assert verify_rci(Polytope.box([-0.2], [0.2]), [[0.0]], 1,
                          [[0.5]], [[1.0]], Polytope.box([-0.1], [0.1]))

    def test_scalar_hand_check_fails_when_too_small(self):
        # 0.5 * [-0.05, 0.05] + [-0.1, 0.1] = [-0.125, 0.125], not contained
        assert not verify_rci(Polytope.box([-0.05], [0.05]), [[0.0]], 1,
                              [[0.5]], [[1.0]], Polytope.box([-0.1], [0.1]))

    def test_zero_disturbance_zero_set(self):
        assert verify_rci(Polytope.point([0.0, 0.0]), [[0.0, 0.0]], 3,
                          [[0.5, 0.1], [0.0, 0.8]], [[0.0], [1.0]],
                          Polytope.point([0.0, 0.0]))


class TestScaledTemplateSynthesis:
    def test_scalar_closed_form(self):
        omega = synth_rci_scaled_template(Polytope.box([-1.0], [1.0]), [[0.0]],
                                          1, [[0.5]], [[1.0]],
                                          Polytope.box([-0.1], [0.1]))
        assert omega == Polytope.box([-0.2], [0.2])

    def test_non_contractive_map_fails(self):
        with pytest.raises(TubeSynthesisError):
            synth_rci_scaled_template(Polytope.box([-1.0], [1.0]), [[0.0]],
                                      1, [[1.0]], [[1.0]],
                                      Polytope.box([-0.1], [0.1]))

    def test_zero_disturbance_gives_origin(self):
        omega = synth_rci_scaled_template(Polytope.box([-1.0], [1.0]), [[0.0]],
                                          2, [[0.5]], [[1.0]],
                                          Polytope.point([0.0]))
        assert omega.vertices().shape[0] == 1
        assert np.allclose(omega.vertices()[0], 0.0)

    def test_benchmark_tube_verifies_at_full_hold(self, di_model, di_tube):
        m = di_model
        assert di_tube.H == 5
        assert verify_rci(di_tube.omega_p, di_tube.K, 5, m.A, m.B, m.w_p_set, 1e-8)

    def test_scaling_is_tight(self, di_model, di_tube):
        # shrinking the synthesized cross section by 1% must break invariance
        m = di_model
        shrunk = Polytope(di_tube.omega_p.normals, 0.99 * di_tube.omega_p.offsets)
        assert not verify_rci(shrunk, di_tube.K, 5, m.A, m.B, m.w_p_set, 1e-8)

    def test_synth_output_always_verifies(self):
        rng = np.random.default_rng(21)
        produced = 0
        for _ in range(20):
            a = rng.uniform(-1.0, 1.0, size=(2, 2))
            b = rng.uniform(-1.0, 1.0, size=(2, 1))
            w = Polytope.box([-0.05, -0.05], [0.05, 0.05])
            try:
                k = lqr_gain(a, b, np.eye(2), [[1.0]])
                template = default_template(a, b, np.eye(2), [[1.0]])
                omega = synth_rci_scaled_template(template, k, 3, a, b, w)
            except (TubeSynthesisError, np.linalg.LinAlgError):
                continue
            assert verify_rci(omega, k, 3, a, b, w, 1e-8)
            produced += 1
        assert produced >= 10


class TestErrorFeedback:
    def test_zero_error_returns_nominal(self):
        v = error_feedback([3.0], [1.0, 2.0], [1.0, 2.0], [[0.4, -0.2]])
        assert np.allclose(v, [3.0])

    def test_scalar_gain(self):
        v = error_feedback([0.0], [0.1], [0.0], [[1.0]])
        assert np.allclose(v, [0.1])

    def test_linear_form(self):
        k1, k2 = -2.0, 1.5
        v = error_feedback([3.0], [0.2, -0.1], [0.0, 0.0], [[k1, k2]])
        assert v[0] == pytest.approx(3.0 + 0.2 * k1 - 0.1 * k2)


class TestTighten:
    def test_box_state_tightening(self):
        tube = TubeParams(K=np.array([[0.0, 0.0]]),
                          omega_p=Polytope.box([-0.2, -0.2], [0.2, 0.2]),
                          k_omega_p=Polytope.box([-0.5], [0.5]), H=1)
        xbar, ubar = tighten(Polytope.box([-8, -8], [8, 8]),
                             Polytope.box([-15], [15]), tube)
        assert xbar == Polytope.box([-7.8, -7.8], [7.8, 7.8])
        assert ubar == Polytope.box([-14.5], [14.5])

    def test_full_consumption_fails(self):
        x_set = Polytope.box([-1, -1], [1, 1])
        tube = TubeParams(K=np.array([[0.0, 0.0]]), omega_p=x_set,
                          k_omega_p=Polytope.box([-0.1], [0.1]), H=1)
        with pytest.raises(TighteningError):
            tighten(x_set, Polytope.box([-15], [15]), tube)


class TestErrorContainment:
    def test_zero_everything_stays_at_origin(self, di_model, di_tube):
        m = di_model
        ok = error_containment_trial(di_tube, m.A, m.B,
                                     lambda i: np.zeros(2), [0.0],
                                     np.zeros(2), 5)
        assert ok

    def test_scalar_tube_extreme_disturbances(self):
        tube = TubeParams(K=np.array([[0.0]]),
                          omega_p=Polytope.box([-0.2], [0.2]),
                          k_omega_p=Polytope.point([0.0]), H=1)
        for w in (-0.1, 0.1):
            for e0 in (-0.2, 0.2):
                assert error_containment_trial(tube, [[0.5]], [[1.0]],
                                               lambda i, w=w: [w], [0.7],
                                               [e0], 1)

    def test_soundness_exhaustive_small_instance(self):
        # verified invariance implies containment for every vertex disturbance
        # sequence and every initial error vertex (1-D plant, H = 3)
        a, b = [[0.6]], [[1.0]]
        w = Polytope.box([-0.08], [0.08])
        k = [[-0.1]]
        template = Polytope.box([-1.0], [1.0])
        omega = synth_rci_scaled_template(template, k, 3, a, b, w)
        assert verify_rci(omega, k, 3, a, b, w)
        tube = TubeParams(K=np.array(k, dtype=float), omega_p=omega,
                          k_omega_p=affine_image(k, omega), H=3)
        w_verts = [v for v in w.vertices()]
        for e0 in omega.vertices():
            for seq in itertools.product(w_verts, repeat=3):
                assert error_containment_trial(tube, a, b,
                                               lambda i, seq=seq: seq[i],
                                               [0.3], e0, 3)

    def test_benchmark_monte_carlo(self, di_model, di_tube):
        m = di_model
        rng = np.random.default_rng(77)
        w_verts = m.w_p_set.vertices()
        omega_verts = di_tube.omega_p.vertices()
        for _ in range(1000):
            e0 = omega_verts[rng.integers(len(omega_verts))]
            picks = rng.integers(len(w_verts), size=5)
            v_c = rng.uniform(-1.0, 1.0, size=1)
            assert error_containment_trial(
                di_tube, m.A, m.B, lambda i, p=picks: w_verts[p[i]], v_c, e0, 5)


class TestSynthTube:
    def test_benchmark_tightening_keeps_origin(self, di_tightened):
        xbar_set, ubar_set = di_tightened
        assert xbar_set.contains_origin() and ubar_set.contains_origin()

    def test_json_roundtrip(self, di_tube):
        data = di_tube.to_json_dict()
        back = TubeParams.from_json_dict(data)
        assert np.allclose(back.K, di_tube.K)
        assert back.omega_p == di_tube.omega_p
        assert back.k_omega_p == di_tube.k_omega_p
        assert back.H == di_tube.H

    def test_image_consistency(self, di_tube):
        assert di_tube.k_omega_p == affine_image(di_tube.K, di_tube.omega_p)
