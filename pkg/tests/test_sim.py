"""Closed-loop runs, disturbance sampling, and the log monitors."""

import numpy as np
import pytest

from rolltube.geometry import Polytope
from rolltube.mpc import NcsState
from rolltube.sim import (
    ClosedLoopLog, DisturbanceModel, LogRecord, SimConfig, check_log,
    run_closed_loop, sample_disturbance,
)

W_BOX = Polytope.box([-0.02, -0.02], [0.02, 0.02])


def make_config(T_steps, kind="zero", seed=0, x0=(0.0, 0.0), beta0=10):
    return SimConfig(N_max=6, H=5, T_steps=T_steps, x0=np.array(x0),
                     u_s0=np.zeros(1), beta0=beta0,
                     disturbance=DisturbanceModel(kind=kind, w_p_set=W_BOX,
                                                  seed=seed))


class TestSampleDisturbance:
    def test_zero(self):
        model = DisturbanceModel(kind="zero", w_p_set=W_BOX)
        assert np.array_equal(sample_disturbance(model, 3), np.zeros(2))

    def test_uniform_box_reproducible_and_inside(self):
        model = DisturbanceModel(kind="uniform_box", w_p_set=W_BOX, seed=42)
        first = [sample_disturbance(model, k) for k in range(50)]
        second = [sample_disturbance(model, k) for k in range(50)]
        for a, b in zip(first, second):
            assert np.array_equal(a, b)
            assert W_BOX.contains(a)
        assert not np.allclose(first[0], first[1])

    def test_vertex_adversarial_emits_corners(self):
        model = DisturbanceModel(kind="vertex_adversarial", w_p_set=W_BOX, seed=7)
        corners = {(-0.02, -0.02), (-0.02, 0.02), (0.02, -0.02), (0.02, 0.02)}
        seen = set()
        for k in range(100):
            w = sample_disturbance(model, k)
            key = tuple(np.round(w, 9))
            assert key in corners
            seen.add(key)
        assert seen == corners

    def test_trace_and_exhaustion(self):
        trace = np.array([[0.01, -0.01], [0.0, 0.02]])
        model = DisturbanceModel(kind="trace", w_p_set=W_BOX, trace=trace)
        assert np.array_equal(sample_disturbance(model, 1), [0.0, 0.02])
        with pytest.raises(IndexError):
            sample_disturbance(model, 2)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            DisturbanceModel(kind="gaussian", w_p_set=W_BOX)


class TestRunClosedLoop:
    def test_equilibrium_stays_at_origin(self, di_model, di_tube, di_terminal):
        log = run_closed_loop(di_model, di_tube, di_terminal, make_config(20))
        assert len(log) == 20
        for r in log:
            assert r.feasible
            assert np.allclose(r.x.x_p, 0.0, atol=1e-9)
            assert np.allclose(r.x.u_s, 0.0, atol=1e-9)
            assert r.stage_cost == pytest.approx(0.0, abs=1e-12)
        assert log.records[0].gamma == 1  # startup transmission is forced
        report = check_log(log, di_model, di_tube, 5)
        assert report["ok"]
        assert report["tail_xbar_norm"] == pytest.approx(0.0, abs=1e-9)

    def test_disturbed_run_keeps_guarantees(self, di_model, di_tube, di_terminal):
        log = run_closed_loop(di_model, di_tube, di_terminal,
                              make_config(40, kind="uniform_box", seed=3,
                                          x0=(6.0, -2.0)))
        assert len(log) == 40
        assert all(r.feasible for r in log)
        report = check_log(log, di_model, di_tube, 5)
        assert report["ok"]
        assert report["window_min_tx"] >= 1
        assert report["constraint_violations"] == 0
        assert report["tube_violations"] == 0

    def test_nominal_and_real_buckets_coincide(self, di_model, di_tube, di_terminal):
        log = run_closed_loop(di_model, di_tube, di_terminal,
                              make_config(30, kind="uniform_box", seed=5,
                                          x0=(3.0, 1.0)))
        for r in log:
            assert r.x.beta == r.xbar.beta

    def test_counter_consistent_with_transmissions(self, di_model, di_tube,
                                                   di_terminal):
        log = run_closed_loop(di_model, di_tube, di_terminal,
                              make_config(30, kind="uniform_box", seed=8,
                                          x0=(4.0, 0.0)))
        s = 0
        for r in log:
            assert r.s == s
            s = 0 if r.gamma else s + 1

    def test_deterministic_given_seed(self, di_model, di_tube, di_terminal):
        cfg = make_config(25, kind="uniform_box", seed=11, x0=(5.0, -1.0))
        first = run_closed_loop(di_model, di_tube, di_terminal, cfg)
        second = run_closed_loop(di_model, di_tube, di_terminal, cfg)
        for a, b in zip(first, second):
            assert a.x.x_p.tobytes() == b.x.x_p.tobytes()
            assert a.x.u_s.tobytes() == b.x.u_s.tobytes()
            assert a.u_c.tobytes() == b.u_c.tobytes()
            assert (a.gamma, a.s, a.x.beta) == (b.gamma, b.s, b.x.beta)
            assert a.ocp_value == b.ocp_value

    def test_insufficient_startup_tokens_rejected(self, di_model, di_tube,
                                                  di_terminal):
        with pytest.raises(ValueError, match="beta0"):
            run_closed_loop(di_model, di_tube, di_terminal,
                            make_config(5, beta0=1))


class TestCsvRoundTrip:
    def test_roundtrip_preserves_records(self, di_model, di_tube, di_terminal,
                                         tmp_path):
        log = run_closed_loop(di_model, di_tube, di_terminal,
                              make_config(15, kind="uniform_box", seed=2,
                                          x0=(2.0, 1.0)))
        path = tmp_path / "run.csv"
        log.to_csv(path)
        back = ClosedLoopLog.from_csv(path)
        assert len(back) == len(log)
        for a, b in zip(log, back):
            assert np.array_equal(a.x.x_p, b.x.x_p)  # 17 significant digits
            assert np.array_equal(a.xbar.x_p, b.xbar.x_p)
            assert a.ocp_value == b.ocp_value
            assert (a.gamma, a.s, a.N, a.feasible) == (b.gamma, b.s, b.N, b.feasible)

    def test_checks_pass_after_roundtrip(self, di_model, di_tube, di_terminal,
                                         tmp_path):
        log = run_closed_loop(di_model, di_tube, di_terminal,
                              make_config(15, kind="uniform_box", seed=4))
        path = tmp_path / "run.csv"
        log.to_csv(path)
        report = check_log(ClosedLoopLog.from_csv(path), di_model, di_tube, 5)
        assert report["ok"]


class TestCheckLog:
    def _record(self, k, gamma, s):
        zero = NcsState([0.0, 0.0], [0.0], 10)
        return LogRecord(k=k, x=zero, xbar=zero, u_c=np.zeros(1), gamma=gamma,
                         s=s, N=6, ocp_value=0.0, rotated_value=0.0,
                         stage_cost=0.0, feasible=True)

    def test_window_gap_detected(self, di_model, di_tube):
        # hand-built log with a transmission gap of H + 1
        gammas = [1, 0, 0, 0, 0, 0, 1, 0]
        records = []
        s = 0
        for k, g in enumerate(gammas):
            records.append(self._record(k, g, s))
            s = 0 if g else s + 1
        report = check_log(ClosedLoopLog(records), di_model, di_tube, 5)
        assert report["window_min_tx"] == 0
        assert not report["window_ok"]
        assert not report["ok"]

    def test_empty_log_rejected(self, di_model, di_tube):
        with pytest.raises(ValueError):
            check_log(ClosedLoopLog([]), di_model, di_tube, 5)
