import sys
import os

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import math
from dataclasses import replace

import numpy as np
import pytest

from src.discretize import c2d_zoh
from src.errors import GridMismatch, PeriodMismatch
from src.hinf_synth import Controller
from src.lti import hinf_norm, series, static_gain
from src.simulate import (
    InputKind,
    InputSpec,
    SimConfig,
    SimTrace,
    check_bound,
    l2_norm,
    rms_reduction,
    run,
)

# l2_norm of |y - v| at M = 64, feedforward design, default rectangular wave
FF_RECT_ERROR_NORM = 1.1811

W_INPUTS = [
    InputSpec(kind=InputKind.UNIT_NORM_PULSE, start=0.0, width=1.0),
    InputSpec(kind=InputKind.UNIT_NORM_PULSE, start=2.0, width=0.5),
    InputSpec(kind=InputKind.UNIT_NORM_PULSE, start=3.0, width=2.0),
    InputSpec(kind=InputKind.UNIT_NORM_PULSE, start=5.0, width=4.0),
    InputSpec(kind=InputKind.UNIT_NORM_PULSE, start=1.25, width=0.25),
    InputSpec(kind=InputKind.FILTERED_NOISE, seed=1),
    InputSpec(kind=InputKind.FILTERED_NOISE, seed=2),
    InputSpec(kind=InputKind.FILTERED_NOISE, seed=3),
    InputSpec(kind=InputKind.FILTERED_NOISE, seed=4),
    InputSpec(kind=InputKind.FILTERED_NOISE, seed=5),
]


def make_trace(e, rate=64, h=1.0) -> SimTrace:
    e = np.asarray(e, dtype=float)
    zeros = np.zeros_like(e)
    t = np.arange(e.size) * h / rate
    return SimTrace(t=t, v=zeros, y=zeros, u=zeros, e=e, rate=rate, h=h)


class TestMetrics:

    def test_l2_norm_examples(self):
        assert l2_norm(np.ones(64), 64) == pytest.approx(1.0)
        assert l2_norm(2.0 * np.ones(256), 64) == pytest.approx(4.0)
        pulse = np.zeros(64)
        pulse[10] = 1.0
        assert l2_norm(pulse, 64) == pytest.approx(math.sqrt(1 / 64))

    def test_rms_reduction_identical(self):
        trace = make_trace(np.sin(np.arange(640) / 10.0))
        assert rms_reduction(trace, trace, (4.0, 10.0)) == pytest.approx(1.0)

    def test_rms_reduction_zero_with_canceler(self):
        without = make_trace(np.ones(640))
        assert rms_reduction(make_trace(np.zeros(640)), without, (4.0, 10.0)) == 0.0

    def test_rms_reduction_grid_mismatch(self):
        with pytest.raises(GridMismatch):
            rms_reduction(make_trace(np.ones(640)), make_trace(np.ones(320), rate=32))

    def test_check_bound_zero_input(self):
        report = check_bound(make_trace(np.zeros(64)), 0.5, 0.0)
        assert report.passed
        assert report.ratio == 0.0

    def test_check_bound_failure_reports_ratio(self):
        report = check_bound(make_trace(np.ones(64)), 0.5, 1.0)
        assert not report.passed
        assert report.ratio == pytest.approx(2.0)
        assert report.tol == pytest.approx(0.02 + 1 / 64)

    def test_check_bound_diverged(self):
        trace = make_trace(np.ones(64))
        trace.diverged = True
        assert not check_bound(trace, 10.0, 1.0).passed

    def test_csv_export(self, tmp_path):
        trace = make_trace([0.1, 0.2])
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        lines = path.read_bytes().split(b"\n")
        assert lines[0] == b"t,v,y,u,e"
        assert lines[1] == b"0,0,0,0,0.1"
        assert b"\r" not in path.read_bytes()


class TestSimConfig:

    def test_input_kind_from_string(self):
        assert InputSpec(kind="unit_norm_pulse").drives_w

    def test_M_must_be_multiple_of_N(self, ff_config):
        with pytest.raises(GridMismatch):
            SimConfig(problem=ff_config.problem(), M=40)

    def test_controller_period_mismatch(self, ff_config):
        controller = Controller(K=static_gain([[0.0]], dt=2.0), gamma_achieved=0.0)
        with pytest.raises(PeriodMismatch):
            SimConfig(problem=ff_config.problem(), K=controller)

    def test_rect_period_off_grid(self, ff_config):
        config = SimConfig(
            problem=ff_config.problem(), input=InputSpec(period=1.0 / 3.0), duration=2.0
        )
        with pytest.raises(GridMismatch):
            run(config)


class TestNoCanceler:

    def test_small_gain_loop_stays_bounded(self, ff_config):
        trace = run(ff_config.sim_config(None))
        assert not trace.diverged
        # |y| <= |v| / (1 - 0.625) for the positive coupling kernel
        assert np.abs(trace.y).max() < 1.0 / (1.0 - 0.625) + 0.05
        assert len(trace.t) == 40 * 64

    @pytest.mark.parametrize("spec", [InputSpec(), InputSpec(period=2.0, amplitude=3.0)])
    def test_energy_bounded_by_small_gain(self, ff_config, spec):
        """‖y‖ <= ‖v‖ / (1 - ‖loop‖∞) for the sampled coupling loop"""
        prob = ff_config.problem()
        loop = c2d_zoh(series(prob.G, prob.P), prob.h / 64)
        loop_norm = hinf_norm(loop)
        assert loop_norm == pytest.approx(0.625, rel=1e-6)

        trace = run(replace(ff_config.sim_config(None), input=spec))
        bound = l2_norm(trace.v, 64) / (1.0 - loop_norm)
        assert l2_norm(trace.y, 64) <= bound * (1.0 + 1e-9)

    def test_high_gain_loop_diverges(self, fb_config):
        trace = run(fb_config.sim_config(None))
        assert trace.diverged
        assert len(trace.t) < 40 * 64


class TestFeedforwardCanceler:

    def test_zero_input_gives_zero_trace(self, ff_config, ff_design):
        _, controller, _ = ff_design
        config = replace(
            ff_config.sim_config(controller), input=InputSpec(amplitude=0.0)
        )
        trace = run(config)
        assert not np.any(trace.y) and not np.any(trace.u) and not np.any(trace.e)

    def test_linearity(self, ff_config, ff_design):
        _, controller, _ = ff_design
        base = run(replace(ff_config.sim_config(controller), input=InputSpec(amplitude=1.0)))
        doubled = run(replace(ff_config.sim_config(controller), input=InputSpec(amplitude=2.0)))
        np.testing.assert_allclose(doubled.y, 2.0 * base.y, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(doubled.e, 2.0 * base.e, rtol=1e-12, atol=1e-12)

    def test_hold_is_constant_between_samples(self, ff_config, ff_design):
        _, controller, _ = ff_design
        trace = run(ff_config.sim_config(controller))
        blocks = trace.u.reshape(-1, trace.rate)
        np.testing.assert_array_equal(blocks, blocks[:, :1] * np.ones((1, trace.rate)))

    @pytest.mark.parametrize("spec", W_INPUTS)
    def test_error_bound_for_shaped_inputs(self, ff_config, ff_design, spec):
        """‖y - v‖ <= γ ‖w‖ for y = F w"""
        _, controller, _ = ff_design
        trace = run(replace(ff_config.sim_config(controller), input=spec))
        report = check_bound(trace, controller.gamma_achieved, trace.metadata["w_norm"])
        assert report.passed, report.reason

    def test_reduces_coupling_effect(self, ff_config, ff_design, baseline):
        _, controller, _ = ff_design
        with_canceler = run(ff_config.sim_config(controller))
        without = run(ff_config.sim_config(None))
        assert not with_canceler.diverged

        ratio = rms_reduction(with_canceler, without, (4.0, 40.0))
        assert ratio < 1.0
        assert ratio == pytest.approx(baseline("feedforward_rms_ratio", ratio), rel=1e-6)
        assert l2_norm(with_canceler.e, 64) == pytest.approx(FF_RECT_ERROR_NORM, rel=1e-3)

    def test_grid_refinement(self, ff_config, ff_design):
        _, controller, _ = ff_design
        coarse = run(ff_config.sim_config(controller))
        fine = run(replace(ff_config.sim_config(controller), M=128))
        assert l2_norm(fine.e, 128) == pytest.approx(l2_norm(coarse.e, 64), rel=0.02)

    def test_echoes_input_in_metadata(self, ff_config, ff_design):
        _, controller, _ = ff_design
        spec = InputSpec(kind="filtered_noise", seed=7, period=4.0, start=1.5, width=2.0)
        trace = run(replace(ff_config.sim_config(controller), input=spec, duration=8.0))
        assert trace.metadata["input"] == {
            "kind": "filtered_noise",
            "period": 4.0,
            "amplitude": 1.0,
            "seed": 7,
            "start": 1.5,
            "width": 2.0,
        }
        assert trace.metadata["M"] == 64 and trace.metadata["duration"] == 8.0


class TestFeedbackCanceler:

    def test_stabilizes_high_gain_loop(self, fb_config, fb_design):
        _, controller, _ = fb_design
        trace = run(fb_config.sim_config(controller))
        assert not trace.diverged

    def test_grid_refinement(self, fb_config, fb_design):
        _, controller, _ = fb_design
        coarse = run(fb_config.sim_config(controller))
        fine = run(replace(fb_config.sim_config(controller), M=128))
        assert not coarse.diverged and not fine.diverged
        assert l2_norm(fine.e, 128) == pytest.approx(l2_norm(coarse.e, 64), rel=0.02)

    @pytest.mark.parametrize("spec", W_INPUTS)
    def test_error_bound_for_shaped_inputs(self, fb_config, fb_design, spec):
        """‖v - u‖ <= γ ‖w‖ for v = W w"""
        _, controller, _ = fb_design
        trace = run(replace(fb_config.sim_config(controller), input=spec))
        report = check_bound(trace, controller.gamma_achieved, trace.metadata["w_norm"])
        assert report.passed, report.reason
