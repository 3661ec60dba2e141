"""Error metrics against closed forms, probe interpolation, rate machinery
and the benchmark plumbing."""

import numpy as np
import pytest

from monodt.bench import (ConvergenceRow, ProbeSpec, ReferenceSolution,
                          compute_reference, convergence_rate,
                          convergence_study, depolarization_time, error_norms,
                          find_dt_for_error, norms, select_window, wave_speed)
from monodt.config import default_config
from monodt.errors import (ConfigError, DegenerateProbe, DimensionError,
                           TargetUnreachable, WaveNotArrived)
from monodt.grid import Grid1D
from monodt.steppers import run_simulation


class TestNorms:
    def test_identical_fields_zero(self):
        g = Grid1D(10.0, 16)
        u = np.sin(g.x)
        assert error_norms(u, u, g) == (0.0, 0.0)

    def test_constant_difference(self):
        g = Grid1D(100.0, 50)
        l2, h1 = error_norms(np.ones(g.n_nodes), np.zeros(g.n_nodes), g)
        assert l2 == pytest.approx(10.0, rel=1e-12)
        assert h1 == pytest.approx(0.0, abs=1e-13)

    def test_sine_closed_form(self):
        L = 7.0
        g = Grid1D(L, 512)
        d = np.sin(2.0 * np.pi * g.x / L)
        l2, h1 = error_norms(d, np.zeros(g.n_nodes), g)
        assert l2 == pytest.approx(np.sqrt(L / 2.0), rel=1e-3)
        assert h1 == pytest.approx((2.0 * np.pi / L) * np.sqrt(L / 2.0), rel=1e-3)

    def test_grid_mismatch(self):
        g = Grid1D(1.0, 4)
        with pytest.raises(DimensionError):
            error_norms(np.zeros(5), np.zeros(7), g)
        with pytest.raises(DimensionError):
            norms(np.zeros(7), g)


class TestDepolarization:
    def test_exact_hit_returns_sample_time(self):
        t = np.array([0.0, 0.2, 0.4])
        u = np.array([-40.0, -30.0, -10.0])
        assert depolarization_time(t, u, -30.0) == pytest.approx(0.2)

    def test_midpoint_interpolation(self):
        t = np.array([1.0, 1.2])
        u = np.array([-31.0, -29.0])
        assert depolarization_time(t, u, -30.0) == pytest.approx(1.1)

    def test_first_crossing_only(self):
        t = np.linspace(0.0, 1.0, 11)
        u = np.concatenate([np.linspace(-50, 10, 6), np.linspace(0, 30, 5)])
        first = depolarization_time(t, u, -5.0)
        assert first < 0.5

    def test_no_crossing(self):
        with pytest.raises(WaveNotArrived):
            depolarization_time(np.array([0.0, 1.0]), np.array([-80.0, -70.0]), -30.0)

    def test_already_above_at_start(self):
        assert depolarization_time(np.array([3.0, 4.0]), np.array([0.0, 1.0]), -30.0) == 3.0


class TestWaveSpeed:
    def test_plain_ratio(self):
        assert wave_speed(10.0, 70.0, 20.0, 50.0) == pytest.approx(0.5)

    def test_degenerate(self):
        with pytest.raises(DegenerateProbe):
            wave_speed(10.0, 10.0, 0.0, 30.0)


class TestRates:
    def test_rate_formula(self):
        dt1, dt2 = 0.2, 0.1
        e1, e2 = 3.0 * dt1 ** 2.5, 3.0 * dt2 ** 2.5
        assert convergence_rate(e1, e2, dt1, dt2) == pytest.approx(2.5, rel=1e-12)

    def test_window_longest_run(self):
        rates = [0.4, 1.9, 2.0, 2.1, 0.7]
        assert select_window(rates) == (1, 4)

    def test_window_tie_prefers_latest(self):
        rates = [1.0, 1.1, 3.0, 2.0, 2.1]
        assert select_window(rates) == (3, 5)

    def test_window_skips_nan(self):
        rates = [float("nan"), 2.0, 2.05, float("nan")]
        assert select_window(rates) == (1, 3)


class TestReferencePlumbing:
    def test_ratio_guard(self):
        ref = ReferenceSolution(model="ms", scheme="sbdf2", dt=0.01, T=1.0,
                                u_final=np.zeros(3), l2_norm=1.0, h1_norm=1.0,
                                t1=0.1, t2=0.2, speed=1.0)
        ref.check_ratio(0.64)
        with pytest.raises(ConfigError):
            ref.check_ratio(0.5)

    def test_dt_must_divide_final_time(self):
        cfg = default_config("ms", **{"grid.length": 50.0, "grid.intervals": 100,
                                      "run.final_time": 30.0,
                                      "probe.x1": 10.0, "probe.x2": 20.0})
        prob = cfg.problem()
        probe = ProbeSpec(0.5, 10.0, 20.0)
        ref = compute_reference(prob, "sbdf2", 30.0 / 4096, 30.0, probe, cache=False)
        with pytest.raises(ConfigError):
            convergence_study(prob, "sbdf2", [0.4], ref, probe)


@pytest.fixture(scope="module")
def ms_small():
    cfg = default_config("ms", **{"grid.length": 50.0, "grid.intervals": 100,
                                  "run.final_time": 30.0,
                                  "probe.x1": 10.0, "probe.x2": 20.0})
    prob = cfg.problem()
    probe = cfg.probe()
    ref = compute_reference(prob, "sbdf2", 30.0 / 65536, 30.0, probe, cache=True)
    return prob, probe, ref


class TestSmallConvergence:
    def test_reference_probe_values(self, ms_small):
        prob, probe, ref = ms_small
        assert 0.0 < ref.t1 < ref.t2 < 30.0
        assert ref.speed > 0.0
        assert ref.l2_norm > 0.0

    def test_series_and_timer_sanity(self, ms_small):
        prob, probe, ref = ms_small
        series = convergence_study(prob, "sbdf2",
                                   [30.0 / 128, 30.0 / 256, 30.0 / 512], ref, probe)
        errs = [r.e_l2 for r in series.rows]
        assert errs[0] > errs[1] > errs[2] > 0.0
        for row in series.rows:
            n = round(30.0 / row.dt)
            assert row.cpu_per_step * n == pytest.approx(row.cpu_total, rel=0.1)

    def test_reference_independence(self, ms_small):
        # halving the reference step changes reported errors by well under 1%
        prob, probe, ref = ms_small
        ref2 = compute_reference(prob, "sbdf2", 30.0 / 131072, 30.0, probe, cache=True)
        dts = [30.0 / 256, 30.0 / 512]
        s1 = convergence_study(prob, "sbdf2", dts, ref, probe)
        s2 = convergence_study(prob, "sbdf2", dts, ref2, probe)
        for a, b in zip(s1.rows, s2.rows):
            assert abs(a.e_l2 - b.e_l2) < 0.01 * a.e_l2

    def test_blowup_row_excluded_from_rates(self, ms_small):
        prob, probe, ref = ms_small
        ref_fine = compute_reference(prob, "sbdf2", 30.0 / 131072, 30.0, probe,
                                     cache=True)
        # first step far above the explicit stability limit of this grid
        series = convergence_study(prob, "fe", [30.0 / 64, 30.0 / 1024, 30.0 / 2048],
                                   ref_fine, probe)
        assert series.rows[0].status == "blowup"
        assert np.isnan(series.rates["e_l2"][0])
        assert np.isfinite(series.rates["e_l2"][1])

    def test_find_dt_for_error(self, ms_small):
        prob, probe, ref = ms_small
        target = 3e-4  # between the errors at dt=30/128 and dt=30/256
        dt, e, _ = find_dt_for_error(prob, "sbdf2", target, ref, dt_start=30.0 / 128)
        assert abs(e - target) <= 0.1 * target

    def test_target_unreachable_below_stability_cap(self, ms_small):
        prob, probe, ref = ms_small
        # a loose target cannot be reached from below when the step is capped
        with pytest.raises(TargetUnreachable) as err:
            find_dt_for_error(prob, "sbdf2", 0.5 * ref.l2_norm, ref,
                              dt_start=30.0 / 512, dt_max=30.0 / 512)
        assert np.isfinite(err.value.error_at_limit)
