import numpy as np
import pytest

from models.configuration import Configuration, OrderLabel
from models.minimize_result import MinimizeConfig, geometric_schedule
from models.params import SystemParams
from utils.action import action
from utils.dynamics import collision_free_segments, eom_residual
from utils.errors import InvalidInterval, MassMismatch, SectorMismatch, ValidationError
import utils.minimize as minimize_module
from utils.minimize import (
    minimize,
    minimize_in_sector,
    seed_perturbation,
    straight_line_seed,
    write_trace_csv,
)

QUICK = MinimizeConfig(grid_size=32, eps_schedule=(1e-2, 1e-4), grad_tol=1e-6)


def test_geometric_schedule():
    schedule = geometric_schedule(1e-1, 1e-3, 0.1)
    assert schedule == pytest.approx((1e-1, 1e-2, 1e-3))


class TestConfig:
    def test_schedule_must_decrease(self):
        with pytest.raises(ValidationError):
            MinimizeConfig(eps_schedule=(1e-3, 1e-2))

    def test_grid_floor(self):
        with pytest.raises(ValidationError):
            MinimizeConfig(grid_size=4)

    def test_dict_round_trip(self):
        cfg = MinimizeConfig(grid_size=64, order_sector=OrderLabel((2, 1)), seed=3)
        assert MinimizeConfig.from_dict(cfg.to_dict()) == cfg


class TestSeed:
    def test_endpoints_are_bit_identical(self, three_equal):
        q_i = Configuration((-1.0, 0.0, 1.0), three_equal)
        q_f = Configuration((-2.0, 0.5, 1.5), three_equal)
        times = np.linspace(0.0, 2.0, 17)
        seed = straight_line_seed(q_i, q_f, times, seed=7)
        assert np.array_equal(seed.positions[0], q_i.positions)
        assert np.array_equal(seed.positions[-1], q_f.positions)

    def test_seed_is_deterministic(self, two_equal):
        q_i = Configuration((-1.0, 1.0), two_equal)
        q_f = Configuration((-2.0, 2.0), two_equal)
        times = np.linspace(0.0, 1.0, 9)
        a = straight_line_seed(q_i, q_f, times, seed=1)
        b = straight_line_seed(q_i, q_f, times, seed=1)
        assert np.array_equal(a.positions, b.positions)

    def test_perturbation_scales_with_dilation(self, three_equal):
        q_i = Configuration((-1.0, 0.0, 1.0), three_equal)
        q_f = Configuration((-2.0, 0.5, 1.5), three_equal)
        big_i = Configuration(10.0 * q_i.positions, three_equal)
        big_f = Configuration(10.0 * q_f.positions, three_equal)
        times = np.linspace(0.0, 1.0, 17)
        small = seed_perturbation(q_i, q_f, times, seed=4)
        large = seed_perturbation(big_i, big_f, times, seed=4)
        assert np.max(np.abs(small)) > 0
        np.testing.assert_allclose(large, 10.0 * small, rtol=1e-12, atol=0)

    def test_midpoint_without_perturbation(self, three_equal):
        q_i = Configuration((-1.0, 0.0, 1.0), three_equal)
        q_f = Configuration((-2.0, 0.5, 1.5), three_equal)
        times = np.linspace(0.0, 1.0, 17)
        seed = straight_line_seed(q_i, q_f, times, seed=9)
        straight = seed.positions - seed_perturbation(q_i, q_f, times, seed=9)
        np.testing.assert_allclose(
            straight[8], (q_i.positions + q_f.positions) / 2, rtol=0, atol=1e-15
        )


class TestProblemChecks:
    def test_interval(self, two_equal):
        q = Configuration((-1.0, 1.0), two_equal)
        with pytest.raises(InvalidInterval):
            minimize(q, q, 1.0, 1.0, QUICK)

    def test_mass_mismatch(self, two_equal):
        q_i = Configuration((-1.0, 1.0), two_equal)
        q_f = Configuration((-1.0, 0.5), SystemParams(masses=(1.0, 2.0)))
        with pytest.raises(MassMismatch):
            minimize(q_i, q_f, 0.0, 1.0, QUICK)

    def test_sector_mismatch(self, two_equal):
        q_i = Configuration((-1.0, 1.0), two_equal)
        q_f = Configuration((1.0, -1.0), two_equal)
        with pytest.raises(SectorMismatch):
            minimize_in_sector(q_i, q_f, 0.0, 1.0, OrderLabel((1, 2)), QUICK)


class TestMinimize:
    def test_same_order_two_bodies(self, two_equal):
        q_i = Configuration((-1.0, 1.0), two_equal)
        q_f = Configuration((-1.5, 1.5), two_equal)
        result = minimize(q_i, q_f, 0.0, 1.0, QUICK)
        p = result.path

        assert np.array_equal(p.positions[0], q_i.positions)
        assert np.array_equal(p.positions[-1], q_f.positions)
        seed = straight_line_seed(q_i, q_f, p.times, QUICK.seed)
        assert result.action_value <= action(seed, QUICK.eps_schedule[-1]) + 1e-12
        assert np.min(p.positions[:, 1] - p.positions[:, 0]) > 10 * two_equal.collision_tol
        assert result.eps_final == 1e-4
        assert result.trace.shape[1] == 4

    def test_sector_minimizer_keeps_order(self, three_equal):
        q_i = Configuration((-1.0, 0.0, 1.0), three_equal)
        q_f = Configuration((-1.2, 0.1, 1.1), three_equal)
        result = minimize_in_sector(q_i, q_f, 0.0, 1.0, (1, 2, 3), QUICK)
        gaps = np.diff(result.path.positions, axis=1)
        assert np.all(gaps >= -1e-12)

    def test_sector_via_config(self, two_equal):
        q_i = Configuration((-1.0, 1.0), two_equal)
        q_f = Configuration((-1.5, 1.5), two_equal)
        cfg = MinimizeConfig(
            grid_size=16, eps_schedule=(1e-2,), grad_tol=1e-6, order_sector=OrderLabel((1, 2))
        )
        result = minimize(q_i, q_f, 0.0, 1.0, cfg)
        assert np.all(np.diff(result.path.positions, axis=1) >= 0)

    def test_sector_agrees_with_unconstrained(self, two_equal):
        q_i = Configuration((-1.0, 1.0), two_equal)
        q_f = Configuration((-1.5, 1.5), two_equal)
        cfg = MinimizeConfig(grid_size=32, eps_schedule=(1e-2, 1e-4), grad_tol=1e-8)
        free = minimize(q_i, q_f, 0.0, 1.0, cfg)
        sector = minimize_in_sector(q_i, q_f, 0.0, 1.0, (1, 2), cfg)
        assert free.converged and sector.converged
        assert sector.action_value == pytest.approx(free.action_value, rel=1e-6)
        np.testing.assert_allclose(sector.path.positions, free.path.positions, atol=1e-6)

    def test_three_body_sector_stays_apart(self, three_equal):
        q_i = Configuration((-1.0, 0.0, 1.0), three_equal)
        q_f = Configuration((-2.0, 0.0, 2.0), three_equal)
        result = minimize_in_sector(q_i, q_f, 0.0, 1.0, (1, 2, 3), QUICK)
        gaps = np.diff(result.path.positions, axis=1)
        assert np.min(gaps) > 10 * three_equal.collision_tol

    def test_endpoint_on_sector_boundary(self, three_equal):
        q_i = Configuration((-1.0, -1.0, 2.0), three_equal)
        q_f = Configuration((-1.0, 0.0, 1.0), three_equal)
        result = minimize_in_sector(q_i, q_f, 0.0, 1.0, (1, 2, 3), QUICK)
        assert np.array_equal(result.path.positions[0], q_i.positions)
        assert np.all(np.diff(result.path.positions, axis=1) >= -1e-12)

    def test_relabelling_equal_masses(self, three_equal):
        swap = [2, 1, 0]
        q_i = Configuration((-1.0, 0.25, 0.75), three_equal)
        q_f = Configuration((-1.5, 0.25, 1.25), three_equal)
        cfg = MinimizeConfig(grid_size=32, eps_schedule=(1e-2, 1e-4), grad_tol=1e-8)
        plain = minimize(q_i, q_f, 0.0, 1.0, cfg)
        swapped = minimize(
            Configuration(q_i.positions[swap], three_equal),
            Configuration(q_f.positions[swap], three_equal),
            0.0,
            1.0,
            cfg,
        )
        assert swapped.action_value == pytest.approx(plain.action_value, rel=1e-8)

    def test_restart_keeps_both_traces(self, two_equal, monkeypatch):
        descend = minimize_module._descend
        traces = []

        def first_run_lost(*args):
            out = descend(*args)
            traces.append(out[-1].copy())
            if len(traces) == 1:
                return out[:2] + (np.inf,) + out[3:]
            return out

        monkeypatch.setattr(minimize_module, "_descend", first_run_lost)
        q_i = Configuration((-1.0, 1.0), two_equal)
        q_f = Configuration((-1.5, 1.5), two_equal)
        result = minimize(q_i, q_f, 0.0, 1.0, QUICK)

        assert len(traces) == 2
        assert len(result.trace) == len(traces[0]) + len(traces[1])
        np.testing.assert_array_equal(result.trace[:, 1], np.arange(len(result.trace)))
        np.testing.assert_array_equal(result.trace[: len(traces[0]), 2], traces[0][:, 2])
        assert set(result.trace[len(traces[0]) :, 0]) == {1e-4}

    def test_trace_csv(self, two_equal, tmp_path):
        q_i = Configuration((-1.0, 1.0), two_equal)
        q_f = Configuration((-1.5, 1.5), two_equal)
        result = minimize(q_i, q_f, 0.0, 1.0, QUICK)
        target = tmp_path / "trace.csv"
        write_trace_csv(result, target)
        lines = target.read_text().splitlines()
        assert lines[0] == "eps,iter,action,grad_norm"
        assert len(lines) == 1 + len(result.trace)


@pytest.mark.slow
def test_same_order_minimizer_solves_newton(three_equal):
    q_i = Configuration((-1.0, 0.0, 1.0), three_equal)
    q_f = Configuration((-1.5, 0.25, 1.25), three_equal)
    cfg = MinimizeConfig(grid_size=128, grad_tol=1e-8)
    result = minimize(q_i, q_f, 0.0, 1.0, cfg)
    segments = collision_free_segments(result.path)
    assert segments == [(0, 128)]
    assert eom_residual(result.path, segments[0]) < 1e-2


@pytest.mark.slow
@pytest.mark.parametrize(
    "masses, start, end",
    [
        ((1.0, 1.0), (-1.0, 1.0), (-1.5, 1.5)),
        ((1.0, 1.0, 1.0), (-1.0, 0.0, 1.0), (-2.0, 0.0, 2.0)),
    ],
)
def test_default_settings_converge(masses, start, end):
    params = SystemParams(masses=masses)
    result = minimize(Configuration(start, params), Configuration(end, params), 0.0, 1.0)
    assert result.converged
    assert result.gradient_norm <= 1e-8 * max(1.0, abs(result.action_value))
