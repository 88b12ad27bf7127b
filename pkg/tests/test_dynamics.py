import math

import numpy as np
import pytest

from models.configuration import Configuration
from models.minimize_result import MinimizeConfig
from models.path import DiscretePath
from models.trajectory_state import TrajectoryState
from utils.dynamics import (
    collision_free_segments,
    energy_drift,
    eom_residual,
    integrate,
    node_state,
    sample_path,
    track_minimizer,
    write_trajectory_csv,
)
from utils.errors import CollisionApproach, SegmentContainsCollision, ValidationError
from utils.minimize import minimize

# free fall of two unit masses from separation 2 at rest
FALL_TIME = math.pi / math.sqrt(2)


def ejection(params):
    # zero energy: separation r(t) = (1 + 3t)^(2/3)
    return TrajectoryState(0.0, (-0.5, 0.5), (-1.0, 1.0), params)


def bound_orbit(params):
    return TrajectoryState(0.0, (-1.0, 1.0), (-0.5, 0.5), params)


class TestState:
    def test_energy(self, two_equal):
        assert ejection(two_equal).energy == pytest.approx(0.0, abs=1e-15)
        assert bound_orbit(two_equal).energy == pytest.approx(-0.25)

    def test_off_center(self, two_equal):
        with pytest.raises(ValidationError):
            TrajectoryState(0.0, (0.0, 1.0), (0.0, 0.0), two_equal)
        with pytest.raises(ValidationError):
            TrajectoryState(0.0, (-1.0, 1.0), (1.0, 0.0), two_equal)

    def test_reversed(self, two_equal):
        state = ejection(two_equal).reversed()
        assert state.velocities.tolist() == [1.0, -1.0]
        assert state.min_gap == 1.0


class TestIntegrate:
    def test_parabolic_ejection(self, two_equal):
        times = np.linspace(0.0, 10.0, 41)
        states = integrate(ejection(two_equal), 10.0, t_eval=times)
        separation = np.array([s.positions[1] - s.positions[0] for s in states])
        np.testing.assert_allclose(separation, (1 + 3 * times) ** (2 / 3), rtol=1e-7)
        assert energy_drift(states) <= 1e-7

    def test_ejection_exponent(self, two_equal):
        times = np.geomspace(1e3, 1e4, 20)
        states = integrate(ejection(two_equal), 1e4, t_eval=times)
        separation = np.array([s.positions[1] - s.positions[0] for s in states])
        slope = np.polyfit(np.log(times), np.log(separation), 1)[0]
        assert slope == pytest.approx(2 / 3, abs=1e-2)

    def test_time_reversal(self, two_equal):
        start = TrajectoryState(0.0, (-1.0, 1.0), (0.0, 0.0), two_equal)
        middle = integrate(start, 1.5)[-1]
        back = integrate(middle.reversed(), 3.0)[-1]
        assert back.time == pytest.approx(3.0)
        np.testing.assert_allclose(back.positions, start.positions, atol=1e-6)
        np.testing.assert_allclose(back.velocities, 0.0, atol=1e-6)

    def test_stops_before_collision(self, two_equal):
        start = TrajectoryState(0.0, (-1.0, 1.0), (0.0, 0.0), two_equal)
        with pytest.raises(CollisionApproach) as excinfo:
            integrate(start, 3.0)
        last = excinfo.value.states[-1]
        assert last.time == pytest.approx(FALL_TIME, abs=1e-4)
        assert last.min_gap == pytest.approx(two_equal.collision_tol, rel=1e-4)

    def test_starts_at_collision(self, two_equal):
        start = TrajectoryState(0.0, (-1e-4, 1e-4), (0.0, 0.0), two_equal)
        with pytest.raises(CollisionApproach):
            integrate(start, 1.0)

    def test_zero_span(self, two_equal):
        state = ejection(two_equal)
        assert integrate(state, 0.0) == [state]

    def test_csv(self, two_equal, tmp_path):
        states = integrate(bound_orbit(two_equal), 1.0, t_eval=np.linspace(0.0, 1.0, 5))
        target = tmp_path / "trajectory.csv"
        write_trajectory_csv(states, target)
        lines = target.read_text().splitlines()
        assert lines[0] == "t,q1,q2,v1,v2,E"
        assert len(lines) == 6


class TestResidual:
    def test_sampled_trajectory(self, two_equal):
        times = np.linspace(0.0, 1.0, 257)
        p = sample_path(integrate(bound_orbit(two_equal), 1.0, t_eval=times))
        assert collision_free_segments(p) == [(0, 256)]
        assert eom_residual(p, (0, 256)) < 1e-4

    def test_straight_line_is_not_a_solution(self, two_equal):
        times = np.linspace(0.0, 1.0, 11)
        p = DiscretePath(times, np.outer(1.0 + times, [-1.0, 1.0]), two_equal)
        assert eom_residual(p, (0, 10)) == pytest.approx(1.0, abs=1e-6)

    def test_segment_with_collision(self, two_equal):
        times = np.linspace(0.0, 1.0, 11)
        separation = np.linspace(2.0, 0.005, 11)
        p = DiscretePath(times, np.outer(separation / 2, [-1.0, 1.0]), two_equal)
        assert collision_free_segments(p) == [(0, 9)]
        with pytest.raises(SegmentContainsCollision):
            eom_residual(p, (0, 10))
        assert eom_residual(p, (0, 9)) > 0

    def test_segment_bounds(self, two_equal):
        times = np.linspace(0.0, 1.0, 11)
        p = DiscretePath(times, np.outer(1.0 + times, [-1.0, 1.0]), two_equal)
        with pytest.raises(ValidationError):
            eom_residual(p, (5, 6))
        with pytest.raises(ValidationError):
            eom_residual(p, (0, 11))


class TestTracking:
    def test_node_state(self, two_equal):
        times = np.linspace(0.0, 1.0, 257)
        p = sample_path(integrate(bound_orbit(two_equal), 1.0, t_eval=times))
        state = node_state(p, 128)
        assert state.time == 0.5
        with pytest.raises(ValidationError):
            node_state(p, 0)

    def test_track_sampled_trajectory(self, two_equal):
        times = np.linspace(0.0, 1.0, 257)
        p = sample_path(integrate(bound_orbit(two_equal), 1.0, t_eval=times))
        assert track_minimizer(p, 128, 0.25) < 1e-4

    @pytest.mark.slow
    def test_track_actual_minimizer(self, two_equal):
        q_i = Configuration((-1.0, 1.0), two_equal)
        q_f = Configuration((-1.5, 1.5), two_equal)
        result = minimize(q_i, q_f, 0.0, 1.0, MinimizeConfig(grid_size=128))
        assert result.converged
        assert track_minimizer(result.path, 64, 0.25) < 1e-3
