import numpy as np
import pytest
from shapely.geometry import LineString

from comtraq.tasks import (
    TaskGenConfig, TaskSpec, budget_for, builtin_scenario, min_turn_radius, read_suite, read_trajectory_csv,
    sample_suite, sample_task, write_suite, write_trajectory_csv,
)

GEN = TaskGenConfig()


def test_sampled_tasks_valid():
    rng = np.random.default_rng(0)
    r_feasible = 0.16 / np.tan(np.pi / 3)
    for t in sample_suite(15, GEN, rng):
        wp = t.trajectory.waypoints
        assert 60 <= len(wp) <= 250
        gaps = np.linalg.norm(np.diff(wp, axis=0), axis=1)
        assert np.all(gaps > 0) and np.all(gaps <= 0.1 + 1e-9)
        assert LineString(wp).is_simple
        assert min_turn_radius(wp) >= r_feasible
        assert np.all((wp >= -1.0) & (wp <= GEN.workspace + 1.0))
        assert round(0.05 * len(wp)) <= t.budget <= round(0.12 * len(wp)) + 1


def test_budget_rounding():
    assert budget_for(135, 0.074) == 10
    assert budget_for(245, 20 / 245) == 20


def test_sample_task_deterministic():
    a = sample_task(GEN, np.random.default_rng(42))
    b = sample_task(GEN, np.random.default_rng(42))
    np.testing.assert_array_equal(a.trajectory.waypoints, b.trajectory.waypoints)
    assert a.budget == b.budget


def test_sampler_fails_loudly():
    impossible = TaskGenConfig(n_waypoints=(5000, 6000), max_attempts=5)
    with pytest.raises(RuntimeError, match="5 attempts"):
        sample_task(impossible, np.random.default_rng(0))


def test_builtin_scenarios():
    s1, s2 = builtin_scenario("s1-like"), builtin_scenario("s2-like")
    assert (len(s1.trajectory), s1.budget) == (135, 10)
    assert (len(s2.trajectory), s2.budget) == (245, 20)
    with pytest.raises(KeyError):
        builtin_scenario("nope")


def test_trajectory_csv_round_trip(tmp_path):
    traj = sample_task(GEN, np.random.default_rng(1)).trajectory
    write_trajectory_csv(traj, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "x,y"
    back = read_trajectory_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.waypoints, traj.waypoints)


def test_trajectory_csv_bad_header(tmp_path):
    (tmp_path / "t.csv").write_text("a,b\n0,0\n0.1,0\n")
    with pytest.raises(ValueError, match="header"):
        read_trajectory_csv(tmp_path / "t.csv")


def test_suite_round_trip(tmp_path):
    tasks = sample_suite(3, GEN, np.random.default_rng(2))
    index = write_suite(tasks, tmp_path / "suite")
    back = read_suite(index)
    assert [t.name for t in back] == [t.name for t in tasks]
    assert [t.budget for t in back] == [t.budget for t in tasks]
    for a, b in zip(tasks, back):
        np.testing.assert_array_equal(a.trajectory.waypoints, b.trajectory.waypoints)


def test_negative_budget_rejected():
    with pytest.raises(ValueError):
        TaskSpec(builtin_scenario("s1-like").trajectory, -1)
