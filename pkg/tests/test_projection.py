import numpy as np
import pytest

from wproj.autodiff import Rng, ShapeError
from wproj.manifolds import AnalyticManifold
from wproj.projection import wp_project, wp_project_batch, wp_trajectory
from wproj.training import make_exact_schedule


BALL = AnalyticManifold("ball", center=(0.0, 0.0), radius=1.0)


def _exact_schedule(num_stages=50, mu=(0.5, 0.5)):
    cloud = Rng(0).uniform(size=(50, 2), lo=1.5, hi=3.0)
    return make_exact_schedule(BALL, cloud, num_stages, mu)


def test_wp_project_single_stage_step():
    # one stage, gamma_1 = 1: the anchored update returns to u^1 exactly
    # when gamma = 1 regardless of the g step
    sched = _exact_schedule(num_stages=1)
    assert sched.stages[0].gamma == 1.0
    u = np.array([2.0, 0.0])
    assert np.allclose(wp_project(sched, u), u)


def test_wp_project_converges_on_exact_ball():
    sched = _exact_schedule(num_stages=500)
    for u in Rng(1).uniform(size=(10, 2), lo=1.5, hi=3.0):
        p = BALL.project(u)
        assert np.linalg.norm(wp_project(sched, u) - p) < 0.05


def test_wp_trajectory_endpoint_matches_project():
    sched = _exact_schedule(num_stages=20)
    u = np.array([2.5, 1.0])
    traj = wp_trajectory(sched, u)
    assert len(traj) == 21
    assert np.array_equal(traj[0], u)
    assert np.array_equal(traj[-1], wp_project(sched, u))


def test_wp_project_batch_matches_rows():
    sched = _exact_schedule(num_stages=15)
    pts = Rng(2).uniform(size=(8, 2), lo=1.2, hi=2.8)
    batch = wp_project_batch(sched, pts)
    for u, row in zip(pts, batch):
        assert np.allclose(row, wp_project(sched, u), atol=1e-12)


def test_wp_project_truncated_replay():
    sched = _exact_schedule(num_stages=20)
    u = np.array([2.0, 1.0])
    partial = wp_project(sched, u, num_steps=5)
    assert np.array_equal(partial, wp_trajectory(sched, u)[5])


def test_wp_project_step_overrun_requires_flag():
    sched = _exact_schedule(num_stages=5)
    u = np.array([2.0, 0.5])
    with pytest.raises(ValueError):
        wp_project(sched, u, num_steps=10)
    # with the flag the last stage is reused and accuracy improves
    long = wp_project(sched, u, num_steps=200, repeat_last_stage=True)
    short = wp_project(sched, u)
    p = BALL.project(u)
    assert np.linalg.norm(long - p) < np.linalg.norm(short - p)


def test_wp_project_dimension_check():
    sched = _exact_schedule(num_stages=3)
    with pytest.raises(ShapeError):
        wp_project(sched, np.ones(3))
    with pytest.raises(ShapeError):
        wp_project_batch(sched, np.ones((4, 5)))


def test_wp_project_fixed_on_manifold_points():
    # points already on the set have J = 0 and zero gradient; only the
    # anchoring term acts, and it anchors to the point itself
    sched = _exact_schedule(num_stages=30, mu=(0.0, 1.0))
    for u in BALL.sample(10, Rng(3)):
        assert np.linalg.norm(wp_project(sched, u) - u) < 1e-12
