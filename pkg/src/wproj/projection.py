"""Deployment of the learned projection operator.

Replays the trained stages as anchored (Halpern-type) updates:
u^{k+1} = gamma_k * u^1 + (1 - gamma_k) * g_k(u^k).
"""

import numpy as np

from .autodiff import ShapeError
from .training import g_step


def _resolve_steps(schedule, num_steps, repeat_last_stage):
    if num_steps is None:
        return len(schedule)
    if num_steps > len(schedule) and not repeat_last_stage:
        raise ValueError(
            "requested %d steps but the schedule has %d stages; pass "
            "repeat_last_stage=True to reuse the final stage" %
            (num_steps, len(schedule)))
    return num_steps


def _stage(schedule, k):
    return schedule.stages[min(k, len(schedule) - 1)]


def wp_project(schedule, u, num_steps=None, repeat_last_stage=False):
    """Approximate projection of u, replaying the stages in training order."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (schedule.input_dim,):
        raise ShapeError("signal dimension %s does not match schedule dim %d"
                         % (u.shape, schedule.input_dim))
    steps = _resolve_steps(schedule, num_steps, repeat_last_stage)
    anchor = u.copy()
    uk = u.copy()
    for k in range(steps):
        s = _stage(schedule, k)
        uk = s.gamma * anchor + (1.0 - s.gamma) * g_step(uk, s.net, s.beta,
                                                        schedule.mu)
    return uk


def wp_trajectory(schedule, u, num_steps=None, repeat_last_stage=False):
    """All iterates u^1 .. u^{K+1}; the last one equals wp_project(u)."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (schedule.input_dim,):
        raise ShapeError("signal dimension %s does not match schedule dim %d"
                         % (u.shape, schedule.input_dim))
    steps = _resolve_steps(schedule, num_steps, repeat_last_stage)
    anchor = u.copy()
    uk = u.copy()
    out = [uk.copy()]
    for k in range(steps):
        s = _stage(schedule, k)
        uk = s.gamma * anchor + (1.0 - s.gamma) * g_step(uk, s.net, s.beta,
                                                        schedule.mu)
        out.append(uk.copy())
    return out


def wp_project_batch(schedule, x, num_steps=None, repeat_last_stage=False):
    """Row-wise projection of a sample matrix (shared stage replay)."""
    from .training import g_step_batch

    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != schedule.input_dim:
        raise ShapeError("signal dimension %d does not match schedule dim %d"
                         % (x.shape[1], schedule.input_dim))
    steps = _resolve_steps(schedule, num_steps, repeat_last_stage)
    anchor = x.copy()
    uk = x.copy()
    for k in range(steps):
        s = _stage(schedule, k)
        uk = s.gamma * anchor + (1.0 - s.gamma) * g_step_batch(
            uk, s.net, s.beta, schedule.mu)
    return uk
