import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tvsgd.paths import (
    DriftPath,
    constant_path,
    path_at,
    random_walk_path,
    sinusoid_path,
    step_change_path,
    verify_drift_bound,
)
from tvsgd.sets import EuclideanBall, FeasibleBox

finite = st.floats(-50, 50)


@st.composite
def boxes(draw, d=None):
    d = d or draw(st.integers(1, 4))
    lo = draw(arrays(float, d, elements=finite))
    width = draw(arrays(float, d, elements=st.floats(0, 20)))
    return FeasibleBox(lo, lo + width)


@st.composite
def balls(draw, d=None):
    d = d or draw(st.integers(1, 4))
    return EuclideanBall(draw(arrays(float, d, elements=finite)), draw(st.floats(0, 20)))


def test_box_basics():
    box = FeasibleBox(0.0, 1.0)
    assert box.dim == 1
    np.testing.assert_array_equal(box.project(np.array([2.0])), [1.0])
    np.testing.assert_array_equal(box.project(np.array([[-1.0], [0.3]])), [[0.0], [0.3]])
    assert box.contains(np.array([0.5])) and not box.contains(np.array([1.5]))
    assert box == FeasibleBox([0.0], [1.0]) and hash(box) == hash(FeasibleBox([0.0], [1.0]))


def test_ball_basics():
    ball = EuclideanBall([0.0, 0.0], 1.0)
    np.testing.assert_allclose(ball.project(np.array([3.0, 4.0])), [0.6, 0.8])
    np.testing.assert_array_equal(ball.project(np.array([0.1, 0.2])), [0.1, 0.2])
    with pytest.raises(ValueError):
        EuclideanBall([0.0], -1.0)


@settings(max_examples=200)
@given(st.data())
def test_projection_is_nonexpansive_and_feasible(data):
    d = data.draw(st.integers(1, 4))
    s = data.draw(st.one_of(boxes(d), balls(d)))
    x = data.draw(arrays(float, d, elements=st.floats(-200, 200)))
    y = s.project(data.draw(arrays(float, d, elements=st.floats(-200, 200))))
    px = s.project(x)
    assert np.all(s.contains(px, tol=1e-9))
    assert np.linalg.norm(px - y) <= np.linalg.norm(x - y) + 1e-12
    np.testing.assert_allclose(s.project(px), px, atol=1e-12)


def test_constant_path():
    p = constant_path(0.3, FeasibleBox(-1, 1))
    assert p.declared_k == 0.0
    assert path_at(p, 1)[0] == 0.3 and path_at(p, 12345)[0] == 0.3
    assert verify_drift_bound(p, 1000) == 0.0


def test_sinusoid_path_bound_scan():
    p = sinusoid_path(0.0, 1.0, 0.01, FeasibleBox(-2, 2))
    assert p.declared_k == pytest.approx(0.01)
    assert path_at(p, 100)[0] == pytest.approx(math.sin(1.0), rel=1e-14)
    assert verify_drift_bound(p, 100_000) <= 0.01
    traj = p.trajectory(1000)
    direct = np.array([math.sin(0.01 * t) for t in range(1, 1001)])
    np.testing.assert_allclose(traj[:, 0], direct, rtol=1e-14, atol=1e-15)


@pytest.mark.slow
def test_sinusoid_bound_to_one_million():
    p = sinusoid_path(0.0, 1.0, 0.01, FeasibleBox(-2, 2))
    assert verify_drift_bound(p, 1_000_000) <= p.declared_k


def test_sinusoid_is_clamped_into_box():
    p = sinusoid_path(0.0, 2.0, 0.05, FeasibleBox(-1, 1))
    traj = p.trajectory(500)
    assert traj.min() == -1.0 and traj.max() == 1.0
    assert verify_drift_bound(p, 500) <= p.declared_k


def test_step_change_path():
    p = step_change_path(0.0, 1000, 0.5, FeasibleBox(-1, 1))
    assert p.declared_k == 0.5
    assert np.linalg.norm(path_at(p, 1001) - path_at(p, 1000)) == 0.5
    assert path_at(p, 1000)[0] == 0.0 and path_at(p, 1001)[0] == 0.5
    assert verify_drift_bound(p, 3000) == 0.5


@settings(max_examples=25, deadline=None)
@given(boxes(), st.floats(0.001, 1.0), st.floats(0.1, 10.0), st.integers(0, 2**31))
def test_random_walk_respects_k_and_box(box, k, scale, seed):
    p = random_walk_path(box.lo, k, box, seed=seed, step_scale=k * scale)
    traj = p.trajectory(2000)
    assert np.all(box.contains(traj))
    assert verify_drift_bound(p, 2000) <= k * (1 + 1e-12)


def test_random_walk_prefix_stable_and_seeded():
    box = FeasibleBox([-1, -1], [1, 1])
    p = random_walk_path([0, 0], 0.05, box, seed=4)
    long = p.trajectory(500)
    fresh = random_walk_path([0, 0], 0.05, box, seed=4)
    np.testing.assert_array_equal(fresh.trajectory(200), long[:200])
    np.testing.assert_array_equal(path_at(fresh, 321), long[320])
    other = random_walk_path([0, 0], 0.05, box, seed=5).trajectory(200)
    assert not np.array_equal(other, long[:200])
    assert verify_drift_bound(p, 100_000) <= 0.05


def test_understated_k_is_detected():
    p = sinusoid_path(0.0, 1.0, 0.1, FeasibleBox(-2, 2), declared_k=0.01)
    assert verify_drift_bound(p, 1000) > p.declared_k


def test_path_validation():
    box = FeasibleBox(0, 1)
    with pytest.raises(ValueError):
        DriftPath("spiral", box, 0.1)
    with pytest.raises(ValueError):
        DriftPath("constant", box, -0.1)
    with pytest.raises(ValueError):
        path_at(constant_path(0.5, box), 0)
    with pytest.raises(ValueError):
        verify_drift_bound(constant_path(0.5, box), 1)
