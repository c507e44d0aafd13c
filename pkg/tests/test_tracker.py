import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvsgd.bounds import ConvexityConstants
from tvsgd.expfam import ModelSpec, make_gaussian_mean, make_poisson_natural
from tvsgd.rng import stream
from tvsgd.sets import EuclideanBall, FeasibleBox
from tvsgd.tracker import (
    AlphaVerdict,
    DivergenceError,
    init,
    optimal_alpha,
    sgd_update,
    step,
    validate_alpha,
)

GAUSS = make_gaussian_mean()


def test_init():
    s = init([0.0], 0.5)
    assert s.lam.tolist() == [0.0] and s.step_index == 1 and not s.projected_on_init
    with pytest.warns(UserWarning, match="projected"):
        s = init([2.0], 0.5, FeasibleBox(0, 1))
    assert s.lam.tolist() == [1.0] and s.projected_on_init
    with pytest.raises(ValueError):
        init([0.0], -0.1)


def test_step_examples():
    s = step(init([1.0], 0.5), GAUSS, 2.0)
    assert s.lam.tolist() == [1.5] and s.step_index == 2
    s = step(init([0.9], 0.5, FeasibleBox(0, 1)), GAUSS, 2.0)
    assert s.lam.tolist() == [1.0]
    # fixed point: x = A'(lam) makes the score vanish
    p = make_poisson_natural()
    s0 = init([0.0], 0.3)
    assert step(s0, p, 1.0).lam.tolist() == s0.lam.tolist()


def test_step_is_pure_and_deterministic():
    s0 = init([0.2], 0.4, EuclideanBall([0.0], 1.0))
    a, b = step(s0, GAUSS, 1.7), step(s0, GAUSS, 1.7)
    assert a.lam.tobytes() == b.lam.tobytes()
    assert s0.lam.tolist() == [0.2] and s0.step_index == 1


def test_step_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        step(init([0.0, 0.0], 0.5), GAUSS, 1.0)


class _Blowup(ModelSpec):
    def score(self, x, lam):
        return np.full(np.shape(lam), np.inf)


def test_divergence_is_reported():
    s = init([0.0], 0.5)
    with pytest.raises(DivergenceError) as info:
        step(s, _Blowup(), 1.0)
    assert info.value.state is s


def test_gaussian_closed_form_unrolling():
    alpha, lam1, n = 0.3, 0.7, 200
    xs = stream(8, 0).standard_normal(n)
    s = init([lam1], alpha)
    for x in xs:
        s = step(s, GAUSS, x)
    weights = (1 - alpha) ** (n - 1 - np.arange(n))
    closed = (1 - alpha) ** n * lam1 + alpha * np.sum(weights * xs)
    assert s.lam[0] == pytest.approx(closed, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 2.0), st.integers(0, 2**31), st.booleans())
def test_projected_iterates_stay_feasible(alpha, seed, use_ball):
    proj = EuclideanBall([0.2], 0.5) if use_ball else FeasibleBox(-0.3, 0.6)
    s = init([0.1], alpha, proj)
    for x in stream(seed, 0).normal(0, 5, 100):
        s = step(s, GAUSS, x)
        assert proj.contains(s.lam, tol=1e-12)


def test_batched_update_matches_single_steps():
    lam = np.array([[0.1], [0.5], [-0.2]])
    x = np.array([[1.0], [0.0], [2.0]])
    batched = sgd_update(lam, 0.5, GAUSS, x)
    singles = [step(init(l, 0.5), GAUSS, xi).lam for l, xi in zip(lam, x)]
    np.testing.assert_array_equal(batched, np.array(singles))


def test_optimal_alpha_examples():
    assert optimal_alpha(ConvexityConstants(1, 1)) == 0.5
    assert optimal_alpha(ConvexityConstants(1, 2)) == pytest.approx(1 / 3)
    assert optimal_alpha(ConvexityConstants(0.19661, 0.25)) == pytest.approx(1 / 0.44661, rel=1e-12)


def test_validate_alpha_verdicts():
    cc = ConvexityConstants(1, 1)
    assert validate_alpha(0.5, cc) is AlphaVerdict.ADMISSIBLE
    assert validate_alpha(1.0, cc) is AlphaVerdict.AT_OR_ABOVE_UPPER
    assert validate_alpha(0.1, cc) is AlphaVerdict.BELOW_RANGE
