import math

import numpy as np
from hypothesis import given, strategies as st

from hotspots._gamma import gamma, lgamma


@given(st.floats(0.01, 170.0))
def test_lgamma_matches_math(x):
    assert abs(lgamma(x) - math.lgamma(x)) <= 1e-12 * max(1.0, abs(math.lgamma(x)))


@given(st.floats(-20.0, 0.49).filter(lambda x: abs(x - round(x)) > 1e-3))
def test_reflection_branch(x):
    assert abs(lgamma(x) - math.lgamma(x)) <= 1e-10 * max(1.0, abs(math.lgamma(x)))


def test_poles_and_vectorization():
    out = lgamma(np.array([0.0, -1.0, -2.0, 0.5]))
    assert np.all(np.isinf(out[:3]))
    assert abs(out[3] - 0.5 * math.log(math.pi)) < 1e-14


def test_gamma_positive_only():
    assert abs(gamma(5.0) - 24.0) < 1e-11
    try:
        gamma(-0.5)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")
