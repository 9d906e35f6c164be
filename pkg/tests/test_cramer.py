import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pnq.cramer import (
    CramerParams,
    flat_magnitude_report,
    lambda_cramer,
    lambda_cramer_array,
    lambda_sharp_array,
    lambda_sharp_flat,
    lambda_sharp_literal,
    mean_value,
    truncated_alternating,
)


def test_q3_examples():
    p = CramerParams.explicit(3)
    assert p.normalizer == 3
    assert lambda_cramer(5, p) == 3
    assert lambda_cramer(6, p) == 0
    assert lambda_cramer(Fraction(1, 2), p) == 0
    assert lambda_cramer(-5, p) == 3


def test_desk_scale_parameters():
    p = CramerParams.from_scale(1e8)
    assert p.primes == (2, 3)
    assert 3.0 < p.Q < 5.0


@given(st.integers(min_value=0, max_value=12), st.integers(min_value=0, max_value=14))
def test_truncated_alternating_matches_direct_sum(w, t):
    direct = sum((-1) ** j * math.comb(w, j) for j in range(min(w, t) + 1))
    assert truncated_alternating(w, t) == direct


@given(st.integers(min_value=-10**6, max_value=10**6), st.sampled_from([2, 3, 4, 7]))
def test_sharp_matches_literal_subset_sum(x, t):
    p = CramerParams.explicit(30, t)
    sharp, flat = lambda_sharp_flat(x, p)
    assert sharp == pytest.approx(lambda_sharp_literal(x, p))
    assert sharp + flat == pytest.approx(lambda_cramer(x, p))


def test_flat_vanishes_with_few_small_factors():
    p = CramerParams.explicit(30, 3)
    for x in (1, 2, 6, 30, 11 * 13):
        assert lambda_sharp_flat(x, p)[1] == 0


def test_arrays_match_scalars():
    p = CramerParams.explicit(20, 2)
    xs = np.arange(-500, 501)
    assert np.allclose(lambda_cramer_array(xs, p), [lambda_cramer(int(x), p) for x in xs])
    assert np.allclose(lambda_sharp_array(xs, p), [lambda_sharp_flat(int(x), p)[0] for x in xs])


@pytest.mark.slow
def test_mean_value_near_one():
    assert abs(mean_value(10**7, CramerParams.explicit(50)) - 1) <= 0.02


def test_flat_report_is_finite():
    rep = flat_magnitude_report(10**6)
    assert all(math.isfinite(v) for v in rep.values() if isinstance(v, float))
