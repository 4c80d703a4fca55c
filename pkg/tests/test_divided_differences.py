import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dd_direct_sum, rel_err
from odesign.divided_differences import (
    DividedDifferenceTable,
    dd_exp,
    dd_exp_recursive,
    dd_exp_signed_log,
    dd_exp_taylor,
    table_extend,
    table_remove,
)
from odesign.errors import DomainError

distinct_inputs = st.lists(
    st.floats(-5, 5, allow_nan=False), min_size=1, max_size=8, unique=True
).filter(lambda xs: min((abs(a - b) for i, a in enumerate(xs) for b in xs[i + 1 :]), default=1) > 0.05)
betas = st.floats(0.01, 5)


def test_single_input():
    assert dd_exp([0.7], 2.0) == pytest.approx(math.exp(-1.4), rel=1e-15)


def test_triple_confluent_at_zero():
    assert dd_exp([0, 0, 0], 1.0) == pytest.approx(0.5, rel=1e-14)


def test_two_point():
    assert dd_exp([0, 1], 1.0) == pytest.approx(math.exp(-1) - 1, rel=1e-14)


def test_recursive_examples():
    assert dd_exp_recursive([0, 1], 1.0) == pytest.approx(math.exp(-1) - 1, rel=1e-15)
    assert dd_exp_recursive([2, 2], 1.0) == pytest.approx(-math.exp(-2), rel=1e-15)
    f12 = (math.exp(-2) - math.exp(-1)) / 1
    f01 = math.exp(-1) - 1
    assert dd_exp_recursive([0, 1, 2], 1.0) == pytest.approx((f12 - f01) / 2, rel=1e-14)


def test_taylor_examples():
    assert dd_exp_taylor([0], 1.0) == pytest.approx(1.0, rel=1e-15)
    assert dd_exp_taylor([0, 0], 1.0) == pytest.approx(-1.0, rel=1e-15)
    assert abs(dd_exp_taylor([0, 1], 1.0, terms=40) - dd_exp_recursive([0, 1], 1.0)) < 1e-12


def test_taylor_partial_sums_approach_limit():
    xs, beta = [0.3, -1.2, 2.0], 1.5
    target = dd_exp(xs, beta)
    errs = [abs(dd_exp_taylor(xs, beta, terms=t) - target) for t in (5, 10, 20, 40)]
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] < 1e-12 * abs(target)


@pytest.mark.parametrize("bad", [[float("nan")], [0.0, float("inf")], []])
def test_rejects_bad_inputs(bad):
    with pytest.raises(DomainError):
        dd_exp(bad, 1.0)


def test_rejects_nonfinite_beta():
    with pytest.raises(DomainError):
        dd_exp([0.0], float("inf"))


@settings(max_examples=200, deadline=None)
@given(distinct_inputs, betas)
def test_matches_direct_sum(xs, beta):
    assert rel_err(dd_exp(xs, beta), dd_direct_sum(xs, beta)) < 1e-10


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=13), betas)
def test_sign_law(xs, beta):
    sign, _ = dd_exp_signed_log(xs, beta)
    assert sign == (-1) ** (len(xs) - 1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=10), betas, st.randoms(use_true_random=False))
def test_permutation_invariant(xs, beta, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    assert dd_exp(ys, beta) == dd_exp(xs, beta)


@pytest.mark.parametrize("q", [1, 2, 4, 7])
def test_confluent_limit(q):
    x, beta, eps = 0.4, 1.3, 1e-6
    spread = [x + eps * i for i in range(q + 1)]
    limit = (-beta) ** q * math.exp(-beta * x) / math.factorial(q)
    assert rel_err(dd_exp(spread, beta), limit) < 1e-4
    assert rel_err(dd_exp([x] * (q + 1), beta), limit) < 1e-13


def test_large_beta_no_overflow():
    sign, logmag = dd_exp_signed_log([-50.0, 0.0, 30.0, 30.0], 40.0)
    assert sign == -1 and math.isfinite(logmag)


def test_table_extend_and_remove():
    t0 = DividedDifferenceTable.build([0.0], 1.0)
    t1 = table_extend(t0, 1.0)
    assert t1.value == pytest.approx(math.exp(-1) - 1, rel=1e-14)
    assert table_extend(t1, 1.0).value == pytest.approx(dd_exp_recursive([0, 1, 1], 1.0), rel=1e-13)
    assert table_remove(t1, -1).value == t0.value
    t3 = DividedDifferenceTable.build([0.0, 1.0, 2.0], 1.0)
    assert table_remove(t3, 1).value == pytest.approx(dd_exp([0, 2], 1.0), rel=1e-15)
    assert table_remove(t1, 0).value == pytest.approx(math.exp(-1), rel=1e-15)
    assert t3.order == 2
    with pytest.raises(DomainError):
        table_remove(t0, 0)


def test_three_methods_agree_on_random_multisets():
    rng = np.random.default_rng(11)
    for _ in range(100):
        q = int(rng.integers(0, 13))
        xs = list(np.round(rng.uniform(-5, 5, q + 1), int(rng.integers(0, 3))))
        beta = float(rng.uniform(1e-3, 5))
        a = dd_exp(xs, beta)
        assert rel_err(dd_exp_recursive(xs, beta), a) < 1e-10
        assert rel_err(dd_exp_taylor(xs, beta), a) < 1e-10
