import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from xgcvqa.stats import DegenerateCorrelationWarning, fit_logistic, krocc, logistic4, plcc, rankdata, srocc


# --- brute-force definitions ----------------------------------------------------------------

def oracle_ranks(a):
    return [1 + sum(v < x for v in a) + 0.5 * (sum(v == x for v in a) - 1) for x in a]


def oracle_pearson(x, y):
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    sxy = math.fsum((p - mx) * (q - my) for p, q in zip(x, y))
    sxx = math.fsum((p - mx) ** 2 for p in x)
    syy = math.fsum((q - my) ** 2 for q in y)
    return sxy / math.sqrt(sxx * syy)


def oracle_srocc(a, b):
    return oracle_pearson(oracle_ranks(a), oracle_ranks(b))


def oracle_kendall_b(a, b):
    n = len(a)
    conc = disc = ta = tb = 0
    for i in range(n):
        for j in range(i + 1, n):
            da, db = np.sign(a[i] - a[j]), np.sign(b[i] - b[j])
            if da == 0 and db == 0:
                continue
            if da == 0:
                ta += 1
            elif db == 0:
                tb += 1
            elif da == db:
                conc += 1
            else:
                disc += 1
    return (conc - disc) / math.sqrt((conc + disc + ta) * (conc + disc + tb))


def random_pairs(count=100, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        n = int(rng.integers(2, 201))
        if k % 3 == 0:     # heavy ties
            a, b = rng.integers(0, 5, n).astype(float), rng.integers(0, 7, n).astype(float)
        else:
            a = rng.normal(size=n)
            b = 0.6 * a + rng.normal(size=n)
        if np.all(a == a[0]) or np.all(b == b[0]):
            a[0], b[-1] = a[0] + 1, b[-1] + 1
        out.append((a, b))
    return out


# --- examples -----------------------------------------------------------------------------

def test_srocc_examples():
    a = np.array([3.0, 1.0, 4.0, 1.5, 9.0])
    assert srocc(a, a) == 1.0
    assert srocc(a, -a) == -1.0
    assert srocc([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-15)


def test_krocc_examples():
    assert krocc([1, 2, 3, 4], [10, 20, 30, 40]) == 1.0
    assert krocc([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3, abs=1e-15)


def test_plcc_examples():
    a = np.array([0.3, 1.7, 2.2, 5.0, 3.1])
    assert plcc(a, 2 * a + 1) == pytest.approx(1.0, abs=1e-15)
    assert plcc(a, -a) == pytest.approx(-1.0, abs=1e-15)


def test_rankdata_ties():
    assert rankdata([10, 20, 10, 30]).tolist() == [1.5, 3.0, 1.5, 4.0]


# --- oracles ------------------------------------------------------------------------------

def test_against_brute_force_oracles():
    for a, b in random_pairs():
        assert abs(srocc(a, b) - oracle_srocc(list(a), list(b))) <= 1e-12
        assert abs(krocc(a, b) - oracle_kendall_b(list(a), list(b))) <= 1e-12
        assert abs(plcc(a, b) - oracle_pearson(list(a), list(b))) <= 1e-12


def test_srocc_no_ties_textbook_formula():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(3, 150))
        a, b = rng.permutation(n), rng.permutation(n)
        d2 = float(np.sum((a - b) ** 2))
        assert srocc(a, b) == pytest.approx(1 - 6 * d2 / (n * (n * n - 1)), abs=1e-12)


# --- properties ---------------------------------------------------------------------------

def grid_vector(data, n=None):
    # integers over 7: distinct values stay distinct under the transforms below
    size = data.draw(st.integers(2, 60)) if n is None else n
    return np.array(data.draw(st.lists(st.integers(-1000, 1000), min_size=size, max_size=size))) / 7.0


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_rank_invariance(data):
    a = grid_vector(data)
    b = grid_vector(data, len(a))
    assume(np.ptp(a) > 0 and np.ptp(b) > 0)
    base = srocc(a, b)
    assert srocc(a * 2 + 3, b / 4 - 1) == pytest.approx(base, abs=1e-12)
    assert srocc(np.arctan(a / 100), b ** 3) == pytest.approx(base, abs=1e-12)
    assert krocc(a * 2 + 3, np.arctan(b / 100)) == pytest.approx(krocc(a, b), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_krocc_bounded_and_matches_brute_force(data):
    a = data.draw(st.lists(st.integers(-5, 5), min_size=2, max_size=40))
    b = data.draw(st.lists(st.integers(-5, 5), min_size=len(a), max_size=len(a)))
    assume(len(set(a)) > 1 and len(set(b)) > 1)
    t = krocc(a, b)
    assert -1.0 <= t <= 1.0
    assert t == pytest.approx(oracle_kendall_b(a, b), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(data=st.data(), k=st.integers(-800, 800).filter(bool), m=st.integers(-400, 400))
def test_plcc_affine_invariance(data, k, m):
    # dyadic alpha, beta and b make alpha * b + beta exact, isolating the correlation arithmetic
    alpha, beta = k / 8.0, m / 4.0
    n = data.draw(st.integers(3, 50))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    a = rng.normal(size=n)
    b = rng.integers(-1000, 1000, size=n) / 64.0
    assume(np.ptp(b) > 0)
    assert plcc(a, alpha * b + beta) == pytest.approx(math.copysign(1, alpha) * plcc(a, b), abs=1e-12)


# --- degenerate inputs --------------------------------------------------------------------

@pytest.mark.parametrize("fn", [srocc, krocc, plcc, lambda a, b: plcc(a, b, logistic=True)])
def test_degenerate_returns_zero_with_warning(fn):
    with pytest.warns(DegenerateCorrelationWarning):
        assert fn([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) == 0.0


def test_input_validation():
    with pytest.raises(ValueError):
        srocc([1.0], [1.0])
    with pytest.raises(ValueError):
        krocc([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        plcc([1.0, float("nan")], [1.0, 2.0])


# --- logistic mapping ---------------------------------------------------------------------

def test_logistic_fit_recovers_parameters():
    a = np.linspace(-3, 3, 120)
    b = logistic4(a, 5.0, 1.0, 0.4, 0.7)
    p = fit_logistic(a, b)
    assert np.allclose(logistic4(a, *p), b, atol=1e-6)
    assert plcc(a, b, logistic=True) == pytest.approx(1.0, abs=1e-9)


def test_logistic_improves_monotone_nonlinear():
    rng = np.random.default_rng(1)
    a = rng.uniform(0, 100, 200)
    b = 1 + 4 / (1 + np.exp(-(a - 50) / 8)) + rng.normal(0, 0.1, 200)
    assert plcc(a, b, logistic=True) > plcc(a, b)


def test_logistic_decreasing_trend():
    a = np.linspace(0, 10, 50)
    b = logistic4(a, 1.0, 5.0, 5.0, 1.2)
    assert plcc(a, b, logistic=True) == pytest.approx(1.0, abs=1e-9)
