import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdepth.hermite2d import (hermite2d_diagonals, hermite2d_eval, hermite2d_rows,
                              hermite2d_table)


def series_mp(n, m, x, y, k, dps=50):
    """Reference series in extended precision."""
    with mpmath.workdps(dps):
        x, y, k = mpmath.mpc(x), mpmath.mpc(y), mpmath.mpc(k)
        total = mpmath.mpc(0)
        for j in range(min(n, m) + 1):
            total += (mpmath.binomial(n, j) * mpmath.binomial(m, j) * mpmath.factorial(j)
                      * k**j * x ** (n - j) * y ** (m - j))
        return complex(total)


def series_exact(n, m, x, y, k):
    """Exact rational series for rational arguments."""
    x, y, k = Fraction(x), Fraction(y), Fraction(k)
    return sum(math.comb(n, j) * math.comb(m, j) * math.factorial(j) * k**j
               * x ** (n - j) * y ** (m - j) for j in range(min(n, m) + 1))


finite = st.floats(-3, 3, allow_nan=False)


def test_trivial_cases():
    assert hermite2d_eval(0, 0, 1.3 - 2j, 0.4j, 0.7) == 1
    assert hermite2d_eval(3, 2, 1.5, -0.5j, 0.0) == pytest.approx(1.5**3 * (-0.5j) ** 2)
    x, y, k = 0.3 + 0.2j, -1.1 + 0.5j, 0.45 - 0.1j
    assert hermite2d_eval(1, 1, x, y, k) == pytest.approx(x * y + k, rel=1e-15)


@pytest.mark.parametrize("n", range(8))
def test_origin_value(n):
    k = -0.6
    assert hermite2d_eval(n, n, 0, 0, k) == pytest.approx(math.factorial(n) * k**n, rel=1e-14)
    if n:
        assert hermite2d_eval(n, n + 1, 0, 0, k) == 0


@pytest.mark.parametrize("n,m", [(0, 5), (4, 4), (7, 3), (12, 9)])
def test_exact_rational_series(n, m):
    x, y, k = Fraction(3, 7), Fraction(-5, 4), Fraction(-2, 3)
    ref = series_exact(n, m, x, y, k)
    got = hermite2d_eval(n, m, float(x), float(y), float(k))
    assert got.real == pytest.approx(float(ref), rel=1e-13, abs=1e-300)
    assert got.imag == 0


@pytest.mark.parametrize("x,y,k", [(0.5 + 1j, 0.5 - 1j, -0.75), (3 - 2j, 1 + 4j, 1.8),
                                   (-9.5, 7j, -2.0), (0.01, 0.02, 1.0)])
def test_eval_against_extended_precision(x, y, k):
    for n, m in [(0, 40), (13, 21), (40, 40), (60, 55)]:
        ref = series_mp(n, m, x, y, k)
        assert abs(hermite2d_eval(n, m, x, y, k) - ref) <= 1e-10 * abs(ref) + 1e-300


def test_table_examples():
    k = 0.37
    t = hermite2d_table(2, 2, 0, 0, k)
    np.testing.assert_allclose(t.values, [[1, 0, 0], [0, k, 0], [0, 0, 2 * k * k]], atol=1e-15)
    x, y = 1.2 - 0.3j, 0.4 + 2j
    t = hermite2d_table(1, 1, x, y, 0)
    np.testing.assert_allclose(t.values, [[1, y], [x, x * y]], rtol=1e-15)
    assert t[0, 0] == 1


def test_table_matches_series(rng):
    for _ in range(6):
        x, y = rng.uniform(-10, 10, 2) + 1j * rng.uniform(-10, 10, 2)
        k = rng.uniform(-2, 2)
        t = hermite2d_table(40, 40, x, y, k).values
        for n, m in rng.integers(0, 41, size=(25, 2)):
            ref = series_mp(int(n), int(m), x, y, k)
            assert abs(t[n, m] - ref) <= 1e-10 * max(abs(ref), 1e-300), (n, m, x, y, k)


def test_generating_function(rng):
    order = 12
    fact = np.array([math.factorial(i) for i in range(order + 1)], dtype=float)
    for _ in range(10):
        x, y = (rng.uniform(0, 1, 2) * np.exp(2j * np.pi * rng.uniform(size=2)))
        k = rng.uniform(0, 1) * np.exp(2j * np.pi * rng.uniform())
        table = hermite2d_table(order, order, x, y, k).values
        for mu, nu in [(0.5, -0.5), (0.3j, 0.5), (-0.4 + 0.2j, 0.1 - 0.45j)]:
            pw_mu = mu ** np.arange(order + 1) / fact
            pw_nu = nu ** np.arange(order + 1) / fact
            total = pw_mu @ table @ pw_nu
            assert abs(total - np.exp(mu * x + nu * y + k * mu * nu)) < 1e-8


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 25), st.integers(0, 25), finite, finite, finite, finite, finite)
def test_swap_symmetry(n, m, xr, xi, yr, yi, k):
    x, y = complex(xr, xi), complex(yr, yi)
    a = hermite2d_eval(n, m, x, y, k)
    b = hermite2d_eval(m, n, y, x, k)
    assert abs(a - b) <= 1e-13 * max(1.0, abs(a))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 20), st.integers(0, 20), finite, finite, finite)
def test_kappa_zero_is_monomial(n, m, xr, yi, scale):
    x, y = complex(xr, 0.3), complex(0.2, yi)
    assert hermite2d_eval(n, m, x, y, 0.0) == pytest.approx(x**n * y**m, rel=1e-14, abs=1e-300)


def test_negative_index_rejected():
    with pytest.raises(ValueError):
        hermite2d_eval(-1, 2, 0, 0, 1)
    with pytest.raises(ValueError):
        hermite2d_table(-1, 2, 0, 0, 1)


def _normalised_reference(n_max, x, y, k, seed):
    ref = np.empty((n_max + 1, n_max + 1), dtype=complex)
    for n in range(n_max + 1):
        for m in range(n_max + 1):
            ref[n, m] = seed * series_mp(n, m, x, y, k) / math.sqrt(
                math.factorial(n) * math.factorial(m))
    return ref


@pytest.mark.parametrize("k", [-0.8, 0.0, 1.3])
def test_rows_and_diagonals_match_series(k):
    n_max, x, y, seed = 14, 1.7 - 0.4j, 1.7 + 0.4j, 0.05
    ref = _normalised_reference(n_max, x, y, k, seed)
    rows = np.array([r for r in hermite2d_rows(n_max, n_max, x, y, k, seed)])
    # the row recurrence is only forward-stable on the scale of the table
    assert np.max(np.abs(rows - ref)) <= 1e-12 * np.max(np.abs(ref))
    seen = set()
    for d, strip in hermite2d_diagonals(n_max, x, y, k, seed):
        seen.add(d)
        np.testing.assert_allclose(strip, ref.diagonal(d), rtol=1e-11, atol=1e-15)
    assert seen == set(range(-n_max, n_max + 1))


def test_diagonals_stable_where_rows_lose_digits():
    # kappa < 0 with large |xy| is where the row recurrence cancels badly
    n_max, x, y, k = 60, 6 - 5j, 6 + 5j, -1.0
    seed = math.exp(-abs(x) ** 2 / 4)
    d, strip = next(hermite2d_diagonals(n_max, x, y, k, seed, offsets=[0]))
    assert d == 0
    for n in (10, 30, 60):
        ref = seed * series_mp(n, n, x, y, k, dps=80) / math.factorial(n)
        assert abs(strip[n] - ref) <= 1e-10 * abs(ref)


def test_diagonal_offsets_validated():
    with pytest.raises(ValueError):
        list(hermite2d_diagonals(3, 1.0, 1.0, 1.0, offsets=[4]))
