"""Incomplete two-dimensional Hermite polynomials.

    h_{n,m}(x, y | kappa) = sum_j C(n,j) C(m,j) j! kappa^j x^(n-j) y^(m-j)

with generating function exp(mu x + nu y + kappa mu nu).  Arguments may be
complex.  ``hermite2d_eval`` sums the series directly, ``hermite2d_table``
fills a whole table with the recurrence

    h_{n+1,m} = x h_{n,m} + kappa m h_{n,m-1},    h_{0,m} = y^m.

For kappa x y < 0 the series alternates and can cancel by many orders of
magnitude, so both scalar routines work in exact rational arithmetic (every
finite float is a dyadic rational) and round once at the end.

``hermite2d_rows`` is the vectorised workhorse used by the phase-space code:
it streams rows of the factorial-normalised table h_{n,m}/sqrt(n! m!) over
arrays of points, so that tables of order ~100 never overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

__all__ = ["HermiteTable", "hermite2d_eval", "hermite2d_table", "hermite2d_rows",
           "hermite2d_diagonals"]


@dataclass(frozen=True)
class HermiteTable:
    """Values h_{n,m}(x, y | kappa) for 0 <= n <= n_max, 0 <= m <= m_max."""

    n_max: int
    m_max: int
    x: complex
    y: complex
    kappa: complex
    values: np.ndarray

    def __getitem__(self, index):
        return self.values[index]


class _Exact:
    """Complex number with exact rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re, im=Fraction(0)):
        self.re, self.im = re, im

    @classmethod
    def of(cls, z: complex) -> "_Exact":
        return cls(Fraction(z.real), Fraction(z.imag))

    def __add__(self, o):
        return _Exact(self.re + o.re, self.im + o.im)

    def __mul__(self, o):
        if isinstance(o, _Exact):
            return _Exact(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
        return _Exact(self.re * o, self.im * o)

    def __complex__(self):
        return complex(_to_float(self.re), _to_float(self.im))


def _to_float(q: Fraction) -> float:
    try:
        return float(q)
    except OverflowError:
        return math.copysign(math.inf, q)


def _finite(*zs: complex) -> bool:
    return all(math.isfinite(z.real) and math.isfinite(z.imag) for z in zs)


def _pow_list(z: _Exact, k: int) -> list:
    out = [_Exact(Fraction(1))]
    for _ in range(k):
        out.append(out[-1] * z)
    return out


def hermite2d_eval(n: int, m: int, x: complex, y: complex, kappa: complex) -> complex:
    """Evaluate h_{n,m}(x, y | kappa) from its defining series.

    Terms are accumulated exactly, from j = min(n, m) downward, with the
    binomial weights built incrementally; only the final sum is rounded, so
    the result is accurate even where the alternating series cancels.
    Non-finite input falls back to plain floating point.
    """
    if n < 0 or m < 0:
        raise ValueError(f"indices must be non-negative, got n={n}, m={m}")
    x, y, kappa = complex(x), complex(y), complex(kappa)
    if not _finite(x, y, kappa):
        return sum(math.comb(n, j) * math.comb(m, j) * math.factorial(j)
                   * kappa**j * x ** (n - j) * y ** (m - j) for j in range(min(n, m) + 1))
    k = min(n, m)
    ex, ey, ek = _Exact.of(x), _Exact.of(y), _Exact.of(kappa)
    px, py, pk = _pow_list(ex, n), _pow_list(ey, m), _pow_list(ek, k)
    total = _Exact(Fraction(0))
    weight = 1
    for j in range(k, -1, -1):
        # weight = C(n,j) C(m,j) j!, updated from j+1 without factorials
        if j < k:
            weight = weight * (j + 1) // ((n - j) * (m - j))
        else:
            weight = math.comb(n, k) * math.comb(m, k) * math.factorial(k)
        total = total + pk[j] * px[n - j] * py[m - j] * weight
    return complex(total)


def hermite2d_table(n_max: int, m_max: int, x: complex, y: complex,
                    kappa: complex) -> HermiteTable:
    """Fill h_{n,m}(x, y | kappa) for all n <= n_max, m <= m_max by recurrence.

    The recurrence runs in exact arithmetic, so every entry is the correctly
    rounded value of the polynomial at the given (floating-point) arguments.
    """
    if n_max < 0 or m_max < 0:
        raise ValueError("table sizes must be non-negative")
    x, y, kappa = complex(x), complex(y), complex(kappa)
    h = np.empty((n_max + 1, m_max + 1), dtype=complex)
    if not _finite(x, y, kappa):
        h[0] = y ** np.arange(m_max + 1)
        h[0, 0] = 1.0
        ms = np.arange(1, m_max + 1)
        for n in range(n_max):
            h[n + 1, 0] = x * h[n, 0]
            h[n + 1, 1:] = x * h[n, 1:] + kappa * ms * h[n, :-1]
        return HermiteTable(n_max, m_max, x, y, kappa, h)
    ex, ek = _Exact.of(x), _Exact.of(kappa)
    row = _pow_list(_Exact.of(y), m_max)
    h[0] = [complex(v) for v in row]
    for n in range(n_max):
        new = [row[0] * ex]
        for m in range(1, m_max + 1):
            new.append(row[m] * ex + row[m - 1] * ek * m)
        row = new
        h[n + 1] = [complex(v) for v in row]
    return HermiteTable(n_max, m_max, x, y, kappa, h)


def hermite2d_rows(n_max: int, m_max: int, x, y, kappa,
                   seed=1.0) -> Iterator[np.ndarray]:
    """Yield rows of seed * h_{n,m}(x, y | kappa) / sqrt(n! m!) for n = 0..n_max.

    ``x``, ``y`` and ``seed`` broadcast against each other; each yielded row
    has shape ``(m_max + 1,) + shape``.  The normalised recurrence

        e_{n+1,m} = (x e_{n,m} + kappa sqrt(m) e_{n,m-1}) / sqrt(n+1)

    keeps entries of order one where the unnormalised table would overflow.
    Passing a tiny ``seed`` (e.g. a Gaussian envelope) lets the envelope
    multiply in before any large power is formed.
    """
    x, y, seed = np.broadcast_arrays(np.asarray(x, dtype=complex),
                                     np.asarray(y, dtype=complex),
                                     np.asarray(seed, dtype=complex))
    row = np.empty((m_max + 1,) + x.shape, dtype=complex)
    row[0] = seed
    for m in range(m_max):
        row[m + 1] = y * row[m] / np.sqrt(m + 1)
    yield row
    sqrt_m = np.sqrt(np.arange(1, m_max + 1)).reshape((-1,) + (1,) * x.ndim)
    for n in range(n_max):
        new = np.empty_like(row)
        new[0] = x * row[0]
        new[1:] = x * row[1:] + kappa * sqrt_m * row[:-1]
        new /= np.sqrt(n + 1)
        row = new
        yield row


def hermite2d_diagonals(n_max: int, x, y, kappa, seed=1.0,
                        offsets=None) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(d, strip)`` for every diagonal d = m - n of the normalised table.

    ``strip[i]`` is seed * h_{i,i+d} / sqrt(i! (i+d)!) for d >= 0 and
    seed * h_{i-d,i} / sqrt((i-d)! i!) for d < 0, with all indices <= n_max.
    Along a diagonal the table obeys the three-term recurrence

        h_{n+1,m+1} = (x y + kappa (n + m + 1)) h_{n,m} - kappa^2 n m h_{n-1,m-1},

    a Laguerre-type recurrence that stays accurate where the row recurrence
    of :func:`hermite2d_rows` loses digits (kappa < 0, large |x y|).
    ``offsets`` restricts the output to the listed diagonals.
    """
    x, y, seed = np.broadcast_arrays(np.asarray(x, dtype=complex),
                                     np.asarray(y, dtype=complex),
                                     np.asarray(seed, dtype=complex))
    xy = x * y
    wanted = range(-n_max, n_max + 1) if offsets is None else sorted(set(offsets))
    for d in wanted:
        if abs(d) > n_max:
            raise ValueError(f"diagonal {d} lies outside a table of order {n_max}")
        ad = abs(d)
        length = n_max + 1 - ad
        strip = np.empty((length,) + x.shape, dtype=complex)
        # corner entry: y^d / sqrt(d!) (or x^|d| for d < 0)
        lead = y if d >= 0 else x
        corner = seed.copy()
        for i in range(1, ad + 1):
            corner = corner * lead / np.sqrt(i)
        strip[0] = corner
        if length > 1:
            # h_{1,1+ad} = (x y + kappa (ad + 1)) h_{0,ad} / ad-normalised
            strip[1] = (xy + kappa * (ad + 1)) * corner / np.sqrt(ad + 1)
        for i in range(1, length - 1):
            # n = i, m = i + ad
            n, m = i, i + ad
            strip[i + 1] = ((xy + kappa * (n + m + 1)) * strip[i]
                            - kappa**2 * np.sqrt(n * m) * strip[i - 1]) / np.sqrt((n + 1) * (m + 1))
        yield d, strip
