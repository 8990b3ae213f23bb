"""s-parameterised quasi-probability distributions and s-ordered moments.

Conventions
-----------
* W(alpha, s) is normalised under d^2 alpha / pi:  int W d^2alpha/pi = Tr rho.
  s = 1, 0, -1 give P, Wigner and Q.
* The symbol of |n><m| at ordering s is

      f / sqrt(n! m!) h_{n,m}(f alpha^*, f alpha | -(1+s)/(1-s)) exp(-f |alpha|^2)

  with f = 2 / (1 - s); n pairs with alpha^*.
* An :class:`OrderedMomentArray` ``arr`` stores rho = sum c[n,m] {a^dag^n a^m}_p
  with p = ``arr.s``.  Its distribution at parameter t is
  sum c[n,m] h_{n,m}(alpha^*, alpha | kappa(p, -t)), kappa(a, b) = (b - a) / 2.
"""
from __future__ import annotations

import csv
import io
import math
from fractions import Fraction
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfcinv, eval_genlaguerre, gammaln

from .errors import (ConsistencyError, ConvergenceError, GridCoverageError,
                     PoleError, TruncationError)
from .hermite2d import hermite2d_diagonals, hermite2d_eval, hermite2d_rows
from .states import ClosedFormState, FockDensityMatrix

#: The photon-subtracted thermal formula is written under d^2alpha (explicit 1/pi); our W is pi times it.
SPSTS_PI_FACTOR = math.pi

IMAG_TOL = 1e-9
_EPS = np.finfo(float).eps


def kappa(s: float, t: float) -> float:
    """kappa_{s,t} = (t - s) / 2, the Hermite parameter taking s- to t-ordering."""
    return (t - s) / 2


def tau_from_s(s: float) -> float:
    return (1 - s) / 2


def s_from_tau(tau: float) -> float:
    return 1 - 2 * tau


def _workers() -> int:
    try:
        n = int(os.environ.get("QDEPTH_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _chunked(func, alpha: np.ndarray, chunk: int = 4096):
    """Apply ``func`` to flat chunks of ``alpha``; results concatenated in order."""
    flat = alpha.ravel()
    if flat.size <= chunk:
        return func(flat)
    pieces = [flat[i:i + chunk] for i in range(0, flat.size, chunk)]
    workers = min(_workers(), len(pieces))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(func, pieces))
    else:
        out = [func(p) for p in pieces]
    if isinstance(out[0], tuple):
        return tuple(np.concatenate(parts) for parts in zip(*out))
    return np.concatenate(out)


# -- Fock route ---------------------------------------------------------------

def _check_pole(s: float, pole: float = 1.0):
    if not s < pole:
        raise PoleError(f"s={s:g} is at or beyond the pole s={pole:g}")


def w_fock_element(n: int, m: int, alpha: complex, s: float) -> complex:
    """s-parameterised symbol of the operator |n><m| at the point alpha."""
    _check_pole(s)
    alpha = complex(alpha)
    f = 2 / (1 - s)
    h = hermite2d_eval(n, m, f * alpha.conjugate(), f * alpha, -(1 + s) / (1 - s))
    lognorm = -f * abs(alpha) ** 2 - 0.5 * (math.lgamma(n + 1) + math.lgamma(m + 1))
    return f * h * math.exp(lognorm)


def _fock_symbol(rho: np.ndarray, alpha: np.ndarray, s: float, bound: bool):
    n_max = rho.shape[0] - 1
    f = 2 / (1 - s)
    k = -(1 + s) / (1 - s)
    x, y = f * alpha.conj(), f * alpha
    seed = f * np.exp(-f * np.abs(alpha) ** 2)
    total = np.zeros(alpha.shape, dtype=complex)
    mag = np.zeros(alpha.shape) if bound else None
    used = [d for d in range(-n_max, n_max + 1) if np.any(rho.diagonal(d))]
    for d, strip in hermite2d_diagonals(n_max, x, y, k, seed, offsets=used):
        coef = rho.diagonal(d)
        total += np.tensordot(coef, strip, axes=(0, 0))
        if bound:
            mag += np.tensordot(np.abs(coef), np.abs(strip), axes=(0, 0))
    if not bound:
        return total, None
    # roundoff of a stable recurrence stays proportional to the summands
    return total, 8 * (n_max + 2) * _EPS * mag


def w_eval(state: FockDensityMatrix, alpha, s: float):
    """W(alpha, s) of a Fock-basis operator by summing rho_nm times |n><m| symbols.

    ``alpha`` may be a scalar or an array; the return value matches.
    """
    vals = evaluate(state, alpha, s)
    return float(vals) if np.ndim(vals) == 0 else vals


# -- closed forms -------------------------------------------------------------

def w_closed_form(kind: str, params: dict, alpha, s: float):
    """Exact symbols: vacuum, fock_origin, coherent, thermal, spsts.

    ``spsts`` is returned in its d^2 alpha normalisation,
    including the 1/pi; multiply by :data:`SPSTS_PI_FACTOR` to compare with
    distributions normalised under d^2 alpha / pi.
    """
    alpha = np.asarray(alpha, dtype=complex)
    r2 = np.abs(alpha) ** 2
    if kind == "vacuum":
        _check_pole(s)
        f = 2 / (1 - s)
        out = f * np.exp(-f * r2)
    elif kind == "coherent":
        _check_pole(s)
        f = 2 / (1 - s)
        beta = complex(params.get("beta", 0))
        out = f * np.exp(-f * np.abs(alpha - beta) ** 2)
    elif kind == "fock_origin":
        _check_pole(s)
        if np.any(alpha != 0):
            raise ValueError("fock_origin is only defined at alpha = 0")
        n = int(params["n"])
        val = (-1) ** n * ((s + 1) / 2) ** n * (2 / (1 - s)) ** (n + 1)
        out = np.full(alpha.shape, val)
    elif kind in ("thermal", "spsts"):
        nbar = float(params["nbar"])
        d = 2 * nbar + 1 - s
        if not d > 0:
            raise PoleError(f"s={s:g} is at or beyond the pole s={2 * nbar + 1:g}")
        gauss = np.exp(-2 * r2 / d)
        if kind == "thermal":
            out = 2 / d * gauss
        else:
            slope = (2 * nbar - 1 + s) / d + ((1 - s) / d) ** 2
            offset = (1 - s) / 2 * (2 * nbar / d)
            out = 2 / (math.pi * d) * (slope * r2 + offset) * gauss
    else:
        raise ValueError(f"unknown closed-form kind {kind!r}")
    return float(out) if out.ndim == 0 else out


def _closed_symbol(state: ClosedFormState, alpha: np.ndarray, s: float, bound: bool):
    params = {"nbar": state.nbar, "beta": state.beta}
    vals = np.asarray(w_closed_form(state.kind, params, alpha, s), dtype=float)
    if state.kind == "spsts":
        vals = vals * SPSTS_PI_FACTOR
        if bound:
            nbar = state.nbar
            d = 2 * nbar + 1 - s
            slope = abs((2 * nbar - 1 + s) / d) + ((1 - s) / d) ** 2
            offset = abs((1 - s) / 2 * (2 * nbar / d))
            r2 = np.abs(alpha) ** 2
            mag = 2 / d * (slope * r2 + offset) * np.exp(-2 * r2 / d)
            return vals, 16 * _EPS * mag
    return vals, (16 * _EPS * np.abs(vals) if bound else None)


# -- dispatch -----------------------------------------------------------------

def pole_of(state) -> float:
    return state.pole if isinstance(state, ClosedFormState) else 1.0


def evaluate(state, alpha, s: float, *, with_bound: bool = False):
    """W(alpha, s) for a :class:`FockDensityMatrix` or :class:`ClosedFormState`.

    With ``with_bound=True`` a pair ``(W, noise)`` is returned, where
    ``noise`` bounds the floating-point error of each value.
    """
    alpha = np.asarray(alpha, dtype=complex)
    _check_pole(s, pole_of(state))
    if isinstance(state, ClosedFormState):
        vals, noise = _closed_symbol(state, alpha, s, with_bound)
        return (vals, noise) if with_bound else vals

    rho = state.rho

    def one(chunk):
        w, b = _fock_symbol(rho, chunk, s, with_bound)
        if with_bound:
            return w, b
        return w

    out = _chunked(one, alpha)
    w, noise = out if with_bound else (out, None)
    w = w.reshape(alpha.shape)
    imag_scale = np.maximum(1.0, np.abs(w.real))
    if np.any(np.abs(w.imag) > IMAG_TOL * imag_scale):
        worst = float(np.max(np.abs(w.imag)))
        raise ConsistencyError(f"W has imaginary residue {worst:.3e}; is rho Hermitian?")
    if with_bound:
        return w.real, noise.reshape(alpha.shape)
    return w.real


def origin_value(state, s: float) -> float:
    """W(0, s) from the diagonal alone: f sum_n rho_nn (-(1+s)/(1-s))^n."""
    if isinstance(state, ClosedFormState):
        return float(evaluate(state, 0j, s))
    _check_pole(s)
    f = 2 / (1 - s)
    x = -(1 + s) / (1 - s)
    # Horner, highest power first
    acc = 0.0
    for p in state.diagonal[::-1]:
        acc = acc * x + p
    return f * acc


# -- characteristic-function oracle ---------------------------------------------

def _displacement_radial(rho: np.ndarray, r: np.ndarray) -> dict:
    """A_k(r) with Tr[rho D(r e^{i theta})] = sum_k A_k(r) e^{i k theta}.

    <m|D(xi)|n> = sqrt(p!/(p+d)!) r^d e^{-r^2/2} L_p^{(d)}(r^2) e^{i(m-n)theta}
    times (-1)^d when m < n, where p = min(m, n) and d = |m - n|.
    """
    n_max = rho.shape[0] - 1
    r2 = r**2
    out = {}
    for k in range(-n_max, n_max + 1):
        d = abs(k)
        acc = np.zeros_like(r, dtype=complex)
        for p in range(0, n_max + 1 - d):
            # m - n = k
            m, n = (p + d, p) if k >= 0 else (p, p + d)
            coef = rho[n, m]
            if coef == 0:
                continue
            sign = -1.0 if (k < 0 and d % 2) else 1.0
            mag = np.exp(0.5 * (gammaln(p + 1) - gammaln(p + d + 1)) - r2 / 2)
            acc += coef * sign * mag * r**d * eval_genlaguerre(p, d, r2)
        out[k] = acc
    return out


def w_via_charfn(state: FockDensityMatrix, alpha, s: float, *,
                 tail_tol: float = 1e-8, r_max: float = 60.0):
    """Independent W(alpha, s) from the Fourier transform of Tr[rho D(xi)].

    W(alpha, s) = int d^2xi/pi exp(s|xi|^2/2 + alpha xi^* - alpha^* xi) Tr[rho D(xi)]

    on a polar grid: Gauss-Legendre in the radius, trapezoid in the angle.
    The radius is cut where the integrand has fallen below 1e-10; if it is
    still above ``tail_tol`` at ``r_max`` a :class:`ConvergenceError` is raised.
    """
    _check_pole(s)
    alpha = np.asarray(alpha, dtype=complex)
    rho = state.rho
    n_max = rho.shape[0] - 1
    amax = float(np.max(np.abs(alpha), initial=0.0))

    def tail(radius):
        th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        a = _displacement_radial(rho, np.array([radius]))
        chi = sum(a[k][0] * np.exp(1j * k * th) for k in a)
        return float(np.max(np.abs(chi))) * math.exp(s * radius**2 / 2)

    radius = math.sqrt(2 * math.log(1e10) / (1 - s))
    while tail(radius) > 1e-10:
        radius += 0.5
        if radius > r_max:
            break
    edge = tail(radius)
    if edge > tail_tol:
        raise ConvergenceError(
            f"characteristic-function integrand is {edge:.2e} at the cutoff radius {radius:g}")

    n_r = 2 * (n_max + int(math.ceil(2 * amax * radius))) + 100
    n_t = 2 * (n_max + int(math.ceil(2 * amax * radius))) + 64
    x, wx = np.polynomial.legendre.leggauss(n_r)
    r = radius * (x + 1) / 2
    wr = wx * radius / 2 * r
    th = np.linspace(0, 2 * np.pi, n_t, endpoint=False)
    wt = 2 * np.pi / n_t

    a = _displacement_radial(rho, r)
    ks = np.array(sorted(a))
    amp = np.array([a[k] for k in ks])                 # (K, n_r)
    ang = np.exp(1j * np.outer(ks, th))                # (K, n_t)
    chi = amp.T @ ang                                  # (n_r, n_t)
    weight = (wr * np.exp(s * r**2 / 2))[:, None] * wt * chi / np.pi
    xi = r[:, None] * np.exp(1j * th)[None, :]

    flat = alpha.ravel()
    out = np.empty(flat.shape, dtype=complex)
    for i, al in enumerate(flat):
        phase = np.exp(al * xi.conj() - al.conjugate() * xi)
        out[i] = np.sum(weight * phase)
    out = out.reshape(alpha.shape)
    if np.any(np.abs(out.imag) > 1e-7):
        raise ConsistencyError("characteristic-function quadrature is not real")
    return float(out.real) if out.ndim == 0 else out.real


# -- grids --------------------------------------------------------------------

def default_half_width(state) -> float:
    """2.5 sqrt(2<n> + 1) + |centre|: covers the distribution for s <= 0."""
    return 2.5 * math.sqrt(2 * state.mean_photon + 1) + abs(state.mean_field)


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Square grid centre + [-half_width, half_width]^2 with W(., s) samples.

    ``values[i, j]`` belongs to alpha = centre + x[i] + 1j * x[j].
    """

    center: complex
    half_width: float
    resolution: int
    s: float
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be at least 2")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if self.values is not None:
            v = np.array(self.values, dtype=float)
            if v.shape != (self.resolution, self.resolution):
                raise ValueError("values do not match the resolution")
            if not np.all(np.isfinite(v)):
                raise ValueError("grid values must be finite")
            v.setflags(write=False)
            object.__setattr__(self, "values", v)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.resolution)

    @property
    def spacing(self) -> float:
        return 2 * self.half_width / (self.resolution - 1)

    def nodes(self) -> np.ndarray:
        x = self.axis
        return complex(self.center) + x[:, None] + 1j * x[None, :]

    @classmethod
    def sample(cls, state, s: float, center: complex | None = None,
               half_width: float | None = None, resolution: int = 201) -> "PhaseGrid":
        if center is None:
            center = state.mean_field
        if half_width is None:
            half_width = default_half_width(state)
        g = cls(complex(center), float(half_width), int(resolution), float(s))
        return g.with_values(evaluate(state, g.nodes(), s))

    def with_values(self, values) -> "PhaseGrid":
        return PhaseGrid(self.center, self.half_width, self.resolution, self.s, values)

    def integrate(self, values=None) -> float:
        """Trapezoid estimate of int d^2alpha / pi of ``values`` (default: W)."""
        v = self.values if values is None else values
        w = np.full(self.resolution, self.spacing)
        w[[0, -1]] /= 2
        total = w @ v @ w / math.pi
        return complex(total) if np.iscomplexobj(total) else float(total)

    def boundary_max(self, values=None) -> float:
        v = np.abs(self.values if values is None else values)
        return float(max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re", "im", "w"])
        nodes = self.nodes()
        for a, v in zip(nodes.ravel(), self.values.ravel()):
            w.writerow([format(a.real, ".17g"), format(a.imag, ".17g"), format(v, ".17g")])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, s: float) -> "PhaseGrid":
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != ["re", "im", "w"]:
            raise ValueError("expected header re,im,w")
        data = np.array(rows[1:], dtype=float)
        res = int(round(math.sqrt(len(data))))
        if res * res != len(data):
            raise ValueError("CSV does not describe a square grid")
        re = data[:, 0].reshape(res, res)
        im = data[:, 1].reshape(res, res)
        center = complex((re[0, 0] + re[-1, 0]) / 2, (im[0, 0] + im[0, -1]) / 2)
        hw = (re[-1, 0] - re[0, 0]) / 2
        return cls(center, hw, res, s, data[:, 2].reshape(res, res))


# -- smoothing and trace pairing ----------------------------------------------

def smooth(grid: PhaseGrid, s: float, leak_tol: float = 1e-8) -> PhaseGrid:
    """Gaussian-convolve W(., t) on ``grid`` down to W(., s), s < t.

    Output nodes are the source nodes lying at least one kernel margin
    (kernel mass beyond it < ``leak_tol``) inside the source boundary.
    """
    t = grid.s
    if not s < t:
        raise ValueError(f"smoothing needs s < t, got s={s:g}, t={t:g}")
    if grid.values is None:
        raise ValueError("grid carries no values")
    width = t - s
    margin = float(erfcinv(leak_tol)) * math.sqrt(width / 2)
    x = grid.axis
    keep = np.abs(x) <= grid.half_width - margin + 1e-12 * grid.half_width
    if keep.sum() < 2:
        raise GridCoverageError(
            f"kernel of width t-s={width:g} leaks out of a grid of half width {grid.half_width:g}")
    h = grid.spacing
    wq = np.full(len(x), h)
    wq[[0, -1]] /= 2
    u = x[keep]
    kern = np.exp(-2 * (x[None, :] - u[:, None]) ** 2 / width) * wq[None, :]
    kern /= kern.sum(axis=1, keepdims=True)
    out = kern @ grid.values @ kern.T
    return PhaseGrid(grid.center, float(np.max(np.abs(u))), int(keep.sum()), s, out)


def trace_pair(F, G, s: float, resolution: int = 201, half_width: float | None = None,
               tail_tol: float = 1e-6) -> float:
    """int d^2alpha/pi W_F(alpha, s) W_G(alpha, -s), which equals Tr(F G)."""
    if not abs(s) < 1:
        raise PoleError("trace pairing needs |s| < 1")
    if half_width is None:
        half_width = max(default_half_width(F), default_half_width(G))
    g = PhaseGrid(0j, half_width, resolution, s)
    nodes = g.nodes()
    prod = evaluate(F, nodes, s) * evaluate(G, nodes, -s)
    edge = g.boundary_max(prod)
    if edge > tail_tol:
        raise GridCoverageError(f"integrand is {edge:.2e} on the grid boundary")
    return g.integrate(prod)


# -- ordered moments ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OrderedMomentArray:
    """rho = sum_{n,m} c[n, m] {a^dag^n a^m}_s.

    ``residual`` optionally holds the rounding error of ``c`` (so c + residual
    is the exact value, double-double style); transforms use it and produce it.
    """

    s: float
    c: np.ndarray
    residual: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        c = np.array(self.c, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("coefficient array must be square")
        object.__setattr__(self, "c", c)
        if self.residual is not None:
            r = np.array(self.residual, dtype=complex)
            if r.shape != c.shape:
                raise ValueError("residual does not match the coefficients")
            object.__setattr__(self, "residual", r)

    @property
    def n_max(self) -> int:
        return self.c.shape[0] - 1

    def zero_order(self) -> complex:
        return complex(self.c[0, 0])


def moments_transform(arr: OrderedMomentArray, target_s: float) -> OrderedMomentArray:
    """Re-express the same operator inside target-ordered braces.

    {a^dag^n a^m}_s = sum_j C(n,j) C(m,j) j! kappa^j {a^dag^(n-j) a^(m-j)}_t,
    kappa = (t - s) / 2.
    """
    kap = kappa(arr.s, target_s)
    c = arr.c
    size = c.shape[0]
    if kap == 0:
        return OrderedMomentArray(target_s, c.copy())
    # weights C(n,j) C(m,j) j! kappa^j reach 1e5 already at n = 8; summing
    # exactly and keeping the rounding residual makes s -> t -> s exact to
    # roundoff of the original coefficients
    k = Fraction(kap)
    kpow = [Fraction(1)]
    for _ in range(size):
        kpow.append(kpow[-1] * k)
    res = arr.residual if arr.residual is not None else np.zeros_like(c)
    re = [[Fraction(0)] * size for _ in range(size)]
    im = [[Fraction(0)] * size for _ in range(size)]
    for n, m in zip(*np.nonzero((c != 0) | (res != 0))):
        cr = Fraction(c[n, m].real) + Fraction(res[n, m].real)
        ci = Fraction(c[n, m].imag) + Fraction(res[n, m].imag)
        for j in range(min(n, m) + 1):
            w = math.comb(n, j) * math.comb(m, j) * math.factorial(j) * kpow[j]
            re[n - j][m - j] += w * cr
            im[n - j][m - j] += w * ci
    out = np.empty((size, size), dtype=complex)
    low = np.empty((size, size), dtype=complex)
    for n in range(size):
        for m in range(size):
            hr, hi = float(re[n][m]), float(im[n][m])
            out[n, m] = complex(hr, hi)
            low[n, m] = complex(float(re[n][m] - Fraction(hr)), float(im[n][m] - Fraction(hi)))
    return OrderedMomentArray(target_s, out, low)


def fock_moments(state: FockDensityMatrix, order: float, degree: int) -> OrderedMomentArray:
    """Exact ``order``-ordered coefficients of a Fock-basis operator, up to ``degree``.

    They are the Taylor coefficients of W(alpha, -order) in (alpha^*, alpha):
    the Hermite polynomial part of each |n><m| symbol times the series of
    exp(-f alpha^* alpha).  Requires order > -1.
    """
    s = -order
    _check_pole(s)
    f = 2 / (1 - s)
    k = -(1 + s) / (1 - s)
    rho = state.rho
    n_max = rho.shape[0] - 1
    poly = np.zeros((degree + 1, degree + 1), dtype=complex)
    for n in range(n_max + 1):
        for m in range(n_max + 1):
            if rho[n, m] == 0:
                continue
            pref = rho[n, m] * f / math.sqrt(math.factorial(n) * math.factorial(m))
            for j in range(min(n, m) + 1):
                a, b = n - j, m - j
                if a > degree or b > degree:
                    continue
                poly[a, b] += (pref * math.comb(n, j) * math.comb(m, j) * math.factorial(j)
                               * k**j * f ** (a + b))
    out = np.zeros_like(poly)
    q = np.arange(degree + 1)
    series = np.array([(-f) ** i / math.factorial(i) for i in q])
    for a in range(degree + 1):
        for b in range(degree + 1):
            if poly[a, b] == 0:
                continue
            span = degree + 1 - max(a, b)
            idx = np.arange(span)
            out[a + idx, b + idx] += poly[a, b] * series[:span]
    return OrderedMomentArray(order, out)


def symbol_eval(arr: OrderedMomentArray, alpha, t: float):
    """W(alpha, t) = sum c[n,m] h_{n,m}(alpha^*, alpha | kappa(arr.s, -t))."""
    alpha = np.asarray(alpha, dtype=complex)
    kap = kappa(arr.s, -t)
    n = arr.n_max
    norms = np.exp(0.5 * gammaln(np.arange(n + 1) + 1))
    total = np.zeros(alpha.shape, dtype=complex)
    for i, row in enumerate(hermite2d_rows(n, n, alpha.conj(), alpha, kap)):
        weights = arr.c[i] * norms[i] * norms
        total += np.tensordot(weights, row, axes=(0, 0))
    return complex(total) if total.ndim == 0 else total


def extract_coefficients(state, s: float, t: float, n_max: int,
                         grid: PhaseGrid | None = None) -> OrderedMomentArray:
    """(-s)-ordered coefficients of ``state`` by quadrature of W(., t), t > s.

    rho_nm = 1/(n! m!) kappa^-(n+m+1) int d^2alpha/pi exp(-|alpha|^2/kappa)
             h_{n,m}(alpha^*, alpha | -kappa) W(alpha, t),   kappa = (t - s)/2.
    """
    if not t > s:
        raise ValueError(f"coefficient extraction needs t > s, got s={s:g}, t={t:g}")
    kap = kappa(s, t)
    if grid is None:
        hw = default_half_width(state) + 3 * math.sqrt(kap * (n_max + 1))
        grid = PhaseGrid(0j, hw, 241, t)
    if grid.values is not None and grid.s == t:
        w = grid.values
    else:
        w = evaluate(state, grid.nodes(), t)
    alpha = grid.nodes()
    integrand = np.exp(-np.abs(alpha) ** 2 / kap) * w
    edge = grid.boundary_max(integrand)
    if edge > 1e-10:
        raise GridCoverageError(f"extraction integrand is {edge:.2e} on the grid boundary")
    root = math.sqrt(kap)
    out = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    rows = hermite2d_rows(n_max, n_max, alpha.conj() / root, alpha / root, -1.0)
    for n, row in enumerate(rows):
        for m in range(n_max + 1):
            integral = grid.integrate(row[m] * integrand)
            scale = kap ** (-(n + m) / 2 - 1) / math.sqrt(math.factorial(n) * math.factorial(m))
            out[n, m] = scale * integral
    return OrderedMomentArray(-s, out)


def orthogonality_integral(n: int, m: int, k: int, l: int, kap: float,
                           half_width: float = 8.0, resolution: int = 321) -> complex:
    """1/(n! m!) (-1/kappa)^(n+m+1) int d^2alpha/pi e^{|alpha|^2/kappa}
    h_{n,m}(alpha^*, alpha|kappa) h_{k,l}(alpha^*, alpha|kappa), kappa < 0."""
    if not kap < 0:
        raise ValueError("orthogonality weight needs kappa < 0")
    g = PhaseGrid(0j, half_width, resolution, 0.0)
    a = g.nodes()
    top = max(n, m, k, l)
    table = np.array(list(hermite2d_rows(top, top, a.conj(), a, kap)))
    norm = np.sqrt([math.factorial(i) for i in range(top + 1)])
    h1 = table[n, m] * norm[n] * norm[m]
    h2 = table[k, l] * norm[k] * norm[l]
    integ = np.exp(np.abs(a) ** 2 / kap) * h1 * h2
    pref = (-1 / kap) ** (n + m + 1) / (math.factorial(n) * math.factorial(m))
    return pref * g.integrate(integ)


# -- ladder lemmas ------------------------------------------------------------

def apply_ladder(arr: OrderedMomentArray, side: str, op: str,
                 n_max: int | None = None) -> OrderedMomentArray:
    """Multiply the operator by a or a^dag from the left or right.

    With braces of ordering p = arr.s (variables x = a^dag, y = a):

        a rho      -> (y + (1+p)/2 d/dx) rho
        rho a      -> (y - (1-p)/2 d/dx) rho
        a^dag rho  -> (x - (1-p)/2 d/dy) rho
        rho a^dag  -> (x + (1+p)/2 d/dy) rho

    The array grows by one; pass ``n_max`` to cap it, which raises
    :class:`TruncationError` if a nonzero coefficient would be dropped.
    """
    p = arr.s
    lam = {("left", "a"): (1 + p) / 2, ("right", "a"): -(1 - p) / 2,
           ("left", "a_dagger"): -(1 - p) / 2, ("right", "a_dagger"): (1 + p) / 2}
    try:
        coef = lam[(side, op)]
    except KeyError:
        raise ValueError(f"unknown ladder action side={side!r} op={op!r}") from None
    c = arr.c
    size = c.shape[0]
    out = np.zeros((size + 1, size + 1), dtype=complex)
    idx = np.arange(1, size)
    if op == "a":
        out[:size, 1:] += c                                   # times y
        out[:size - 1, :size] += coef * idx[:, None] * c[1:, :]   # d/dx
    else:
        out[1:, :size] += c                                   # times x
        out[:size, :size - 1] += coef * idx[None, :] * c[:, 1:]   # d/dy
    if n_max is not None and n_max < size:
        if np.any(out[n_max + 1:, :] != 0) or np.any(out[:, n_max + 1:] != 0):
            raise TruncationError("ladder action needs more headroom than n_max")
        out = out[: n_max + 1, : n_max + 1]
    return OrderedMomentArray(p, out)
