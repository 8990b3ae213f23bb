"""Nonclassicality depth and degree from zeros of W(beta, s).

If W(beta_m, s_m) = 0 and W(., s_m) is still an acceptable (nonnegative,
contained) distribution, the depth is tau_m = (1 - s_m) / 2.  Two routes find
s_m:

* :func:`depth_by_origin_roots` uses W(0, s) = f P(x), P(x) = sum_n rho_nn x^n,
  x = -(1 + s)/(1 - s), and maps the non-positive real roots of P back to s.
* :func:`depth_by_global_scan` bisects on s for the edge of the set where the
  grid minimum of W(., s) is nonnegative.  Gaussian smoothing preserves
  positivity, so that set is an interval [s_lower, s_m].
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import PoleError
from .phasespace import evaluate, origin_value, pole_of, tau_from_s
from .states import ClosedFormState, FockDensityMatrix

log = logging.getLogger(__name__)

STATUSES = ("conclusive", "inconclusive_no_zero", "inconclusive_singular", "classical")
METHODS = ("origin_polynomial", "global_bisection")
REPORT_KEYS = ("s_m", "tau_m", "degree", "witness_re", "witness_im", "method", "status",
               "min_value_at_sm")


@dataclass(frozen=True)
class DepthConfig:
    zero_tol: float = 1e-9
    neg_tol: float = 1e-9
    s_lower: float = -1.0
    s_upper: float = 1 - 1e-6
    bisection_tol: float = 1e-6
    multiplicity_cluster_tol: float = 1e-6
    # grid; None means derived from the state's energy and centre
    center: complex | None = None
    half_width: float | None = None
    resolution: int = 101
    # local refinement around interior minima
    zoom_levels: int = 7
    zoom_candidates: int = 4
    support_tol: float = 1e-8
    # how far beyond s_upper a vanishing interior minimum may extrapolate
    boundary_window: float = 5e-3

    def __post_init__(self):
        if not self.s_lower < self.s_upper:
            raise ValueError("s_lower must be below s_upper")
        for name in ("zero_tol", "neg_tol", "bisection_tol", "multiplicity_cluster_tol",
                     "support_tol", "boundary_window"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.resolution < 3:
            raise ValueError("resolution must be at least 3")

    def with_overrides(self, **kw) -> "DepthConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class DepthReport:
    s_m: float | None
    tau_m: float | None
    degree: int | None
    witness: complex | None
    method: str
    status: str
    min_value_at_sm: float | None = None
    boundary_limited: bool = False
    diagnostics: tuple = field(default=())

    @property
    def conclusive(self) -> bool:
        return self.status == "conclusive"

    def to_dict(self) -> dict:
        w = self.witness
        return {
            "s_m": self.s_m,
            "tau_m": self.tau_m,
            "degree": self.degree,
            "witness_re": None if w is None else w.real,
            "witness_im": None if w is None else w.imag,
            "method": self.method,
            "status": self.status,
            "min_value_at_sm": self.min_value_at_sm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DepthReport":
        missing = set(REPORT_KEYS) - set(d)
        if missing:
            raise ValueError(f"report lacks keys {sorted(missing)}")
        if d["method"] not in METHODS or d["status"] not in STATUSES:
            raise ValueError("unknown method or status")
        w = None
        if d["witness_re"] is not None:
            w = complex(d["witness_re"], d["witness_im"] or 0.0)
        return cls(d["s_m"], d["tau_m"], d["degree"], w, d["method"], d["status"],
                   d["min_value_at_sm"])


def _report(method, status, s_m=None, degree=None, witness=None, min_value=None,
            boundary=False, diagnostics=()):
    tau = None if s_m is None else tau_from_s(s_m)
    return DepthReport(s_m, tau, degree, witness, method, status, min_value, boundary,
                       tuple(diagnostics))


# -- grid minimisation ----------------------------------------------------------

def _grid_geometry(state, cfg: DepthConfig) -> tuple[complex, float]:
    center = state.mean_field if cfg.center is None else complex(cfg.center)
    if cfg.half_width is not None:
        return center, float(cfg.half_width)
    # wide enough for the Q function (s = -1) to decay below support_tol
    return center, abs(center) + 3 * math.sqrt(2 * state.mean_photon + 2) + 2


@dataclass
class _Scan:
    minimum: float
    argmin: complex
    boundary: float
    finite: bool
    violation: bool
    witness: complex | None
    minima: list            # refined interior local minima (value, alpha)
    argmin_on_edge: bool


def _local_minima(values: np.ndarray, noise: np.ndarray) -> list[tuple[int, int]]:
    """Interior nodes no larger than their 8 neighbours, with a dip above noise."""
    v = values
    core = v[1:-1, 1:-1]
    neigh = np.stack([v[1 + di:v.shape[0] - 1 + di, 1 + dj:v.shape[1] - 1 + dj]
                      for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj])
    is_min = np.all(core <= neigh, axis=0)
    dip = neigh.max(axis=0) - core
    is_min &= dip > 10 * noise[1:-1, 1:-1] + 1e-300
    idx = np.argwhere(is_min) + 1
    order = np.argsort(v[idx[:, 0], idx[:, 1]])
    return [tuple(i) for i in idx[order]]


def _scan(state, s: float, cfg: DepthConfig, *, noise_aware: bool,
          stop_on_violation: bool = False) -> _Scan:
    # overflow near the pole shows up as non-finite samples, which count as failures
    with np.errstate(over="ignore", invalid="ignore"):
        return _scan_grid(state, s, cfg, noise_aware, stop_on_violation)


def _scan_grid(state, s, cfg, noise_aware, stop_on_violation) -> _Scan:
    """Minimum of W(., s) over the coverage grid plus zoomed local refinements.

    A node violates nonnegativity when W < -threshold, the threshold being
    ``neg_tol`` or, with ``noise_aware``, the smaller of ``neg_tol`` and the
    node's roundoff bound (this resolves zeros of high order).
    """
    center, hw = _grid_geometry(state, cfg)

    def threshold(nz):
        return np.minimum(nz, cfg.neg_tol) if noise_aware else np.full_like(nz, cfg.neg_tol)

    # A finite Fock expansion has a P symbol made of derivatives of a delta
    # at the origin; as s -> 1 its structure shrinks like sqrt(tau).  Nested
    # grids around 0 (odd resolution, so 0 is a node) resolve it.  They are
    # cheap, so they go first and may settle a violation on their own.
    axes = []
    if isinstance(state, FockDensityMatrix):
        floor = min(2 * math.sqrt(max(tau_from_s(s), 0.0) * (state.n_max + 1)), 1e-3 * hw)
        width = hw / 10
        while width > floor:
            axes.append((0j, np.linspace(-width, width, 41)))
            width /= 10
    axes.append((center, np.linspace(-hw, hw, cfg.resolution)))

    grids = []
    finite, violation, witness = True, False, None
    best_val, best_at = math.inf, 0j
    boundary, on_edge = math.nan, False
    for c0, ax in axes:
        gn = c0 + ax[:, None] + 1j * ax[None, :]
        gw, gb = evaluate(state, gn, s, with_bound=True)
        grids.append((ax, gn, gw, gb))
        finite &= bool(np.all(np.isfinite(gw)))
        k = int(np.argmin(gw))
        if gw.flat[k] < best_val:
            best_val, best_at = float(gw.flat[k]), complex(gn.flat[k])
        if not violation and np.any(gw + threshold(gb) < 0):
            violation, witness = True, complex(gn.flat[k])
        if (violation or not finite) and stop_on_violation:
            return _Scan(best_val, best_at, boundary, finite, violation, witness, [], on_edge)
    gw = grids[-1][2]
    boundary = float(max(np.abs(gw[0]).max(), np.abs(gw[-1]).max(),
                         np.abs(gw[:, 0]).max(), np.abs(gw[:, -1]).max()))
    i, j = np.unravel_index(int(np.argmin(gw)), gw.shape)
    on_edge = i in (0, gw.shape[0] - 1) or j in (0, gw.shape[1] - 1)

    minima = []
    cand = []
    if not (violation and stop_on_violation):
        for gx, gn, gw, gb in grids:
            h = gx[1] - gx[0]
            cand += [(float(gw[c]), complex(gn[c]), h) for c in _local_minima(gw, gb)]
        cand.sort(key=lambda t: t[0])
        cand = cand[: cfg.zoom_candidates]
        zoom = np.linspace(-1, 1, 21)
        pattern = zoom[:, None] + 1j * zoom[None, :]
        cs = np.array([c for _, c, _ in cand], dtype=complex)
        steps = np.array([h for _, _, h in cand])
        for _ in range(cfg.zoom_levels if len(cand) else 0):
            loc = cs[:, None, None] + steps[:, None, None] * pattern
            lw, ln = evaluate(state, loc, s, with_bound=True)
            finite &= bool(np.all(np.isfinite(lw)))
            k = int(np.argmin(lw))
            if lw.flat[k] < best_val:
                best_val, best_at = float(lw.flat[k]), complex(loc.flat[k])
            bad = lw + threshold(ln) < 0
            if bad.any() and not violation:
                violation = True
                witness = complex(loc.flat[int(np.argmin(np.where(bad, lw, np.inf)))])
            if violation and stop_on_violation:
                break
            flat = lw.reshape(len(cs), -1).argmin(axis=1)
            cs = loc.reshape(len(cs), -1)[np.arange(len(cs)), flat]
            steps = steps / 10
        if not (violation and stop_on_violation):
            minima = [(float(v), complex(c)) for v, c in zip(evaluate(state, cs, s), cs)]
    return _Scan(best_val, best_at, boundary, finite, violation, witness, minima, on_edge)


def check_quasiclassical(state, s: float, cfg: DepthConfig | None = None) -> tuple[bool, float]:
    """Is W(., s) an acceptable classical density on the coverage grid?

    True iff every sample is finite, the minimum (grid plus local
    refinement) is >= -neg_tol, and the grid boundary holds less than
    ``support_tol``.  Returns ``(ok, minimum)``.
    """
    cfg = cfg or DepthConfig()
    scan = _scan(state, s, cfg, noise_aware=False)
    ok = scan.finite and scan.minimum >= -cfg.neg_tol and scan.boundary < cfg.support_tol
    if scan.boundary >= cfg.support_tol:
        log.info("W(., %g) reaches %.2e on the grid boundary", s, scan.boundary)
    return bool(ok), scan.minimum


# -- origin route -------------------------------------------------------------

def origin_scan(state, s_values) -> list[tuple[float, float]]:
    """(s, W(0, s)) pairs from the diagonal reduction."""
    return [(float(s), origin_value(state, s)) for s in s_values]


def s_from_root(x: float) -> float:
    """Inverse of x = -(1 + s)/(1 - s)."""
    return (x + 1) / (x - 1)


def root_from_s(s: float) -> float:
    return -(1 + s) / (1 - s)


def _root_clusters(coeffs: np.ndarray, tol: float) -> list[tuple[complex, int]]:
    """Roots of sum_n coeffs[n] x^n grouped into (centroid, multiplicity)."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if len(c) <= 1:
        return []
    roots = np.roots(c[::-1])
    roots = sorted(roots, key=lambda z: (z.real, z.imag))
    clusters: list[list[complex]] = []
    for z in roots:
        for cl in clusters:
            if any(abs(z - w) <= tol * max(1.0, abs(w)) for w in cl):
                cl.append(z)
                break
        else:
            clusters.append([z])
    return [(complex(np.mean(cl)), len(cl)) for cl in clusters]


def _real_nonpositive(clusters, tol: float = 1e-8):
    out = []
    for z, mult in clusters:
        scale = max(1.0, abs(z))
        if abs(z.imag) < tol * scale and z.real <= 1e-10:
            x = 0.0 if abs(z.real) <= 1e-10 else z.real
            out.append((x, mult))
    return out


def depth_by_origin_roots(state, cfg: DepthConfig | None = None) -> DepthReport:
    """Depth from the non-positive real roots of P(x) = sum_n rho_nn x^n."""
    cfg = cfg or DepthConfig()
    method = "origin_polynomial"
    if isinstance(state, ClosedFormState):
        return _closed_origin(state, cfg)
    diag = state.diagonal
    if not np.any(diag != 0):
        return _report(method, "inconclusive_singular", diagnostics=["zero operator"])
    clusters = _root_clusters(diag, cfg.multiplicity_cluster_tol)
    cands = []
    for x, mult in _real_nonpositive(clusters):
        s = s_from_root(x)
        if cfg.s_lower - 1e-12 <= s <= cfg.s_upper:
            cands.append((max(s, cfg.s_lower), x, mult))
    cands.sort(reverse=True)
    notes = []
    for s, x, mult in cands:
        ok, mn = check_quasiclassical(state, s, cfg)
        if ok:
            return _report(method, "conclusive", s, mult, 0j, mn,
                           diagnostics=[f"root x={x:.6g} of multiplicity {mult}"])
        notes.append(f"root x={x:.6g} -> s={s:.6g} fails the quasi-classical check (min {mn:.3e})")
    if cands:
        return _report(method, "inconclusive_no_zero", diagnostics=notes +
                       ["no origin zero is quasi-classical; an off-origin zero may exist"])
    ok, mn = check_quasiclassical(state, cfg.s_upper, cfg)
    if ok:
        return _report(method, "classical", cfg.s_upper, None, None, mn, boundary=True,
                       diagnostics=["no root of P in (-inf, 0]; quasi-classical up to s_upper"])
    return _report(method, "inconclusive_no_zero", diagnostics=[
        "no root of P in (-inf, 0] but W(., s_upper) is not quasi-classical"])


def _closed_origin(state: ClosedFormState, cfg: DepthConfig) -> DepthReport:
    """Closed forms: locate sign changes of W(0, s) on a fine s sweep."""
    method = "origin_polynomial"
    top = min(cfg.s_upper, pole_of(state) - 1e-9)
    ss = np.linspace(cfg.s_lower, top, 2001)
    g = np.array([origin_value(state, s) for s in ss])
    # sign changes only: exact zeros here are underflow of a positive Gaussian
    roots = [brentq(lambda s: origin_value(state, s), a, b, xtol=1e-14)
             for a, b, ga, gb in zip(ss[:-1], ss[1:], g[:-1], g[1:]) if ga * gb < 0]
    for s in sorted(roots, reverse=True):
        ok, mn = check_quasiclassical(state, s, cfg)
        if ok:
            return _report(method, "conclusive", s, degree_estimate(state, 0j, s, cfg), 0j, mn)
    ok, mn = check_quasiclassical(state, top, cfg)
    if ok and not roots:
        s_star = _extrapolated_zero(lambda s: origin_value(state, s), top, cfg)
        if s_star is not None:
            return _report(method, "conclusive", top, None, 0j, mn, boundary=True, diagnostics=[
                f"W(0, s) extrapolates to zero at s={s_star:.6g} just above s_upper"])
        return _report(method, "classical", top, None, None, mn, boundary=True,
                       diagnostics=["W(0, s) has no zero below s_upper"])
    return _report(method, "inconclusive_no_zero",
                   diagnostics=["closed form: no quasi-classical zero of W(0, s)"])


# -- global route -------------------------------------------------------------

def depth_by_global_scan(state, cfg: DepthConfig | None = None) -> DepthReport:
    """Bisect on s for the edge of {s : min W(., s) >= 0}."""
    cfg = cfg or DepthConfig()
    method = "global_bisection"
    pole = pole_of(state)
    if cfg.s_upper >= pole:
        return _report(method, "inconclusive_singular",
                       diagnostics=[f"state has a pole at s={pole:g} <= s_upper"])

    def feasible(s):
        sc = _scan(state, s, cfg, noise_aware=True, stop_on_violation=True)
        return sc.finite and not sc.violation

    # overflow means a singular symbol, which is not an acceptable density
    top = _scan(state, cfg.s_upper, cfg, noise_aware=True)
    if top.finite and not top.violation:
        return _boundary_report(state, cfg, top)
    if not feasible(cfg.s_lower):
        return _report(method, "inconclusive_no_zero",
                       diagnostics=[f"W(., {cfg.s_lower:g}) is already negative"])

    lo, hi = cfg.s_lower, cfg.s_upper
    while hi - lo > cfg.bisection_tol:
        mid = (lo + hi) / 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    at_hi = _scan(state, hi, cfg, noise_aware=True, stop_on_violation=True)
    notes = [f"bisection bracket [{lo:.9g}, {hi:.9g}]"]
    if at_hi.argmin_on_edge:
        notes.append("grid too coarse: argmin on the grid boundary")

    s_m, witness = lo, at_hi.witness
    g0 = origin_value(state, lo)
    if abs(g0) < cfg.zero_tol:
        witness = 0j
    elif witness is not None:
        wlo = float(evaluate(state, witness, lo))
        whi = float(evaluate(state, witness, hi))
        if wlo >= 0 > whi:
            s_m = brentq(lambda s: float(evaluate(state, witness, s)), lo, hi, xtol=1e-15)
        elif abs(wlo) >= cfg.zero_tol:
            notes.append(f"witness value {wlo:.3e} at s_m is not below zero_tol")

    ok, mn = check_quasiclassical(state, s_m, cfg)
    value = float(evaluate(state, witness, s_m)) if witness is not None else math.inf
    if not ok or abs(value) >= cfg.zero_tol:
        notes.append(f"quasi-classical={ok}, |W(beta_m, s_m)|={abs(value):.3e}")
        return _report(method, "inconclusive_no_zero", s_m, None, witness, mn, diagnostics=notes)
    degree = degree_estimate(state, witness, s_m, cfg)
    if witness != 0:
        notes.append("degree measured at an off-origin witness")
    return _report(method, "conclusive", s_m, degree, witness, mn, diagnostics=notes)


def _boundary_report(state, cfg: DepthConfig, top: _Scan) -> DepthReport:
    """W(., s_upper) is still nonnegative: classical unless an interior
    minimum is heading to zero just past s_upper."""
    method = "global_bisection"
    s_up = cfg.s_upper
    ok, mn = check_quasiclassical(state, s_up, cfg)
    notes = [f"feasible up to s_upper={s_up:g}; result is boundary-limited"]
    if not ok:
        notes.append("W(., s_upper) fails the support/finiteness check")
        return _report(method, "inconclusive_no_zero", s_up, None, None, mn, True, notes)
    for value, beta in top.minima:
        s_star = _extrapolated_zero(lambda s: float(evaluate(state, beta, s)), s_up, cfg)
        if s_star is not None:
            notes.append(f"interior minimum at beta={beta:.4g} extrapolates to zero at s={s_star:.6g}")
            return _report(method, "conclusive", s_up, None, beta, mn, True, notes)
    return _report(method, "classical", s_up, None, None, mn, True, notes)


def _extrapolated_zero(g, s_up: float, cfg: DepthConfig) -> float | None:
    """Linear extrapolation of a decreasing g to zero within boundary_window above s_up."""
    h = min(1e-3, (s_up - cfg.s_lower) / 10)
    g_up = g(s_up)
    slope = (g_up - g(s_up - h)) / h
    if slope >= 0 or g_up <= 0:
        return None
    s_star = s_up - g_up / slope
    return s_star if s_star <= s_up + cfg.boundary_window else None


def analyze_depth(state, cfg: DepthConfig | None = None):
    """Run both routes; returns ``(selected, origin_report, global_report)``.

    The origin route wins when conclusive, otherwise the global one.
    """
    cfg = cfg or DepthConfig()
    origin = depth_by_origin_roots(state, cfg)
    glob = depth_by_global_scan(state, cfg)
    chosen = origin if origin.conclusive else glob
    return chosen, origin, glob


# -- degree -------------------------------------------------------------------

@lru_cache(maxsize=None)
def _fd_weights(order: int, half: int) -> tuple:
    """Central finite-difference weights for the ``order``-th derivative on the
    integer nodes -half..half (exact rationals, Fornberg's recursion)."""
    nodes = list(range(-half, half + 1))
    n = len(nodes)
    c = [[[Fraction(0)] * (order + 1) for _ in range(n)] for _ in range(n)]
    c[0][0][0] = Fraction(1)
    c1 = Fraction(1)
    for i in range(1, n):
        c2 = Fraction(1)
        for j in range(i):
            c3 = Fraction(nodes[i] - nodes[j])
            c2 *= c3
            for k in range(min(i, order) + 1):
                prev = c[i - 1][j][k]
                lower = c[i - 1][j][k - 1] if k else Fraction(0)
                c[i][j][k] = (nodes[i] * prev - k * lower) / c3
        for k in range(min(i, order) + 1):
            lower = c[i - 1][i - 1][k - 1] if k else Fraction(0)
            c[i][i][k] = c1 / c2 * (k * lower - nodes[i - 1] * c[i - 1][i - 1][k])
        c1 = c2
    return tuple(float(c[n - 1][j][order]) for j in range(n))


def degree_estimate(state, beta: complex, s_m: float, cfg: DepthConfig | None = None,
                    method: str = "auto") -> int | None:
    """Order of the zero of s -> W(beta, s) at s_m.

    ``multiplicity``: multiplicity of the root x = -(1+s_m)/(1-s_m) of the
    diagonal polynomial (Fock states, beta = 0 only).
    ``finite_difference``: smallest k <= 8 whose Taylor term |g^(k)| h^k / k!
    (17-point central stencil, h = 1e-3) exceeds 1e-4 of the largest one.
    ``auto`` picks the first when it applies.  Returns None when unresolved.
    """
    cfg = cfg or DepthConfig()
    beta = complex(beta)
    if method == "auto":
        method = ("multiplicity" if isinstance(state, FockDensityMatrix) and beta == 0
                  else "finite_difference")
    if method == "multiplicity":
        if not isinstance(state, FockDensityMatrix) or beta != 0:
            raise ValueError("multiplicity degree needs a Fock-basis state at beta = 0")
        x0 = root_from_s(s_m)
        tol = cfg.multiplicity_cluster_tol
        for z, mult in _root_clusters(state.diagonal, tol):
            if abs(z - x0) <= max(tol * max(1.0, abs(x0)), 1e-10):
                return mult
        return None
    if method != "finite_difference":
        raise ValueError(f"unknown degree method {method!r}")

    g0 = float(evaluate(state, beta, s_m))
    if abs(g0) >= cfg.zero_tol:
        raise ValueError(f"W(beta, s_m) = {g0:.3e} is not a zero")
    h, half = 1e-3, 8
    if s_m + half * h >= pole_of(state):
        log.warning("finite-difference stencil reaches the pole; degree unresolved")
        return None
    samples = np.array([float(evaluate(state, beta, s_m + j * h))
                        for j in range(-half, half + 1)])
    terms = []
    for k in range(1, 9):
        deriv = float(np.dot(_fd_weights(k, half), samples)) / h**k
        terms.append(abs(deriv) * h**k / math.factorial(k))
    top = max(terms)
    if top == 0:
        return None
    for k, t in enumerate(terms, start=1):
        if t > 1e-4 * top:
            return k
    return None


__all__ = ["DepthConfig", "DepthReport", "analyze_depth", "check_quasiclassical",
           "degree_estimate", "depth_by_global_scan", "depth_by_origin_roots",
           "origin_scan", "root_from_s", "s_from_root", "PoleError"]
