"""Single-mode states as truncated Fock-basis density matrices.

Every constructor takes an explicit cutoff ``n_max`` and refuses to build a
state whose probability tail beyond the cutoff exceeds ``TAIL_TOL``.  Photon
addition and subtraction return unnormalised operators; call
:func:`normalize` to rescale.

Thermal, coherent and single-photon-subtracted thermal states also have
exact phase-space symbols.  :class:`ClosedFormState` describes those; the
numbers themselves live in :mod:`qdepth.phasespace`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.stats import poisson

from .errors import ConfigError, TruncationError, TruncationWarning

TAIL_TOL = 1e-10
LEAK_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class FockDensityMatrix:
    """rho[n, m] = <n| rho |m> on the truncated space {|0>, ..., |n_max>}.

    ``leak`` records the trace lost through the cutoff by the operation that
    produced this matrix (zero for exact constructions).
    """

    rho: np.ndarray
    normalized: bool = True
    leak: float = 0.0

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {rho.shape}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def n_max(self) -> int:
        return self.rho.shape[0] - 1

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    @property
    def diagonal(self) -> np.ndarray:
        return self.rho.diagonal().real.copy()

    @property
    def mean_photon(self) -> float:
        """Tr(rho a^dag a) / Tr(rho)."""
        p = self.diagonal
        return float(np.dot(np.arange(len(p)), p) / p.sum())

    @property
    def mean_field(self) -> complex:
        """Tr(rho a) / Tr(rho), the centre of the phase-space distribution."""
        n = np.arange(1, self.n_max + 1)
        # Tr(rho a) = sum_n sqrt(n) rho[n, n-1]
        return complex(np.sum(np.sqrt(n) * self.rho.diagonal(-1)) / self.trace)

    def is_diagonal(self, tol: float = 0.0) -> bool:
        off = self.rho - np.diag(self.rho.diagonal())
        return bool(np.max(np.abs(off), initial=0.0) <= tol)

    def __repr__(self):
        return (f"FockDensityMatrix(n_max={self.n_max}, trace={self.trace:.6g}, "
                f"normalized={self.normalized})")


@dataclass(frozen=True)
class ClosedFormState:
    """A state whose s-parameterised symbol is known exactly.

    kind: ``vacuum``, ``coherent`` (``beta``), ``thermal`` (``nbar``) or
    ``spsts`` (``nbar``; the unnormalised a rho_th a^dag).
    """

    kind: str
    nbar: float = 0.0
    beta: complex = 0j

    KINDS = ("vacuum", "coherent", "thermal", "spsts")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown closed-form kind {self.kind!r}")
        if self.nbar < 0:
            raise ConfigError("nbar must be non-negative")
        if self.kind == "spsts" and self.nbar == 0:
            raise ConfigError("photon subtraction from the vacuum gives the zero operator")

    @property
    def pole(self) -> float:
        """Smallest s at which the symbol is singular."""
        if self.kind in ("thermal", "spsts"):
            return 2 * self.nbar + 1
        return 1.0

    @property
    def trace(self) -> float:
        return self.nbar if self.kind == "spsts" else 1.0

    @property
    def mean_photon(self) -> float:
        return {"vacuum": 0.0, "coherent": abs(self.beta) ** 2,
                "thermal": self.nbar, "spsts": 2 * self.nbar}[self.kind]

    @property
    def mean_field(self) -> complex:
        return complex(self.beta) if self.kind == "coherent" else 0j


def _check_cutoff(n: int, n_max: int):
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if n < 0:
        raise ValueError("photon number must be non-negative")
    if n > n_max:
        raise TruncationError(f"|{n}> does not fit below n_max={n_max}")


def make_fock(n: int, n_max: int) -> FockDensityMatrix:
    _check_cutoff(n, n_max)
    rho = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    rho[n, n] = 1.0
    return FockDensityMatrix(rho)


def coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    """Fock amplitudes e^{-|alpha|^2/2} alpha^n / sqrt(n!), untruncated-normalised."""
    alpha = complex(alpha)
    psi = np.empty(n_max + 1, dtype=complex)
    psi[0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, n_max + 1):
        psi[n] = psi[n - 1] * alpha / math.sqrt(n)
    return psi


def make_coherent(alpha: complex, n_max: int) -> FockDensityMatrix:
    mu = abs(complex(alpha)) ** 2
    tail = poisson.sf(n_max, mu) if mu > 0 else 0.0
    if tail >= TAIL_TOL:
        need = int(poisson.isf(TAIL_TOL, mu)) + 1
        raise TruncationError(
            f"coherent state |alpha|={abs(alpha):.4g} leaks {tail:.2e} above "
            f"n_max={n_max}; need n_max >= {need}")
    psi = coherent_amplitudes(alpha, n_max)
    rho = np.outer(psi, psi.conj())
    return FockDensityMatrix(rho / np.trace(rho).real)


def make_thermal(nbar: float, n_max: int) -> FockDensityMatrix:
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    if nbar == 0:
        return make_fock(0, n_max)
    ratio = nbar / (1 + nbar)
    tail = ratio ** (n_max + 1)
    if tail >= TAIL_TOL:
        need = math.ceil(math.log(TAIL_TOL) / math.log(ratio))
        raise TruncationError(
            f"thermal state nbar={nbar:g} leaks {tail:.2e} above n_max={n_max}; "
            f"need n_max >= {need}")
    p = ratio ** np.arange(n_max + 1) / (1 + nbar)
    return FockDensityMatrix(np.diag(p / p.sum()))


def _leak_warning(leak: float, what: str):
    if leak > LEAK_TOL:
        warnings.warn(f"{what}: {leak:.2e} of the trace leaked through the cutoff",
                      TruncationWarning, stacklevel=3)


def _ladder_weights(n_max: int) -> np.ndarray:
    """sqrt(n m) for n, m = 1..n_max; exact integers on the diagonal."""
    k = np.arange(1, n_max + 1, dtype=float)
    return np.sqrt(np.outer(k, k))


def photon_add(state: FockDensityMatrix) -> FockDensityMatrix:
    """Unnormalised a^dag rho a on the same cutoff."""
    if state.n_max < 1:
        raise TruncationError("photon addition needs n_max >= 1")
    rho = state.rho
    out = np.zeros_like(rho)
    out[1:, 1:] = _ladder_weights(state.n_max) * rho[:-1, :-1]
    # a^dag |n_max> falls off the truncated space
    leak = (state.n_max + 1) * rho[-1, -1].real
    _leak_warning(leak, "photon_add")
    return FockDensityMatrix(out, normalized=False, leak=float(leak))


def photon_subtract(state: FockDensityMatrix) -> FockDensityMatrix:
    """Unnormalised a rho a^dag on the same cutoff."""
    rho = state.rho
    out = np.zeros_like(rho)
    out[:-1, :-1] = _ladder_weights(state.n_max) * rho[1:, 1:]
    return FockDensityMatrix(out, normalized=False)


def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), 1).astype(complex)


def displacement_matrix(beta: complex, n_max: int) -> np.ndarray:
    """expm(beta a^dag - beta^* a) with a truncated to n_max + 1 levels."""
    a = annihilation(n_max)
    return expm(complex(beta) * a.conj().T - complex(beta).conjugate() * a)


def displace(state: FockDensityMatrix, beta: complex) -> FockDensityMatrix:
    """D^dag(beta) rho D(beta); moves the distribution by -beta.

    Reliable when n_max >= 4 (|beta|^2 + <n>) + 10.
    """
    if beta == 0:
        return state
    u = displacement_matrix(beta, state.n_max)
    out = u.conj().T @ state.rho @ u
    out = (out + out.conj().T) / 2
    drift = abs(np.trace(out).real - state.trace)
    _leak_warning(drift, "displace")
    return FockDensityMatrix(out, normalized=state.normalized, leak=float(drift))


def normalize(state: FockDensityMatrix) -> FockDensityMatrix:
    tr = state.trace
    if not tr > 0:
        raise ValueError(f"cannot normalise an operator with trace {tr:g}")
    return FockDensityMatrix(state.rho / tr, normalized=True, leak=state.leak)


def mix(states: Sequence[FockDensityMatrix], weights: Sequence[float]) -> FockDensityMatrix:
    if len(states) != len(weights) or not states:
        raise ValueError("need one weight per state")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("mixture weights must be non-negative")
    if abs(w.sum() - 1) > 1e-9:
        raise ValueError(f"mixture weights sum to {w.sum():.12g}, not 1")
    if len({st.n_max for st in states}) != 1:
        raise ValueError("all mixture components need the same n_max")
    rho = sum(wi * st.rho for wi, st in zip(w, states))
    return FockDensityMatrix(rho, normalized=all(st.normalized for st in states))


def superpose(amplitudes: Sequence[complex], n_max: int | None = None) -> FockDensityMatrix:
    """|psi><psi| for psi_n = amplitudes[n], normalised to unit length."""
    psi = np.asarray(amplitudes, dtype=complex)
    if n_max is not None:
        if len(psi) > n_max + 1 and np.any(psi[n_max + 1:] != 0):
            raise TruncationError("superposition has amplitude above n_max")
        psi = np.concatenate([psi[: n_max + 1], np.zeros(max(0, n_max + 1 - len(psi)))])
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("all superposition amplitudes vanish")
    psi = psi / norm
    return FockDensityMatrix(np.outer(psi, psi.conj()))


# -- declarative state descriptions -----------------------------------------

STATE_KINDS = ("fock", "coherent", "thermal", "superposition", "mixture", "spsts_closed_form")


def parse_complex(value: Any, name: str = "value") -> complex:
    """Complex numbers travel as {re, im} tables; plain reals are accepted too."""
    if isinstance(value, dict):
        extra = set(value) - {"re", "im"}
        if extra:
            raise ConfigError(f"{name}: unexpected keys {sorted(extra)} (want re/im)")
        try:
            return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: re/im must be numbers") from exc
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    raise ConfigError(f"{name}: expected a {{re, im}} table, got {value!r}")


@dataclass(frozen=True)
class StateSpec:
    """Parsed ``[state]`` table: kind, parameters and an ordered modifier list.

    Modifiers are ``("add_photon", None)``, ``("subtract_photon", None)``,
    ``("normalize", None)`` or ``("displace", beta)``.
    """

    kind: str
    n_max: int = 32
    n: int = 0
    alpha: complex = 0j
    nbar: float = 0.0
    amplitudes: tuple = ()
    components: tuple = ()   # ((weight, StateSpec), ...)
    modifiers: tuple = ()
    representation: str = "auto"

    @classmethod
    def from_dict(cls, d: dict) -> "StateSpec":
        if not isinstance(d, dict):
            raise ConfigError("state must be a table")
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in STATE_KINDS:
            raise ConfigError(f"unknown state kind {kind!r}; expected one of {STATE_KINDS}")
        kw: dict[str, Any] = {"kind": kind}
        try:
            if "n_max" in d:
                kw["n_max"] = int(d.pop("n_max"))
            if "representation" in d:
                kw["representation"] = str(d.pop("representation"))
                if kw["representation"] not in ("auto", "fock"):
                    raise ConfigError("representation must be 'auto' or 'fock'")
            if kind == "fock":
                kw["n"] = int(d.pop("n"))
            elif kind == "coherent":
                kw["alpha"] = parse_complex(d.pop("alpha"), "alpha")
            elif kind in ("thermal", "spsts_closed_form"):
                kw["nbar"] = float(d.pop("nbar"))
                if kw["nbar"] < 0:
                    raise ConfigError("nbar must be non-negative")
            elif kind == "superposition":
                amps = tuple(parse_complex(a, "amplitudes") for a in d.pop("amplitudes"))
                if not amps or all(a == 0 for a in amps):
                    raise ConfigError("superposition needs a nonzero amplitude")
                kw["amplitudes"] = amps
            elif kind == "mixture":
                comps = []
                for c in d.pop("components"):
                    c = dict(c)
                    w = float(c.pop("weight"))
                    sub = c.pop("state", None) or c
                    sub = dict(sub)
                    sub.setdefault("n_max", kw.get("n_max", cls.n_max))
                    comps.append((w, cls.from_dict(sub)))
                ws = [w for w, _ in comps]
                if not comps or min(ws) < 0 or abs(sum(ws) - 1) > 1e-9:
                    raise ConfigError("mixture weights must be >= 0 and sum to 1")
                kw["components"] = tuple(comps)
            kw["modifiers"] = tuple(_parse_modifier(m) for m in d.pop("modifiers", []))
        except KeyError as exc:
            raise ConfigError(f"state kind {kind!r} requires parameter {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad state parameter: {exc}") from None
        if d:
            raise ConfigError(f"unexpected state keys: {sorted(d)}")
        if kind == "spsts_closed_form" and kw["modifiers"]:
            raise ConfigError("spsts_closed_form takes no modifiers")
        return cls(**kw)

    def closed_form(self) -> ClosedFormState | None:
        """The exact closed-form description of this state, when one exists."""
        mods = [name for name, _ in self.modifiers]
        if self.kind == "spsts_closed_form":
            return ClosedFormState("spsts", nbar=self.nbar)
        if self.kind == "thermal" and not mods:
            return ClosedFormState("thermal", nbar=self.nbar)
        if self.kind == "thermal" and mods == ["subtract_photon"] and self.nbar > 0:
            return ClosedFormState("spsts", nbar=self.nbar)
        if self.kind == "coherent" and not mods:
            return ClosedFormState("coherent", beta=self.alpha)
        return None

    def to_fock(self) -> FockDensityMatrix:
        if self.kind == "fock":
            st = make_fock(self.n, self.n_max)
        elif self.kind == "coherent":
            st = make_coherent(self.alpha, self.n_max)
        elif self.kind in ("thermal", "spsts_closed_form"):
            st = make_thermal(self.nbar, self.n_max)
            if self.kind == "spsts_closed_form":
                st = photon_subtract(st)
        elif self.kind == "superposition":
            st = superpose(self.amplitudes, self.n_max)
        else:
            subs = [c.to_fock() for _, c in self.components]
            st = mix(subs, [w for w, _ in self.components])
        for name, arg in self.modifiers:
            if name == "add_photon":
                st = photon_add(st)
            elif name == "subtract_photon":
                st = photon_subtract(st)
            elif name == "normalize":
                st = normalize(st)
            else:
                st = displace(st, arg)
        return st

    def build(self) -> FockDensityMatrix | ClosedFormState:
        """Closed form when available (and not overridden), else Fock matrix."""
        if self.representation == "auto":
            cf = self.closed_form()
            if cf is not None:
                return cf
        return self.to_fock()


def _parse_modifier(m) -> tuple:
    if isinstance(m, str):
        if m in ("add_photon", "subtract_photon", "normalize"):
            return (m, None)
        raise ConfigError(f"unknown modifier {m!r}")
    if isinstance(m, dict) and len(m) == 1 and "displace" in m:
        return ("displace", parse_complex(m["displace"], "displace"))
    raise ConfigError(f"unknown modifier {m!r}")
