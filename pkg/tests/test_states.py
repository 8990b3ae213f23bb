import math
import warnings

import numpy as np
import pytest
from scipy.stats import poisson

from qdepth.errors import ConfigError, TruncationError, TruncationWarning
from qdepth.states import (ClosedFormState, FockDensityMatrix, StateSpec, displace,
                           make_coherent, make_fock, make_thermal, mix, normalize,
                           photon_add, photon_subtract, superpose)

from conftest import CATALOG


def test_make_fock():
    v = make_fock(0, 4)
    assert v.rho.shape == (5, 5)
    assert v.rho[0, 0] == 1 and np.count_nonzero(v.rho) == 1
    one = make_fock(1, 4)
    assert one.rho[1, 1] == 1 and np.count_nonzero(one.rho) == 1
    assert all(make_fock(n, 6).trace == 1 for n in range(7))
    with pytest.raises(TruncationError):
        make_fock(5, 4)


def test_make_coherent():
    assert np.allclose(make_coherent(0, 9).rho, make_fock(0, 9).rho)
    c = make_coherent(1.0, 24)
    assert c.rho[0, 0] == pytest.approx(math.exp(-1), rel=1e-9)
    assert c.trace == pytest.approx(1, abs=1e-12)
    # diagonal is Poisson with mean |alpha|^2
    np.testing.assert_allclose(c.diagonal, poisson.pmf(np.arange(25), 1.0), rtol=1e-9)
    for a in (0.3, 1.2 - 0.7j, 2.0):
        r = make_coherent(a, 32).rho
        assert np.trace(r @ r).real == pytest.approx(1, abs=1e-9)
    assert make_coherent(1.2 - 0.7j, 32).mean_field == pytest.approx(1.2 - 0.7j, abs=1e-9)


def test_coherent_cutoff_error_names_requirement():
    with pytest.raises(TruncationError, match=r"n_max"):
        make_coherent(3.0, 10)


def test_make_thermal():
    assert np.allclose(make_thermal(0, 5).rho, make_fock(0, 5).rho)
    t = make_thermal(1.0, 64)
    assert t.rho[0, 0] == pytest.approx(0.5, rel=1e-12)
    assert t.rho[1, 1] == pytest.approx(0.25, rel=1e-12)
    for nbar in (0.5, 1.0, 2.0):
        assert make_thermal(nbar, 80).mean_photon == pytest.approx(nbar, abs=1e-8)
    with pytest.raises(TruncationError):
        make_thermal(2.0, 20)


def test_photon_add():
    out = photon_add(make_fock(0, 4))
    assert out.rho[1, 1] == 1 and out.trace == 1 and not out.normalized
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        for st in CATALOG.values():
            assert photon_add(st).rho[0, 0] == 0
    assert photon_add(make_thermal(1.0, 64)).trace == pytest.approx(2, abs=1e-8)


def test_photon_add_leak_warning():
    with pytest.warns(TruncationWarning):
        out = photon_add(make_fock(4, 4))
    assert out.leak == pytest.approx(5.0)


def test_photon_subtract():
    assert photon_subtract(make_fock(0, 4)).trace == 0
    out = photon_subtract(make_fock(1, 4))
    assert out.rho[0, 0] == 1 and out.trace == 1
    for nbar in (0.5, 1.0, 2.0):
        assert photon_subtract(make_thermal(nbar, 80)).trace == pytest.approx(nbar, abs=1e-8)


@pytest.mark.parametrize("n", range(5))
def test_add_then_subtract_fock(n):
    out = photon_subtract(photon_add(make_fock(n, 8)))
    expected = np.zeros((9, 9))
    expected[n, n] = (n + 1) ** 2
    assert np.array_equal(out.rho.real, expected)


def test_subtract_then_add_kills_vacuum(rng):
    p = rng.uniform(size=10)
    st = FockDensityMatrix(np.diag(p / p.sum()))
    out = photon_add(photon_subtract(st))
    assert out.rho[0, 0] == 0


def test_displace():
    st = make_coherent(0.4 + 0.3j, 32)
    assert np.allclose(displace(st, 0).rho, st.rho, atol=1e-15)
    for beta in (0.5, -0.8j, 0.6 + 0.6j):
        d = displace(make_fock(0, 32), beta)
        ref = make_coherent(-beta, 32)
        fidelity = np.trace(d.rho @ ref.rho).real
        assert fidelity > 1 - 1e-8
        assert d.trace == pytest.approx(1, abs=1e-8)
    rho = CATALOG["add[fock2]"]
    back = displace(displace(make_thermal(0.5, 48), 0.7 - 0.3j), -0.7 + 0.3j)
    np.testing.assert_allclose(back.rho, make_thermal(0.5, 48).rho, atol=1e-7)
    assert rho.rho[0, 0] == 0


def test_mix_superpose_normalize():
    st = make_thermal(0.5, 30)
    assert np.allclose(mix([st], [1]).rho, st.rho)
    one = superpose([0, 1, 0])
    assert np.allclose(one.rho, make_fock(1, 2).rho)
    n = normalize(photon_add(make_fock(0, 3)))
    assert n.trace == 1 and np.allclose(n.rho, make_fock(1, 3).rho)
    with pytest.raises(ValueError):
        normalize(photon_subtract(make_fock(0, 3)))
    with pytest.raises(ValueError):
        mix([st, make_fock(0, 30)], [0.7, -0.3])
    psi = superpose([1, 1j, -2])
    assert psi.trace == pytest.approx(1, abs=1e-12)


def test_catalog_is_physical():
    for name, st in CATALOG.items():
        r = st.rho
        assert np.max(np.abs(r - r.conj().T)) <= 1e-12, name
        assert np.linalg.eigvalsh(r).min() >= -1e-9 * max(1.0, st.trace), name
        if st.normalized:
            assert st.trace == pytest.approx(1, abs=1e-9), name


def test_rho_is_read_only():
    st = make_fock(1, 3)
    with pytest.raises(ValueError):
        st.rho[0, 0] = 1


def test_statespec_parse_and_build():
    spec = StateSpec.from_dict({"kind": "fock", "n": 2, "n_max": 8})
    assert np.allclose(spec.build().rho, make_fock(2, 8).rho)
    spec = StateSpec.from_dict({"kind": "coherent", "alpha": {"re": 1.0, "im": -0.5}})
    assert spec.build() == ClosedFormState("coherent", beta=1 - 0.5j)
    assert isinstance(StateSpec.from_dict({"kind": "coherent", "alpha": {"re": 1, "im": 0},
                                           "representation": "fock"}).build(),
                      FockDensityMatrix)
    spec = StateSpec.from_dict({"kind": "thermal", "nbar": 1, "modifiers": ["subtract_photon"]})
    assert spec.build() == ClosedFormState("spsts", nbar=1.0)
    spec = StateSpec.from_dict({"kind": "thermal", "nbar": 0.5, "n_max": 48,
                                "modifiers": ["add_photon", "normalize",
                                              {"displace": {"re": 0.1, "im": 0}}]})
    st = spec.build()
    assert isinstance(st, FockDensityMatrix) and st.rho[0, 0] > 0
    spec = StateSpec.from_dict({"kind": "mixture", "n_max": 4, "components": [
        {"weight": 0.5, "state": {"kind": "fock", "n": 0}},
        {"weight": 0.5, "kind": "fock", "n": 1}]})
    np.testing.assert_allclose(spec.build().diagonal, [0.5, 0.5, 0, 0, 0])


@pytest.mark.parametrize("bad", [
    {"kind": "squeezed"},
    {"kind": "fock"},
    {"kind": "thermal", "nbar": -1},
    {"kind": "coherent", "alpha": "1+1j"},
    {"kind": "fock", "n": 1, "modifiers": ["teleport"]},
    {"kind": "fock", "n": 1, "colour": "blue"},
    {"kind": "mixture", "components": [{"weight": 0.3, "kind": "fock", "n": 0}]},
    {"kind": "superposition", "amplitudes": []},
])
def test_statespec_rejects(bad):
    with pytest.raises(ConfigError):
        StateSpec.from_dict(bad)
