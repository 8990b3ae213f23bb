import warnings

import numpy as np
import pytest

from qdepth.states import (make_coherent, make_fock, make_thermal, photon_add,
                           photon_subtract)


def _catalog():
    """Fock, coherent and thermal states with single-photon added/subtracted variants.

    Cutoffs keep every truncation tail below 1e-10 so the Fock route is exact
    to roundoff for s <= 0.
    """
    base = {f"fock{n}": make_fock(n, 12) for n in range(5)}
    base["coherent(0.5+0.5j)"] = make_coherent(0.5 + 0.5j, 40)
    base["coherent(1.5)"] = make_coherent(1.5, 40)
    base["thermal(0.5)"] = make_thermal(0.5, 48)
    base["thermal(2)"] = make_thermal(2.0, 72)
    out = dict(base)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name in ("fock2", "coherent(1.5)", "thermal(2)"):
            out[f"add[{name}]"] = photon_add(base[name])
            out[f"sub[{name}]"] = photon_subtract(base[name])
    return out


CATALOG = _catalog()


@pytest.fixture(params=sorted(CATALOG), scope="session")
def catalog_state(request):
    return request.param, CATALOG[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
