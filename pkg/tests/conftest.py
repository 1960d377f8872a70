import pytest

from tpdc.core.basis import BasisSpec, NuclearModel
from tpdc.core.dirac import solve_spectrum
from tpdc.core.specfun import PrecisionCtx

# Small hydrogen set: well converged for 1s/2s, cheap enough for every run.
SMALL_COUNT = 24
SMALL_RADIUS = 30.0


@pytest.fixture(scope="session")
def ctx():
    return PrecisionCtx(34)


@pytest.fixture(scope="session")
def ctx50():
    return PrecisionCtx(50)


@pytest.fixture(scope="session")
def small_spec():
    return BasisSpec.bpolynomial(SMALL_COUNT, SMALL_RADIUS)


@pytest.fixture(scope="session")
def small_spline():
    return BasisSpec.bspline(5, 14, 20.0, 1e-2)


@pytest.fixture(scope="session")
def hydrogen():
    return NuclearModel(1.0)


@pytest.fixture(scope="session")
def spectra(small_spec, hydrogen, ctx):
    """s1/2, p1/2, p3/2 and d3/2 spectra: everything 2E1 and 2M1 need for 2s -> 1s."""
    return {k: solve_spectrum(small_spec, hydrogen, k, ctx) for k in (-1, 1, -2, 2)}


@pytest.fixture
def cache_dir(tmp_path, monkeypatch):
    root = tmp_path / "cache"
    monkeypatch.setenv("TPDC_CACHE_DIR", str(root))
    return root
