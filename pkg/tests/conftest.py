import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tmgpanel import DgpConfig, calibrate_kappa  # noqa: E402

# one pinned seed for every Monte Carlo cell in the suite
MC_SEED = 20260811
R_KAPPA = 1000
N_CAL = 5000


@pytest.fixture
def rng():
    return np.random.default_rng(20240810)


def _cal(**kw):
    kw.setdefault("n", 1000)
    kw.setdefault("seed", MC_SEED)
    return calibrate_kappa(DgpConfig(**kw), r_kappa=R_KAPPA, n_cal=N_CAL)


# noise scales shared across test modules (each is a full R=1000 x n=5000
# calibration run, so compute once per session)


@pytest.fixture(scope="session")
def kappa2_case3_t2():
    """Correlated heterogeneity (rho = 0.5), T = 2, PR^2 = 0.2."""
    return _cal(T=2, rho_alpha=0.5, rho_beta=0.5)


@pytest.fixture(scope="session")
def kappa2_case3_t3():
    return _cal(T=3, rho_alpha=0.5, rho_beta=0.5)


@pytest.fixture(scope="session")
def kappa2_case1_t2():
    """Uncorrelated heterogeneity (rho = 0), T = 2."""
    return _cal(T=2)


@pytest.fixture(scope="session")
def kappa2_case1_t4():
    return _cal(T=4)


@pytest.fixture(scope="session")
def kappa2_homog_t2():
    """Slope homogeneity (sigma_beta^2 = 0), T = 2."""
    return _cal(T=2, sigma2_beta=0.0)


@pytest.fixture(scope="session")
def kappa2_homog_t8():
    return _cal(T=8, sigma2_beta=0.0)
