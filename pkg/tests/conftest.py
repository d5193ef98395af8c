import numpy as np
import pytest

from twabort import AnalyticParams, make_scenario

# Reference experiment geometry used across the suite.
REF = dict(n=12, l=24, p=1, q=2, eps=0.9, snr_db=17.0, inr_db=10.0,
           sin2psi=0.8, cos2theta=1.0, seed=20190824)


@pytest.fixture(scope="session")
def ref_scenario():
    return make_scenario(**REF)


@pytest.fixture(scope="session")
def mismatched_scenario():
    return make_scenario(**{**REF, "cos2theta": 0.3})


@pytest.fixture(scope="session")
def central_params():
    return AnalyticParams(n=REF["n"], l=REF["l"], p=REF["p"], q=REF["q"])


@pytest.fixture
def rng():
    return np.random.default_rng(7)
