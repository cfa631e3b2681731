from __future__ import annotations

import numpy as np
import pytest

from wglimit import CurvatureProfile, tune_to_resonance


@pytest.fixture(scope="session")
def zero_profile():
    return CurvatureProfile.zero()


@pytest.fixture(scope="session")
def bump05():
    return CurvatureProfile.bump(0.5)


@pytest.fixture(scope="session")
def tuned2():
    return tune_to_resonance(CurvatureProfile.bump(0.5), 2)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)


def log_slope(x, y):
    """Plain least-squares log-log slope (test-side oracle)."""
    x = np.log(np.asarray(x, dtype=float))
    y = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
