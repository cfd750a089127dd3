import numpy as np
import pytest


def rel_err(actual, expected) -> float:
    """Norm-relative error, safe when the reference is (near) zero."""
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    denom = max(np.linalg.norm(expected), 1e-300)
    return float(np.linalg.norm(actual - expected) / denom)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
