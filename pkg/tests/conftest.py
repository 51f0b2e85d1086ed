import numpy as np
import pytest

from shapley_lg import validate_model


@pytest.fixture
def correlated_p2():
    """beta=(1,1), unit variances, correlation 0.5; hand-checked throughout."""
    return validate_model([1.0, 1.0], [[1.0, 0.5], [0.5, 1.0]])


@pytest.fixture
def skewed_p2():
    """beta=(1,0), correlation 0.6; only the first input enters the output."""
    return validate_model([1.0, 0.0], [[1.0, 0.6], [0.6, 1.0]])


def assert_close(actual, expected, tol=1e-12):
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    assert actual.shape == expected.shape
    assert np.max(np.abs(actual - expected)) <= tol, (actual, expected)
