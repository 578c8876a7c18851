import numpy as np
import pytest

from sbmkit import example_families, make_spec, pure_power


@pytest.fixture(scope="session")
def cauchy():
    """phi(lam) = lam^(1/2): the Cauchy process when subordinated."""
    return pure_power(1.0)


@pytest.fixture(scope="session")
def mixture():
    return make_spec("sum_of_powers", alpha=0.3, beta=0.7)


@pytest.fixture(scope="session")
def families():
    return example_families()


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.max(np.abs(a / b - 1.0))
