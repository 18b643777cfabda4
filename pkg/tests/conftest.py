import numpy as np
import pytest

from otflux import hermitian_part, skew_part


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian(rng, k, scale=1.0):
    a = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    return hermitian_part(scale * a)


def random_skew(rng, k, scale=1.0):
    a = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    return skew_part(scale * a)


def random_hermitian_stack(rng, shape, k, scale=1.0):
    a = rng.normal(size=shape + (k, k)) + 1j * rng.normal(size=shape + (k, k))
    return hermitian_part(scale * a)


def random_skew_stack(rng, shape, k, scale=1.0):
    a = rng.normal(size=shape + (k, k)) + 1j * rng.normal(size=shape + (k, k))
    return skew_part(scale * a)
