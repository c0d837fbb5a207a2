import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def within_sigma(observed, expected, sigma, k=3.0):
    return abs(observed - expected) <= k * sigma


def binomial_sigma(p, n):
    return float(np.sqrt(p * (1.0 - p) / n))
