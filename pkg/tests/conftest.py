import numpy as np
import pytest

from gdas.models import GaussianModel


def random_psd_model(rng: np.random.Generator, k: int, floor: float = 0.05) -> GaussianModel:
    """Well-conditioned random covariance (Wishart-style) with a random mean."""
    a = rng.standard_normal((k, 2 * k))
    cov = a @ a.T / (2 * k) + floor * np.eye(k)
    return GaussianModel(mean=rng.normal(0.0, 1.0, size=k), cov=cov)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
