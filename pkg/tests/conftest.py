import numpy as np
import pytest

from ouportfolio import ModelParams, validate


def make_decoupled(n: int, seed: int) -> ModelParams:
    """Decoupled market: random orthogonal sigma gives identity covariance."""
    rng = np.random.default_rng(seed)
    alpha = 0.3 + 0.4 * rng.random(n)
    mu = 5.0 + 3.0 * rng.random(n)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return ModelParams(r=0.5, gamma=0.5, rho0=0.0, rho=np.zeros(n),
                       varrho=np.zeros((n, n)), alpha=alpha, mu=mu, sigma=q, T=1.0)


@pytest.fixture(scope="session")
def flat_1d():
    """Single asset with very slow reversion on a wide state range."""
    p = ModelParams(r=0.01, gamma=0.5, rho0=0.01, rho=[0.0], varrho=[[0.0]],
                    alpha=[0.005], mu=[3.0], sigma=[[1.0]], T=1.0)
    return p, validate(p)


@pytest.fixture(scope="session")
def rich_1d():
    """Single asset with strong reversion; visible curvature in the state."""
    p = ModelParams(r=0.3, gamma=0.5, rho0=0.02, rho=[0.1], varrho=[[0.0]],
                    alpha=[0.6], mu=[2.0], sigma=[[0.8]], T=1.0)
    return p, validate(p)


@pytest.fixture(scope="session")
def commodity_2d():
    """Two-asset commodity estimates with perturbed off-diagonal volatility."""
    p = ModelParams(r=0.3, gamma=0.5, rho0=0.03, rho=[0.02, 0.01],
                    varrho=[[0.002, 0.0], [0.0, 0.002]],
                    alpha=[0.301, 0.428], mu=[3.093, 2.991],
                    sigma=[[0.334, 0.01], [0.01, 0.257]], T=0.25)
    return p, validate(p)


def commodity_with_gamma(gamma: float) -> ModelParams:
    return ModelParams(r=0.3, gamma=gamma, rho0=0.03, rho=[0.02, 0.01],
                       varrho=[[0.002, 0.0], [0.0, 0.002]],
                       alpha=[0.301, 0.428], mu=[3.093, 2.991],
                       sigma=[[0.334, 0.01], [0.01, 0.257]], T=0.25)
