import numpy as np
import pytest

from cure.loss import LossSpec
from cure.mixture import MixtureParams, make_two_point_radial


def desk_params(d: int = 10, mu_scale: float = 0.5, var: float = 0.1, kappa: float = 1.0):
    """Normalized leptokurtic instance used by the statistical experiments."""
    mu = np.zeros(d)
    mu[0] = mu_scale
    return MixtureParams(
        mu0=np.zeros(d),
        mu=mu,
        sigma=var * np.eye(d),
        noise=make_two_point_radial(d, kappa),
    )


@pytest.fixture
def tight_loss():
    return LossSpec(a=2.0, b=4.0)


@pytest.fixture
def wide_loss():
    return LossSpec(a=7.5, b=15.0)
