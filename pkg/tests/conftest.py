import math

import numpy as np
import pytest

from manifoldsteer.flow_model import PlanarVelocityField, find_saddle, taylor_green

PI2 = math.pi ** 2


@pytest.fixture(scope="session")
def tg():
    return taylor_green(1.0)


@pytest.fixture(scope="session")
def tg_low(tg):
    return find_saddle(tg, (0.9, 0.1))


@pytest.fixture(scope="session")
def tg_high(tg):
    return find_saddle(tg, (0.9, 0.9))


def tg_with_g(g, dg=None, window=None, zero_extend=True):
    base = taylor_green(1.0)
    return PlanarVelocityField(f=base.f, df=base.df, g=g, dg=dg, domain=base.domain, window=window,
                               zero_extend=zero_extend, name="tg+g")


def shear_x2_field(gamma, omega, window=None):
    """g = (gamma cos(omega t) x2, 0) with its analytic Jacobian."""

    def g(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        c = gamma * np.cos(omega * t) * x[..., 1]
        return np.stack([c, np.zeros_like(c)], axis=-1)

    def dg(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], t.shape)
        out = np.zeros(shape + (2, 2))
        out[..., 0, 1] = gamma * np.cos(omega * t)
        return out

    return tg_with_g(g, dg, window)


def uniform_cos_field(gamma, omega=1.0, window=None):
    """g = (gamma cos(omega t), 0)."""

    def g(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        c = gamma * np.cos(omega * t) * np.ones(x.shape[:-1])
        return np.stack([c, np.zeros_like(c)], axis=-1)

    def dg(x, t):
        x = np.asarray(x, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], np.shape(t))
        return np.zeros(shape + (2, 2))

    return tg_with_g(g, dg, window)
