import mpmath
import numpy as np
import pytest

from qmemcap.channel import ChannelParams


def random_density(rng, rank=None):
    rank = rank or rng.integers(1, 5)
    a = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_feasible_params(rng, nu1=1.0):
    r, th = np.sqrt(rng.uniform()), rng.uniform(0, np.pi / 2)
    return ChannelParams(nu1, alpha=rng.uniform(), zeta=r * np.cos(th), mu=r * np.sin(th))


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def brute_chi(channel, m_phi, m_psi, probs):
    """Chi for many probability rows via full 4x4 diagonalisation (no X-state shortcut)."""
    states = channel.outputs(m_phi, m_psi)

    def h(rhos):
        lam = np.linalg.eigvalsh(rhos)
        lam = np.where(lam > 1e-12, lam, 1.0)
        return -np.sum(lam * np.log2(lam), axis=-1)

    mean = np.einsum("bx,xij->bij", probs, states)
    return h(mean) - probs @ h(states)


def f_oracle(x, dps=60):
    """Offset f(nu t) in extended precision, written directly from its definition."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        w = mpmath.e**x
        d3 = (1 - w) ** 2
        r = mpmath.sqrt(1 + d3)
        d1 = d3 + w * (1 - r)
        d2 = d3 + w * (1 + r)
        br = (
            (mpmath.log(d1 * d2 / d3) - 2 * x)
            + (r * mpmath.log(d2 / d1) + mpmath.log(d3**2 / (d1 * d2))) / w
            + mpmath.log(d1 * d2 / d3) / w**2
        )
        return float(mpmath.mpf("0.5") - br / mpmath.log(16))
