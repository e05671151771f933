"""Noisy two-qubit channel: decoherence parameters, rate matrices, Lindblad generator.

The generator acts on column-stacked density matrices and is built as

    L = sum_jk R1[j,k] D[s-_j, s-_k] + sum_jk R0[j,k] D[s+_j, s+_k],
    D[A, B] rho = A rho B^+ - 1/2 {B^+ A, rho},

with s- = |0><1| (decay, rate sector R1) and s+ = |1><0| (excitation, R0).
The dynamics is written in the interaction picture, so there is no
Hamiltonian term.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import ConstraintError, DomainError, UndefinedRatioError
from .qcore import BasisParams, DensityMatrix, basis_vectors, make_basis, pure_to_density

DISK_TOL = 1e-12
PSD_RATE_TOL = 1e-12

_SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
_ID2 = np.eye(2, dtype=complex)
LOWERING = (np.kron(_SIGMA_MINUS, _ID2), np.kron(_ID2, _SIGMA_MINUS))
RAISING = tuple(op.conj().T for op in LOWERING)


@dataclass(frozen=True)
class ChannelParams:
    """Decay magnitude ``nu1`` plus bias, asymmetry and memory, all in [0, 1].

    The excitation magnitude is ``nu0 = (1 - alpha) * nu1``.  Qubit 1
    carries the larger rate when ``zeta > 0``.
    """

    nu1: float
    alpha: float = 0.0
    zeta: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        for name in ("nu1", "alpha", "zeta", "mu"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise DomainError(f"{name}={value!r} is not finite")
            object.__setattr__(self, name, value)
        if self.nu1 < 0:
            raise DomainError(f"nu1={self.nu1} must be >= 0")
        for name in ("alpha", "zeta", "mu"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name}={value} outside [0, 1]")
        if self.zeta**2 + self.mu**2 > 1.0 + DISK_TOL:
            raise ConstraintError(
                f"zeta^2 + mu^2 = {self.zeta**2 + self.mu**2:.6g} > 1 "
                "(rate matrix would not be positive semidefinite)"
            )

    @property
    def nu0(self) -> float:
        return (1.0 - self.alpha) * self.nu1


def is_feasible(zeta: float, mu: float) -> bool:
    return zeta**2 + mu**2 <= 1.0 + DISK_TOL


@dataclass(frozen=True)
class RateMatrices:
    """Decay (``r1``) and excitation (``r0``) pair-rate matrices, index order (qubit 1, qubit 2)."""

    r1: np.ndarray
    r0: np.ndarray

    def __post_init__(self):
        for name in ("r1", "r0"):
            r = np.array(getattr(self, name), dtype=float)
            if r.shape != (2, 2):
                raise DomainError(f"{name}: expected a 2x2 matrix, got shape {r.shape}")
            if not np.all(np.isfinite(r)):
                raise DomainError(f"{name}: non-finite rates")
            r.setflags(write=False)
            object.__setattr__(self, name, r)

    def is_psd(self, tol: float = PSD_RATE_TOL) -> bool:
        return all(_psd_violation(r) <= tol * max(1.0, np.abs(r).max()) for r in (self.r1, self.r0))


def _psd_violation(r: np.ndarray) -> float:
    sym = 0.5 * (r + r.T)
    return max(0.0, -float(np.linalg.eigvalsh(sym)[0]))


def _sector(nu: float, zeta: float, mu: float) -> np.ndarray:
    return 0.5 * nu * np.array([[1.0 + zeta, mu], [mu, 1.0 - zeta]])


def rates_from_params(p: ChannelParams) -> RateMatrices:
    return RateMatrices(r1=_sector(p.nu1, p.zeta, p.mu), r0=_sector(p.nu0, p.zeta, p.mu))


def params_from_rates(r: RateMatrices) -> ChannelParams:
    r1, r0 = r.r1, r.r0
    nu1 = r1[0, 0] + r1[1, 1]
    if not nu1 > 0:
        raise UndefinedRatioError(f"nu1 = R1_11 + R1_22 = {nu1} must be > 0")
    nu0 = r0[0, 0] + r0[1, 1]
    return ChannelParams(
        nu1=nu1,
        alpha=1.0 - nu0 / nu1,
        zeta=abs(r1[0, 0] - r1[1, 1]) / nu1,
        mu=abs(r1[0, 1] + r1[1, 0]) / nu1,
    )


def dissipator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator of D[A, B] on column-stacked vectors."""
    eye = np.eye(a.shape[0])
    bda = b.conj().T @ a
    return np.kron(b.conj(), a) - 0.5 * (np.kron(eye, bda) + np.kron(bda.T, eye))


@lru_cache(maxsize=None)
def _dissipator_table():
    # 2 sectors x 2 x 2 fixed superoperators; the generator is their rate-weighted sum
    table = np.empty((2, 2, 2, 16, 16), dtype=complex)
    for s, ops in enumerate((LOWERING, RAISING)):
        for j in range(2):
            for k in range(2):
                table[s, j, k] = dissipator(ops[j], ops[k])
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class Liouvillian:
    generator: np.ndarray


def generator_matrix(r1: np.ndarray, r0: np.ndarray) -> np.ndarray:
    """Unchecked 16x16 generator for arbitrary (possibly non-PSD) rates.

    Only the symmetric part of each rate matrix enters; an antisymmetric
    real part would break Hermiticity of the evolved state.
    """
    r1 = np.asarray(r1, float)
    r0 = np.asarray(r0, float)
    weights = np.stack([0.5 * (r1 + r1.T), 0.5 * (r0 + r0.T)])
    return np.tensordot(weights, _dissipator_table(), axes=([0, 1, 2], [0, 1, 2]))


def build_liouvillian(r: RateMatrices) -> Liouvillian:
    if not r.is_psd():
        raise ConstraintError("rate matrices must be positive semidefinite")
    gen = generator_matrix(r.r1, r.r0)
    gen.setflags(write=False)
    return Liouvillian(gen)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v).reshape(4, 4, order="F")


def propagator(gen: Liouvillian | np.ndarray, t: float) -> np.ndarray:
    """exp(L t) as a 16x16 matrix (scaling and squaring Pade)."""
    if not t >= 0:
        raise DomainError(f"t={t} must be >= 0")
    g = gen.generator if isinstance(gen, Liouvillian) else gen
    if t == 0:
        return np.eye(16, dtype=complex)
    return expm(g * t)


def apply_propagator(prop: np.ndarray, rhos: np.ndarray) -> np.ndarray:
    """Apply a 16x16 propagator to a stack of 4x4 states, shape (..., 4, 4)."""
    rhos = np.asarray(rhos, dtype=complex)
    flat = np.swapaxes(rhos, -1, -2).reshape(rhos.shape[:-2] + (16,))
    out = flat @ prop.T
    return np.swapaxes(out.reshape(rhos.shape[:-2] + (4, 4)), -1, -2)


def propagate(rho0: DensityMatrix, L: Liouvillian, t: float) -> DensityMatrix:
    if not t >= 0:
        raise DomainError(f"t={t} must be >= 0")
    if t == 0:
        return rho0
    return DensityMatrix(unvec(propagator(L, t) @ vec(rho0.entries)))


class NoisyChannel:
    """Constant-rate channel at a fixed duration; maps many inputs cheaply.

    Holds exp(L t) once so that repeated basis evaluations during
    optimisation only cost a matrix product.
    """

    def __init__(self, params: ChannelParams, t: float):
        self.params = params
        self._setup(rates_from_params(params), t)

    @classmethod
    def from_rates(cls, rates: RateMatrices, t: float) -> "NoisyChannel":
        self = cls.__new__(cls)
        self.params = None
        self._setup(rates, t)
        return self

    def _setup(self, rates: RateMatrices, t: float) -> None:
        if not t >= 0:
            raise DomainError(f"t={t} must be >= 0")
        self.t = float(t)
        self.rates = rates
        self.liouvillian = build_liouvillian(rates)
        self.prop = propagator(self.liouvillian, self.t)

    def outputs(self, m_phi: float, m_psi: float) -> np.ndarray:
        """Output density matrices of the four basis states, shape (4, 4, 4)."""
        vecs = basis_vectors(m_phi, m_psi)
        pure = vecs[:, :, None] * vecs[:, None, :].conj()
        out = apply_propagator(self.prop, pure)
        return 0.5 * (out + np.swapaxes(out, -1, -2).conj())


def apply_channel(b: BasisParams, p: ChannelParams, t: float) -> tuple[DensityMatrix, ...]:
    L = build_liouvillian(rates_from_params(p))
    return tuple(propagate(pure_to_density(psi), L, t) for psi in make_basis(b))
