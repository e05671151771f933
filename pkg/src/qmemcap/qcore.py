"""Two-qubit states, the (m_phi, m_psi) transmission basis, entropy and Holevo chi.

All states use the fixed computational ordering |00>, |01>, |10>, |11>.
Entropies are in bits.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
NORM_TOL = 1e-12
EIG_FLOOR = 1e-12

KET_00, KET_01, KET_10, KET_11 = np.eye(4, dtype=complex)


def check_density(rho: np.ndarray, name: str = "rho") -> np.ndarray:
    """Validate a 4x4 density matrix and return it as a complex array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise DomainError(f"{name}: expected shape (4, 4), got {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise DomainError(f"{name}: non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise DomainError(f"{name}: not Hermitian")
    if abs(np.trace(rho) - 1.0) > TRACE_TOL:
        raise DomainError(f"{name}: trace {np.trace(rho).real:.3g} != 1")
    if np.linalg.eigvalsh(rho)[0] < -PSD_TOL:
        raise DomainError(f"{name}: not positive semidefinite")
    return rho


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        rho = check_density(self.entries, "DensityMatrix")
        rho = rho.copy()
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @classmethod
    def maximally_mixed(cls) -> "DensityMatrix":
        return cls(np.eye(4, dtype=complex) / 4)


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if psi.shape != (4,):
            raise DomainError(f"PureState: expected 4 amplitudes, got {psi.shape[0]}")
        if abs(np.linalg.norm(psi) - 1.0) > NORM_TOL:
            raise DomainError("PureState: amplitudes not unit norm")
        psi = psi.copy()
        psi.setflags(write=False)
        object.__setattr__(self, "amplitudes", psi)


@dataclass(frozen=True)
class BasisParams:
    """Entanglement of the two basis pairs; 0 is factorized, 1 is Bell."""

    m_phi: float
    m_psi: float

    def __post_init__(self):
        for name in ("m_phi", "m_psi"):
            value = getattr(self, name)
            if not (np.isfinite(value) and 0.0 <= value <= 1.0):
                raise DomainError(f"{name}={value!r} outside [0, 1]")
            object.__setattr__(self, name, float(value))


# Named basis families.
FACTORIZED = BasisParams(0.0, 0.0)
BELL = BasisParams(1.0, 1.0)
COMBINED = BasisParams(0.0, 1.0)
BASIS_FAMILIES = {"fac": FACTORIZED, "bell": BELL, "com": COMBINED}


@dataclass(frozen=True)
class Ensemble:
    probabilities: np.ndarray
    states: tuple

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float).reshape(-1)
        if len(self.states) != p.size:
            raise DomainError("Ensemble: probabilities and states differ in length")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
            raise DomainError("Ensemble: probabilities must be non-negative and sum to 1")
        states = tuple(
            s if isinstance(s, DensityMatrix) else DensityMatrix(s) for s in self.states
        )
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "states", states)


def basis_vectors(m_phi: float, m_psi: float) -> np.ndarray:
    """Rows are psi_1..psi_4 for real m; no range checks (hot path)."""
    a = 1.0 / np.sqrt(1.0 + m_phi * m_phi)
    b = 1.0 / np.sqrt(1.0 + m_psi * m_psi)
    return np.array(
        [
            a * (KET_00 + m_phi * KET_11),
            a * (m_phi * KET_00 - KET_11),
            b * (KET_01 + m_psi * KET_10),
            b * (m_psi * KET_01 - KET_10),
        ]
    )


def make_basis(params: BasisParams) -> tuple[PureState, PureState, PureState, PureState]:
    vecs = basis_vectors(params.m_phi, params.m_psi)
    return tuple(PureState(v) for v in vecs)


def pure_to_density(psi: PureState) -> DensityMatrix:
    v = psi.amplitudes
    return DensityMatrix(np.outer(v, v.conj()))


def entropy_of_eigenvalues(lam: np.ndarray) -> np.ndarray:
    """-sum lam log2 lam along the last axis, ignoring eigenvalues <= EIG_FLOOR."""
    lam = np.asarray(lam, dtype=float)
    safe = np.where(lam > EIG_FLOOR, lam, 1.0)
    return -np.sum(np.where(lam > EIG_FLOOR, lam * np.log2(safe), 0.0), axis=-1)


def von_neumann_entropy(rho) -> float:
    """Von Neumann entropy in bits.

    Accepts a DensityMatrix or a raw array; raw arrays are validated the
    same way, so a state that is negative beyond tolerance raises DomainError.
    """
    entries = rho.entries if isinstance(rho, DensityMatrix) else check_density(rho)
    s = float(entropy_of_eigenvalues(np.linalg.eigvalsh(entries)))
    return min(max(s, 0.0), 2.0)


def chi_from_arrays(p: np.ndarray, states: np.ndarray, entropies: np.ndarray | None = None):
    """Holevo chi for one or many probability vectors.

    ``states`` has shape (n, 4, 4); ``p`` has shape (n,) or (batch, n).
    ``entropies`` may carry precomputed S(rho_x) to skip the per-state
    diagonalisation inside optimisation loops.
    """
    if entropies is None:
        entropies = entropy_of_eigenvalues(np.linalg.eigvalsh(states))
    p = np.asarray(p, dtype=float)
    mean = np.tensordot(p, states, axes=([-1], [0]))
    chi = entropy_of_eigenvalues(np.linalg.eigvalsh(mean)) - p @ entropies
    return chi


def holevo_chi(e: Ensemble) -> float:
    states = np.array([s.entries for s in e.states])
    chi = float(chi_from_arrays(e.probabilities, states))
    if chi < -1e-10:
        raise DomainError(f"holevo_chi: negative chi {chi:.3g}")
    return min(max(chi, 0.0), 2.0)


def gram_matrix(states: Sequence[PureState]) -> np.ndarray:
    vecs = np.array([s.amplitudes for s in states])
    return vecs.conj() @ vecs.T
