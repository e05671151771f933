"""Holevo capacity of the noisy two-qubit channel and its extreme-limit relations.

The capacity at duration t is the maximum of chi over the input
probabilities p_1..p_4 and the basis entanglement (m_phi, m_psi).  Channel
outputs of the basis family are X-states (non-zero only on the
{|00>,|11>} and {|01>,|10>} blocks), so their spectra are computed in
closed form from two 2x2 blocks instead of a 4x4 diagonalisation.
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .channel import ChannelParams, NoisyChannel, apply_propagator, is_feasible
from .errors import DomainError, NumericalError
from .neldermead import nelder_mead
from .qcore import BASIS_FAMILIES, EIG_FLOOR, BasisParams

M_GRID_STEP = 0.05
P_GRID_STEP = 0.1
TIE_BITS = 1e-6
N_STARTS = 8
XTOL = 1e-7
MAX_EVALS = 2000
F_CUTOFF = 1e-4
X_STRUCTURE_TOL = 1e-12

SWEEP_AXES = ("mu", "zeta", "alpha")


@dataclass(frozen=True)
class ChiResult:
    chi_bits: float
    p: tuple
    evaluations: int
    converged: bool


@dataclass(frozen=True)
class CapacityResult:
    capacity_bits: float
    p: tuple
    m_phi: float
    m_psi: float
    evaluations: int
    converged: bool


def simplex_grid(step: float, dim: int = 4) -> np.ndarray:
    """All probability vectors of length ``dim`` whose entries are multiples of ``step``."""
    n = int(round(1.0 / step))
    if not math.isclose(n * step, 1.0, abs_tol=1e-12):
        raise DomainError(f"grid step {step} does not divide 1")
    rows = [
        c + (n - sum(c),)
        for c in itertools.product(range(n + 1), repeat=dim - 1)
        if sum(c) <= n
    ]
    return np.array(rows, dtype=float) / n


def unit_grid(step: float) -> np.ndarray:
    n = int(round(1.0 / step))
    return np.round(np.arange(n + 1) / n, 12)


def softmax_tail(z: np.ndarray) -> np.ndarray:
    """Probabilities from three free logits (the first logit is pinned at 0)."""
    full = [0.0, *z.tolist()]
    top = max(full)
    ex = [math.exp(v - top) for v in full]
    tot = sum(ex)
    return np.array([v / tot for v in ex])


def _logits(p: np.ndarray) -> np.ndarray:
    lp = np.log(np.maximum(p, 1e-9))
    return lp[1:] - lp[0]


def xstate_entropy(v: np.ndarray) -> np.ndarray:
    """Entropy in bits of X-states given as [d00, d01, d10, d11, c(00,11), c(01,10)]."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1])
    for a, b, c in ((0, 3, 4), (1, 2, 5)):
        mean = 0.5 * (v[..., a] + v[..., b])
        rad = np.hypot(0.5 * (v[..., a] - v[..., b]), v[..., c])
        for lam in (mean + rad, mean - rad):
            ok = lam > EIG_FLOOR
            out -= np.where(ok, lam * np.log2(np.where(ok, lam, 1.0)), 0.0)
    return out


_LOG2 = math.log(2.0)


def _xstate_entropy_1d(v) -> float:
    """Scalar twin of :func:`xstate_entropy` for one state (optimiser hot path)."""
    s = 0.0
    for a, b, c in ((v[0], v[3], v[4]), (v[1], v[2], v[5])):
        mean = 0.5 * (a + b)
        rad = math.hypot(0.5 * (a - b), c)
        for lam in (mean + rad, mean - rad):
            if lam > EIG_FLOOR:
                s -= lam * math.log(lam)
    return s / _LOG2


class BasisOutputs:
    """Channel outputs of the basis family for one (channel, duration).

    The output of each basis projector is a quadratic in m, so the channel
    is applied once to six fixed operators and every later basis choice
    is a linear combination of those.
    """

    def __init__(self, channel: NoisyChannel):
        self.channel = channel
        ops = np.zeros((6, 4, 4))
        for i, (a, b) in enumerate(((0, 0), (3, 3), (0, 3), (1, 1), (2, 2), (1, 2))):
            ops[i, a, b] = 1.0
            ops[i, b, a] = 1.0
        out = apply_propagator(channel.prop, ops)
        mask = np.zeros((4, 4), bool)
        for a, b in ((0, 0), (1, 1), (2, 2), (3, 3), (0, 3), (3, 0), (1, 2), (2, 1)):
            mask[a, b] = True
        leak = max(np.abs(out[:, ~mask]).max(), np.abs(out.imag).max())
        if leak > X_STRUCTURE_TOL:
            raise NumericalError(f"channel output left the X-state manifold (|leak|={leak:.3g})")
        out = out.real
        # rows: E(|00><00|), E(|11><11|), E(S_phi), E(|01><01|), E(|10><10|), E(S_psi)
        self._x = np.stack(
            [
                np.concatenate(
                    [np.diagonal(o), [0.5 * (o[0, 3] + o[3, 0]), 0.5 * (o[1, 2] + o[2, 1])]]
                )
                for o in out
            ]
        )

    def states(self, m_phi: float, m_psi: float) -> np.ndarray:
        """Output X-state vectors of psi_1..psi_4, shape (4, 6)."""
        e00, e11, sphi, e01, e10, spsi = self._x
        a2 = 1.0 / (1.0 + m_phi * m_phi)
        b2 = 1.0 / (1.0 + m_psi * m_psi)
        mf2, mp2 = m_phi * m_phi, m_psi * m_psi
        return np.array(
            [
                a2 * (e00 + m_phi * sphi + mf2 * e11),
                a2 * (mf2 * e00 - m_phi * sphi + e11),
                b2 * (e01 + m_psi * spsi + mp2 * e10),
                b2 * (mp2 * e01 - m_psi * spsi + e10),
            ]
        )

    def chi_function(self, m_phi: float, m_psi: float):
        """Return chi(p) for the fixed basis; accepts p of shape (4,) or (n, 4)."""
        x = self.states(m_phi, m_psi)
        ent = xstate_entropy(x)
        ent_list = ent.tolist()

        def chi(p):
            if np.ndim(p) == 1:
                mean = (p @ x).tolist()
                return _xstate_entropy_1d(mean) - sum(pi * si for pi, si in zip(p.tolist(), ent_list))
            return xstate_entropy(p @ x) - p @ ent

        return chi


def _check_t(t: float) -> float:
    t = float(t)
    if not (np.isfinite(t) and t >= 0):
        raise DomainError(f"t={t} must be finite and >= 0")
    return t


def _maximize_p(chi, coarse: np.ndarray) -> ChiResult:
    values = chi(coarse)
    i = int(np.argmax(values))
    p0 = coarse[i]
    res = nelder_mead(
        lambda z: -chi(softmax_tail(z)), _logits(p0), step=0.5, xtol=XTOL, max_evals=MAX_EVALS
    )
    evals = len(coarse) + res.evaluations
    if -res.fun > values[i]:
        return ChiResult(float(-res.fun), tuple(softmax_tail(res.x)), evals, res.converged)
    return ChiResult(float(values[i]), tuple(p0), evals, res.converged)


@lru_cache(maxsize=1)
def _coarse_simplex() -> np.ndarray:
    # grid plus the uniform vector, which is optimal for noiseless channels
    grid = np.vstack([simplex_grid(P_GRID_STEP), np.full(4, 0.25)])
    grid.setflags(write=False)
    return grid


def chi_for_basis(
    p_chan: ChannelParams, t: float, b: BasisParams, *, model: BasisOutputs | None = None
) -> ChiResult:
    """Maximum of chi over the input probabilities for a fixed basis."""
    if model is None:
        model = BasisOutputs(NoisyChannel(p_chan, _check_t(t)))
    return _maximize_p(model.chi_function(b.m_phi, b.m_psi), _coarse_simplex())


def optimize_capacity(p_chan: ChannelParams, t: float, *, seed: int = 0) -> CapacityResult:
    """Joint maximum of chi over (p, m_phi, m_psi); see :func:`optimize_model`."""
    return optimize_model(BasisOutputs(NoisyChannel(p_chan, _check_t(t))), seed=seed)


def optimize_model(model: BasisOutputs, *, seed: int = 0) -> CapacityResult:
    """Joint maximum of chi over (p, m_phi, m_psi) for a prepared channel.

    A 0.05 grid over (m_phi, m_psi) with the inner probability search
    seeds ``N_STARTS`` joint Nelder-Mead refinements, plus two seeded random
    starts.  Among all candidates within ``TIE_BITS`` of the best, the one
    with the smallest m_phi + m_psi wins.
    """
    coarse = _coarse_simplex()
    ms = unit_grid(M_GRID_STEP)
    candidates = []  # (value, m_phi, m_psi, p)
    evals = 0
    for mf in ms:
        for mp in ms:
            r = _maximize_p(model.chi_function(mf, mp), coarse)
            evals += r.evaluations
            candidates.append((r.chi_bits, float(mf), float(mp), np.array(r.p)))

    def objective(x):
        mf, mp = np.clip(x[3:], 0.0, 1.0)
        x_states = model.states(mf, mp)
        p = softmax_tail(x[:3])
        ent = sum(pi * _xstate_entropy_1d(row) for pi, row in zip(p.tolist(), x_states.tolist()))
        return -(_xstate_entropy_1d((p @ x_states).tolist()) - ent)

    ranked = sorted(candidates, key=lambda c: (-c[0], c[1] + c[2], c[1]))
    starts = [np.concatenate([_logits(c[3]), [c[1], c[2]]]) for c in ranked[:N_STARTS]]
    rng = np.random.default_rng(seed)
    for _ in range(2):
        starts.append(np.concatenate([rng.normal(size=3), rng.uniform(size=2)]))

    converged = True
    for x0 in starts:
        res = nelder_mead(objective, x0, step=[0.5, 0.5, 0.5, 0.05, 0.05], xtol=XTOL, max_evals=MAX_EVALS)
        evals += res.evaluations
        converged &= res.converged
        mf, mp = np.clip(res.x[3:], 0.0, 1.0)
        candidates.append((-res.fun, float(mf), float(mp), softmax_tail(res.x[:3])))

    best = max(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] >= best - TIE_BITS]
    value, mf, mp, p = min(tied, key=lambda c: (c[1] + c[2], c[1], -c[0]))
    return CapacityResult(
        capacity_bits=float(min(max(value, 0.0), 2.0)),
        p=tuple(float(x) for x in p),
        m_phi=mf,
        m_psi=mp,
        evaluations=evals,
        converged=bool(converged),
    )


def f_closed_form(nu_t: float) -> float:
    """Closed-form offset between the biased factorized and entangled capacities.

    Natural logs throughout; the ln 16 normalisation converts to bits.  The
    expression has a removable 0/0 singularity at nu_t -> 0 and is rejected
    below ``F_CUTOFF``.  Intermediates are rearranged algebraically to avoid
    cancellation: with e = w - 1, r - e = 1/(r + e), so
    d1 = d3 / ((r + e)(r + 1)).
    """
    x = float(nu_t)
    if not (np.isfinite(x) and x >= F_CUTOFF):
        raise DomainError(
            f"nu_t={nu_t} below cutoff {F_CUTOFF}: f has a removable singularity at nu_t -> 0"
        )
    e = math.expm1(x)
    w = 1.0 + e
    d3 = e * e
    r = math.sqrt(1.0 + d3)
    d2 = d3 + w * (1.0 + r)
    log_d3 = 2.0 * math.log(e)
    log_d2 = math.log(d2)
    log_d1 = log_d3 - math.log(r + e) - math.log(r + 1.0)
    l12_3 = log_d1 + log_d2 - log_d3  # ln(d1 d2 / d3)
    bracket = (
        (l12_3 - 2.0 * x)
        + (r * (log_d2 - log_d1) + (2.0 * log_d3 - log_d1 - log_d2)) / w
        + l12_3 / (w * w)
    )
    return 0.5 - bracket / math.log(16.0)


@dataclass(frozen=True)
class LimitCase:
    tag: str
    description: str


LIMIT_CASES = {
    "a": LimitCase("a", "symmetric, state-biased memory channel (zeta=0, alpha=1, vary mu)"),
    "b": LimitCase("b", "asymmetric, state-biased memoryless channel (mu=0, alpha=1, vary zeta)"),
    "c": LimitCase("c", "symmetric, unbiased memory channel (zeta=0, alpha=0, vary mu)"),
    "d": LimitCase("d", "asymmetric, unbiased memoryless channel (mu=0, alpha=0, vary zeta)"),
}

# left case -> (right case, right-hand basis family, includes f(nu t))
LIMIT_RELATIONS = {
    "b": ("a", "bell", True),
    "a": ("b", "bell", True),
    "d": ("c", "com", False),
    "c": ("d", "com", False),
}


def limit_channel(case: LimitCase | str, p: float, nu1: float = 1.0) -> ChannelParams:
    tag = case.tag if isinstance(case, LimitCase) else case
    if tag not in LIMIT_CASES:
        raise DomainError(f"unknown limit case {tag!r}")
    alpha = 1.0 if tag in "ab" else 0.0
    if tag in "ac":
        return ChannelParams(nu1, alpha=alpha, zeta=0.0, mu=p)
    return ChannelParams(nu1, alpha=alpha, zeta=p, mu=0.0)


def limit_chi(case: LimitCase | str, basis: str, p: float, nu_t: float) -> float:
    chan = limit_channel(case, p)
    return chi_for_basis(chan, nu_t, BASIS_FAMILIES[basis]).chi_bits


@dataclass(frozen=True)
class LimitResidual:
    left: str
    right: str
    p: float
    nu_t: float
    lhs_bits: float
    rhs_bits: float
    offset_bits: float
    residual_bits: float


def limit_relation(case: LimitCase | str, p: float, nu_t: float) -> LimitResidual:
    """Residual of the extreme-limit relation whose left-hand side is ``case``.

    chi_left^fac(p) = chi_right^family(p) + eps (+ f(nu t) for the biased pair);
    cases a and c are parametrised by mu, b and d by zeta.
    """
    tag = case.tag if isinstance(case, LimitCase) else case
    if tag not in LIMIT_RELATIONS:
        raise DomainError(f"unknown limit case {tag!r}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p} outside [0, 1]")
    right, family, with_f = LIMIT_RELATIONS[tag]
    offset = f_closed_form(nu_t) if with_f else 0.0
    if not with_f and not nu_t > 0:
        raise DomainError(f"nu_t={nu_t} must be > 0")
    lhs = limit_chi(tag, "fac", p, nu_t)
    rhs = limit_chi(right, family, p, nu_t)
    return LimitResidual(tag, right, float(p), float(nu_t), lhs, rhs, offset, lhs - rhs - offset)


def limit_relation_residual(case: LimitCase | str, p: float, nu_t: float) -> float:
    return limit_relation(case, p, nu_t).residual_bits


@dataclass(frozen=True)
class SweepRow:
    mu: float
    zeta: float
    alpha: float
    nu_t: float
    basis: str
    result: CapacityResult | None

    @property
    def status(self) -> str:
        return "ok" if self.result is not None else "skipped"


def evaluate_point(mu, zeta, alpha, nu_t, basis="opt", nu1=1.0, seed=0) -> SweepRow:
    """One capacity row: optimised (``basis='opt'``) or a fixed basis family."""
    if not is_feasible(zeta, mu):
        return SweepRow(mu, zeta, alpha, nu_t, basis, None)
    t = nu_t / nu1 if nu1 > 0 else 0.0
    chan = ChannelParams(nu1, alpha=alpha, zeta=zeta, mu=mu)
    if basis == "opt":
        return SweepRow(mu, zeta, alpha, nu_t, basis, optimize_capacity(chan, t, seed=seed))
    try:
        fam = BASIS_FAMILIES[basis]
    except KeyError:
        raise DomainError(f"basis={basis!r} not one of opt, {', '.join(BASIS_FAMILIES)}") from None
    r = chi_for_basis(chan, t, fam)
    res = CapacityResult(r.chi_bits, r.p, fam.m_phi, fam.m_psi, r.evaluations, r.converged)
    return SweepRow(mu, zeta, alpha, nu_t, basis, res)


def _evaluate_star(args):
    return evaluate_point(*args)


def default_workers() -> int:
    return max(1, int(os.environ.get("QMEMCAP_WORKERS", "1")))


def sweep_capacity(
    grid: Mapping[str, Sequence[float]],
    fixed: Mapping[str, float],
    nu_t: float,
    *,
    bases: Sequence[str] = ("opt",),
    nu1: float = 1.0,
    seed: int = 0,
    workers: int | None = None,
) -> list[SweepRow]:
    """Capacity over the Cartesian product of ``grid`` axes.

    Rows are ordered lexicographically in the swept axes (in the order
    given), then by ``bases`` order, regardless of completion order.
    Infeasible points (zeta^2 + mu^2 > 1) come back with status ``skipped``.
    """
    axes = list(grid)
    if not axes or any(len(grid[a]) == 0 for a in axes):
        raise DomainError("sweep grid is empty")
    for a in axes:
        if a not in SWEEP_AXES:
            raise DomainError(f"axis {a!r} not one of {', '.join(SWEEP_AXES)}")
    values = {k: float(fixed.get(k, 0.0)) for k in SWEEP_AXES}
    jobs = []
    for point in itertools.product(*(sorted(float(v) for v in grid[a]) for a in axes)):
        values.update(zip(axes, point))
        for basis in bases:
            jobs.append((values["mu"], values["zeta"], values["alpha"], float(nu_t), basis, nu1, seed))
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_evaluate_star, jobs))
    return [evaluate_point(*j) for j in jobs]
