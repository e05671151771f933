"""Pulse-controlled pair decoherence rates and the effective channel they induce.

For qubit pulses eps_j(t) = env_j(t) exp(i phase_j(t)) and a bath response
Phi(tau), the pair rate is

    R_jk(t) = 2 Re int_0^t dt1 Phi(t - t1) eps_j(t) conj(eps_k(t1)) exp(i (w_j t - w_k t1)).

Those rates fill the decay sector; the excitation sector is the decay
sector times the correlation function's ``bias`` factor (so alpha = 1 - bias).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.linalg import expm

from .channel import ChannelParams, RateMatrices, generator_matrix, unvec, vec
from .errors import ConstraintError, DomainError, NumericalError, UndefinedRatioError
from .qcore import DensityMatrix

log = logging.getLogger(__name__)

QUAD_EPSREL = 1e-8
POINTS_PER_PERIOD = 40
MAX_QUAD_PERIODS = 50
CLAMP_SLACK = 1e-6
STEP_TOL = 1e-8
MAX_SUBSTEPS = 1024


def _zero(s):
    return 0.0


@dataclass(frozen=True)
class PulseSpec:
    """A qubit pulse; ``envelope``, ``phase`` and ``support`` are in pulse-local time.

    The pulse at lab time t is evaluated at local time s = t - delay.
    ``phase_rate`` (d phase / ds) is optional and only used to detect
    rapidly oscillating integrands.
    """

    envelope: Callable[[float], float]
    phase: Callable[[float], float] = _zero
    carrier: float = 0.0
    delay: float = 0.0
    support: tuple = (-math.inf, math.inf)
    phase_rate: Callable[[float], float] | None = None
    label: str = ""

    def __post_init__(self):
        if not self.delay >= 0:
            raise DomainError(f"pulse delay={self.delay} must be >= 0")
        lo, hi = self.support
        if not lo < hi:
            raise DomainError(f"pulse support {self.support} is empty")

    def lab_support(self) -> tuple[float, float]:
        return self.support[0] + self.delay, self.support[1] + self.delay

    def amplitude(self, t: float) -> complex:
        """eps(t) including the pulse phase (the carrier is applied by the caller)."""
        s = t - self.delay
        if not self.support[0] <= s <= self.support[1]:
            return 0j
        env = self.envelope(s)
        if env == 0:
            return 0j
        return env * complex(math.cos(self.phase(s)), math.sin(self.phase(s)))

    def max_frequency(self, lo: float, hi: float) -> float:
        """Largest |phase_rate + carrier| over lab interval [lo, hi]."""
        if self.phase_rate is None:
            return abs(self.carrier)
        s = np.linspace(lo, hi, 201) - self.delay
        return float(max(abs(self.phase_rate(x) + self.carrier) for x in s))


def gaussian_pulse(
    width: float, delay: float = 0.0, amplitude: float = 1.0, chirp: float = 0.0,
    carrier: float = 0.0, cutoff: float = 8.0, center: float | None = None,
) -> PulseSpec:
    """Gaussian envelope of rms ``width`` centred at ``center`` (default: ``cutoff*width``).

    The phase is a linear chirp, phase(s) = chirp * (s - center)^2 / 2.
    """
    if not width > 0:
        raise DomainError(f"pulse width={width} must be > 0")
    c = cutoff * width if center is None else center

    def env(s):
        return amplitude * math.exp(-0.5 * ((s - c) / width) ** 2)

    return PulseSpec(
        envelope=env,
        phase=lambda s: 0.5 * chirp * (s - c) ** 2,
        phase_rate=lambda s: chirp * (s - c),
        carrier=carrier,
        delay=delay,
        support=(c - cutoff * width, c + cutoff * width),
        label="gaussian",
    )


def flat_pulse(
    duration: float = math.inf, delay: float = 0.0, amplitude: float = 1.0,
    chirp: float = 0.0, carrier: float = 0.0,
) -> PulseSpec:
    if not duration > 0:
        raise DomainError(f"pulse duration={duration} must be > 0")
    return PulseSpec(
        envelope=lambda s: amplitude,
        phase=lambda s: 0.5 * chirp * s * s,
        phase_rate=lambda s: chirp * s,
        carrier=carrier,
        delay=delay,
        support=(0.0, duration),
        label="flat",
    )


def silent_pulse() -> PulseSpec:
    return PulseSpec(envelope=_zero, support=(0.0, 1.0), label="silent")


CORRELATION_KINDS = ("exponential", "gaussian", "delta")


@dataclass(frozen=True)
class CorrelationFn:
    """Real, even bath response Phi(tau).

    exponential: scale * exp(-|tau| / t_c)
    gaussian:    scale * exp(-tau^2 / (2 t_c^2))
    delta:       scale * N(tau; 0, sigma), sigma = t_c / 100 by default.  A unit
                 flat pulse then has the constant Markov rate ``scale``.

    ``bias`` in [0, 1] is the excitation-to-decay rate ratio.
    """

    kind: str
    t_c: float
    scale: float = 1.0
    temperature_tag: str = ""
    bias: float = 1.0
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in CORRELATION_KINDS:
            raise DomainError(f"correlation kind={self.kind!r} not one of {', '.join(CORRELATION_KINDS)}")
        if not self.t_c > 0:
            raise DomainError(f"t_c={self.t_c} must be > 0")
        if not self.scale > 0:
            raise DomainError(f"scale={self.scale} must be > 0")
        if not 0.0 <= self.bias <= 1.0:
            raise DomainError(f"bias={self.bias} outside [0, 1]")
        if self.kind == "delta" and self.sigma is None:
            object.__setattr__(self, "sigma", self.t_c / 100.0)
        if self.sigma is not None and not self.sigma > 0:
            raise DomainError(f"sigma={self.sigma} must be > 0")

    @property
    def width(self) -> float:
        return self.sigma if self.kind == "delta" else self.t_c

    @property
    def reach(self) -> float:
        """Lag beyond which |Phi| is below ~1e-17 of its peak."""
        return {"exponential": 40.0, "gaussian": 9.0, "delta": 9.0}[self.kind] * self.width

    def __call__(self, tau: float) -> float:
        a = abs(tau)
        if self.kind == "exponential":
            return self.scale * math.exp(-a / self.t_c)
        if self.kind == "gaussian":
            return self.scale * math.exp(-0.5 * (a / self.t_c) ** 2)
        s = self.sigma
        return self.scale * math.exp(-0.5 * (a / s) ** 2) / (s * math.sqrt(2.0 * math.pi))


def _checked(fn, what):
    def wrapped(x):
        y = fn(x)
        if not math.isfinite(y):
            raise NumericalError(f"non-finite {what} integrand at t1={x!r}")
        return y

    return wrapped


def rate_integral(j: int, k: int, pulses: Sequence[PulseSpec], corr: CorrelationFn, t: float) -> complex:
    """The complex quantity whose doubled real part is R_jk(t)."""
    if not t >= 0:
        raise DomainError(f"t={t} must be >= 0")
    pj, pk = pulses[j], pulses[k]
    ej = pj.amplitude(t)
    if ej == 0:
        return 0j
    ej *= complex(math.cos(pj.carrier * t), math.sin(pj.carrier * t))

    k_lo, k_hi = pk.lab_support()
    lo = max(0.0, k_lo, t - corr.reach)
    hi = min(t, k_hi)
    if not hi > lo:
        return 0j

    def g(t1):
        ek = pk.amplitude(t1).conjugate() * complex(math.cos(pk.carrier * t1), -math.sin(pk.carrier * t1))
        return corr(t - t1) * ek

    periods = pk.max_frequency(lo, hi) * (hi - lo) / (2.0 * math.pi)
    if periods > MAX_QUAD_PERIODS:
        n = int(max(POINTS_PER_PERIOD * periods, 2000)) | 1
        x = np.linspace(lo, hi, n)
        y = np.array([g(v) for v in x])
        if not np.all(np.isfinite(y)):
            bad = x[~np.isfinite(y)][0]
            raise NumericalError(f"non-finite rate integrand at t1={bad!r}")
        val = integrate.simpson(y, x=x)
    else:
        # breakpoints where the kernel or the pulse changes on short scales
        pts = [t - m * corr.width for m in (0.5, 1.0, 2.0, 4.0)]
        pts = sorted({p for p in pts if lo < p < hi})
        kw = dict(epsrel=QUAD_EPSREL, epsabs=1e-15, limit=400, points=pts or None)
        re, _ = integrate.quad(_checked(lambda x: g(x).real, "rate"), lo, hi, **kw)
        im, _ = integrate.quad(_checked(lambda x: g(x).imag, "rate"), lo, hi, **kw)
        val = complex(re, im)
    return ej * val


def compute_rate(j: int, k: int, pulses: Sequence[PulseSpec], corr: CorrelationFn, t: float) -> float:
    """R_jk(t) for qubit indices j, k in {0, 1}."""
    return 2.0 * rate_integral(j, k, pulses, corr, t).real


@dataclass(frozen=True)
class RateTrajectory:
    times: np.ndarray
    r_matrices: tuple

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise DomainError("trajectory needs a 1-d time grid")
        if not np.all(np.isfinite(times)) or np.any(np.diff(times) <= 0):
            raise DomainError("trajectory times must be finite and strictly ascending")
        if len(self.r_matrices) != times.size:
            raise DomainError("one RateMatrices per time point required")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "r_matrices", tuple(self.r_matrices))

    @classmethod
    def constant(cls, rates: RateMatrices, times) -> "RateTrajectory":
        times = np.asarray(times, dtype=float)
        return cls(times, tuple(rates for _ in times))

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        r1 = np.array([r.r1 for r in self.r_matrices])
        r0 = np.array([r.r0 for r in self.r_matrices])
        return r1, r0

    def rates_at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Linearly interpolated (r1, r0) at time t."""
        r1, r0 = self.stacked()
        f = lambda arr: np.array(
            [[np.interp(t, self.times, arr[:, a, b]) for b in range(2)] for a in range(2)]
        )
        return f(r1), f(r0)


def rate_trajectory(pulses: Sequence[PulseSpec], corr: CorrelationFn, grid) -> RateTrajectory:
    if len(pulses) != 2:
        raise DomainError(f"expected two pulses, got {len(pulses)}")
    times = np.asarray(grid, dtype=float)
    if times.size and times[0] < 0:
        raise DomainError("trajectory grid must start at t >= 0")
    mats = []
    for t in times:
        r1 = np.array([[compute_rate(j, k, pulses, corr, t) for k in range(2)] for j in range(2)])
        mats.append(RateMatrices(r1=r1, r0=corr.bias * r1))
    return RateTrajectory(times, tuple(mats))


@dataclass(frozen=True)
class EffectiveParams:
    params: ChannelParams
    clamped: bool
    mean_rates: RateMatrices


def _time_average(traj: RateTrajectory, t: float) -> tuple[np.ndarray, np.ndarray]:
    times = traj.times
    if not times[0] <= t <= times[-1] or not t > 0:
        raise DomainError(f"t={t} outside the trajectory span [{times[0]}, {times[-1]}]")
    r1, r0 = traj.stacked()
    keep = times < t
    ts = np.concatenate([times[keep], [t]])
    a1, a0 = traj.rates_at(t)
    s1 = np.concatenate([r1[keep], a1[None]])
    s0 = np.concatenate([r0[keep], a0[None]])
    if ts[0] > 0:
        # R(0) = 0: the rate integral over [0, 0] is empty
        ts = np.concatenate([[0.0], ts])
        s1 = np.concatenate([np.zeros((1, 2, 2)), s1])
        s0 = np.concatenate([np.zeros((1, 2, 2)), s0])
    return (
        integrate.trapezoid(s1, x=ts, axis=0) / t,
        integrate.trapezoid(s0, x=ts, axis=0) / t,
    )


def effective_params_detail(traj: RateTrajectory, t: float) -> EffectiveParams:
    r1, r0 = _time_average(traj, t)
    nu1 = r1[0, 0] + r1[1, 1]
    if not nu1 > 0:
        raise UndefinedRatioError(f"time-averaged nu1={nu1:.3g} must be > 0")
    nu0 = r0[0, 0] + r0[1, 1]
    zeta = abs(r1[0, 0] - r1[1, 1]) / nu1
    mu = abs(r1[0, 1] + r1[1, 0]) / nu1
    alpha = min(max(1.0 - nu0 / nu1, 0.0), 1.0)
    radius = math.hypot(zeta, mu)
    clamped = False
    if radius > 1.0:
        if radius - 1.0 > CLAMP_SLACK:
            raise ConstraintError(f"effective zeta^2 + mu^2 = {radius**2:.6g} > 1")
        log.warning("clamping effective (zeta, mu) = (%.3g, %.3g) onto the unit disk", zeta, mu)
        zeta, mu = zeta / radius, mu / radius
        clamped = True
    params = ChannelParams(nu1=nu1, alpha=alpha, zeta=min(zeta, 1.0), mu=min(mu, 1.0))
    return EffectiveParams(params, clamped, RateMatrices(r1, r0))


def effective_params(traj: RateTrajectory, t: float) -> ChannelParams:
    """Channel parameters of the rates averaged over [0, t]."""
    return effective_params_detail(traj, t).params


@dataclass(frozen=True)
class TrajectoryPropagation:
    state: DensityMatrix
    substeps: int
    nonpsd_times: tuple = field(default_factory=tuple)

    @property
    def flagged(self) -> bool:
        return bool(self.nonpsd_times)


def _is_psd(r: np.ndarray, tol: float = 1e-12) -> bool:
    sym = 0.5 * (r + r.T)
    return np.linalg.eigvalsh(sym)[0] >= -tol * max(1.0, np.abs(sym).max())


def _evolve(v: np.ndarray, traj: RateTrajectory, n: int) -> np.ndarray:
    r1, r0 = traj.stacked()
    times = traj.times
    for i in range(times.size - 1):
        dt = (times[i + 1] - times[i]) / n
        for s in range(n):
            w = (s + 0.5) / n
            gen = generator_matrix((1 - w) * r1[i] + w * r1[i + 1], (1 - w) * r0[i] + w * r0[i + 1])
            v = expm(gen * dt) @ v
    return v


def propagate_with_trajectory(rho0: DensityMatrix, traj: RateTrajectory) -> TrajectoryPropagation:
    """Evolve rho0 from the first to the last trajectory time.

    Rates are linear between grid points; each interval is split into n
    midpoint-rule substeps and n is doubled until doubling changes the
    state by less than ``STEP_TOL`` (max-norm).
    """
    r1, r0 = traj.stacked()
    nonpsd = tuple(float(t) for t, a, b in zip(traj.times, r1, r0) if not (_is_psd(a) and _is_psd(b)))
    if nonpsd:
        log.info("rate matrices are not PSD at %d grid times", len(nonpsd))
    v0 = vec(rho0.entries)
    n = 1
    prev = _evolve(v0, traj, n)
    while True:
        if n >= MAX_SUBSTEPS:
            raise NumericalError(f"trajectory propagation did not converge with {n} substeps")
        cur = _evolve(v0, traj, 2 * n)
        n *= 2
        if np.max(np.abs(cur - prev)) < STEP_TOL:
            break
        prev = cur
    rho = unvec(cur)
    rho = 0.5 * (rho + rho.conj().T)
    try:
        state = DensityMatrix(rho)
    except DomainError as exc:
        raise NumericalError(f"propagated state is not a valid density matrix: {exc}") from exc
    return TrajectoryPropagation(state, n, nonpsd)
