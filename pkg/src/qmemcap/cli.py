"""Command-line front end.

Subcommands: ``capacity``, ``sweep``, ``limits``, ``pulse``.  Every option
can also come from a ``--config`` file of ``key=value`` lines (keys are
option names with or without leading dashes; repeat a key or separate by
commas for list options).  Flags given on the command line win.

Exit codes: 0 ok, 2 usage, 3 domain/constraint, 4 numerical, 5 I/O.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import capacity as cap
from . import pulse as pl
from .channel import ChannelParams, is_feasible
from .errors import DomainError, QMemCapError
from .qcore import BASIS_FAMILIES, BasisParams

log = logging.getLogger("qmemcap")

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4, 5

CSV_HEADER = (
    "mu", "zeta", "alpha", "nu_t", "basis", "m_phi", "m_psi",
    "p1", "p2", "p3", "p4", "capacity_bits", "status",
)
LIMITS_HEADER = ("relation", "p", "nu_t", "lhs_bits", "rhs_bits", "f_bits", "residual_bits")
PULSE_HEADER = ("t", "nu1", "alpha", "zeta", "mu", "nu_t", "clamped", "m_phi", "m_psi", "capacity_bits")

LIST_KEYS = {"axis", "basis"}
INT_KEYS = {"seed", "points", "workers"}


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "true" if x else "false"
    return format(float(x), ".17e")


def capacity_row(row: cap.SweepRow) -> list[str]:
    base = [fmt(row.mu), fmt(row.zeta), fmt(row.alpha), fmt(row.nu_t), row.basis]
    r = row.result
    if r is None:
        return base + [""] * 7 + ["skipped"]
    return base + [fmt(r.m_phi), fmt(r.m_psi), *(fmt(x) for x in r.p), fmt(r.capacity_bits), "ok"]


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_table(header: Sequence[str], rows: Iterable[Sequence[str]], path: str | None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    _write(buf.getvalue(), path)


def emit_csv(rows: Iterable[cap.SweepRow], path: str | None) -> None:
    """Write capacity rows in the fixed column layout (``-`` or None is stdout)."""
    write_table(CSV_HEADER, (capacity_row(r) for r in rows), path)


def parse_range(text: str, name: str) -> np.ndarray:
    """``start:stop:step`` -> inclusive grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"{name}: expected start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"{name}: non-numeric value in {text!r}") from None
    if not step > 0:
        raise UsageError(f"{name}: step must be > 0, got {step}")
    if stop < start:
        raise UsageError(f"{name}: stop {stop} < start {start}")
    n = int(math.floor((stop - start) / step + 1e-9))
    return np.round(start + step * np.arange(n + 1), 12)


def parse_axis(text: str) -> tuple[str, np.ndarray]:
    name, sep, rng = text.partition(":")
    if not sep or name not in cap.SWEEP_AXES:
        raise UsageError(f"--axis: expected one of {', '.join(cap.SWEEP_AXES)} as NAME:start:stop:step, got {text!r}")
    values = parse_range(rng, f"--axis {name}")
    if values.min() < 0 or values.max() > 1:
        raise DomainError(f"--axis {name}: values must lie in [0, 1]")
    return name, values


@dataclass
class RunConfig:
    command: str
    nu1: float = 1.0
    nu_t: float = 0.1
    mu: float = 0.0
    zeta: float = 0.0
    alpha: float = 0.0
    axis: list = field(default_factory=list)
    basis: list = field(default_factory=list)
    m_phi: float | None = None
    m_psi: float | None = None
    grid: str = "0:1:0.25"
    output: str = "-"
    seed: int = 0
    workers: int | None = None
    # pulse
    envelope: str = "gaussian"
    width: float = 1.0
    width2: float | None = None
    delay: float = 0.0
    amp1: float = 1.0
    amp2: float = 1.0
    chirp: float = 0.0
    chirp2: float | None = None
    carrier: float = 0.0
    carrier2: float | None = None
    corr: str = "exponential"
    t_c: float = 0.5
    scale: float = 1.0
    bias: float = 1.0
    duration: float | None = None
    points: int = 101
    with_capacity: bool = False


def _run_capacity(cfg: RunConfig) -> None:
    if not is_feasible(cfg.zeta, cfg.mu):
        raise DomainError(f"zeta, mu: zeta^2 + mu^2 = {cfg.zeta**2 + cfg.mu**2:.6g} > 1")
    if (cfg.m_phi is None) != (cfg.m_psi is None):
        raise UsageError("--m-phi and --m-psi must be given together")
    t = _duration(cfg)
    rows = []
    if cfg.m_phi is not None:
        b = BasisParams(cfg.m_phi, cfg.m_psi)
        chan = ChannelParams(cfg.nu1, alpha=cfg.alpha, zeta=cfg.zeta, mu=cfg.mu)
        r = cap.chi_for_basis(chan, t, b)
        res = cap.CapacityResult(r.chi_bits, r.p, b.m_phi, b.m_psi, r.evaluations, r.converged)
        rows.append(cap.SweepRow(cfg.mu, cfg.zeta, cfg.alpha, cfg.nu_t, "custom", res))
    for basis in cfg.basis or ([] if rows else ["opt"]):
        rows.append(cap.evaluate_point(cfg.mu, cfg.zeta, cfg.alpha, cfg.nu_t, basis, cfg.nu1, cfg.seed))
    emit_csv(rows, cfg.output)


def _duration(cfg: RunConfig) -> float:
    if cfg.nu_t < 0:
        raise DomainError(f"nu_t={cfg.nu_t} must be >= 0")
    if cfg.nu1 == 0:
        if cfg.nu_t != 0:
            raise DomainError("nu1=0 requires nu_t=0")
        return 0.0
    return cfg.nu_t / cfg.nu1


def _run_sweep(cfg: RunConfig) -> None:
    if not 1 <= len(cfg.axis) <= 2:
        raise UsageError(f"--axis: give one or two swept axes, got {len(cfg.axis)}")
    grid = dict(parse_axis(a) for a in cfg.axis)
    if len(grid) != len(cfg.axis):
        raise UsageError("--axis: the same axis was given twice")
    _duration(cfg)
    fixed = {"mu": cfg.mu, "zeta": cfg.zeta, "alpha": cfg.alpha}
    rows = cap.sweep_capacity(
        grid, fixed, cfg.nu_t, bases=cfg.basis or ["opt"], nu1=cfg.nu1, seed=cfg.seed, workers=cfg.workers
    )
    emit_csv(rows, cfg.output)


def _run_limits(cfg: RunConfig) -> None:
    ps = parse_range(cfg.grid, "--grid")
    if ps.min() < 0 or ps.max() > 1:
        raise DomainError("--grid: p values must lie in [0, 1]")
    out = []
    for tag in ("b", "a", "d", "c"):
        for p in ps:
            r = cap.limit_relation(tag, float(p), cfg.nu_t)
            out.append([f"{r.left}{r.right}", fmt(r.p), fmt(r.nu_t), fmt(r.lhs_bits),
                        fmt(r.rhs_bits), fmt(r.offset_bits), fmt(r.residual_bits)])
    write_table(LIMITS_HEADER, out, cfg.output)
    worst = max(abs(float(row[-1])) for row in out)
    log.info("max |residual| = %.4g bits", worst)


def build_pulses(cfg: RunConfig) -> tuple[list[pl.PulseSpec], float]:
    """Two pulses from the config plus the default evaluation time."""
    width2 = cfg.width if cfg.width2 is None else cfg.width2
    chirp2 = cfg.chirp if cfg.chirp2 is None else cfg.chirp2
    carrier2 = cfg.carrier if cfg.carrier2 is None else cfg.carrier2
    if cfg.envelope == "gaussian":
        make = pl.gaussian_pulse
        end = cfg.delay + 16.0 * max(cfg.width, width2)
    elif cfg.envelope == "flat":
        make = lambda w, **kw: pl.flat_pulse(duration=w, **kw)
        end = cfg.delay + max(cfg.width, width2)
    else:
        raise UsageError(f"--envelope: expected gaussian or flat, got {cfg.envelope!r}")
    pulses = [
        make(cfg.width, amplitude=cfg.amp1, chirp=cfg.chirp, carrier=cfg.carrier),
        make(width2, delay=cfg.delay, amplitude=cfg.amp2, chirp=chirp2, carrier=carrier2),
    ]
    return pulses, end


def _run_pulse(cfg: RunConfig) -> None:
    pulses, end = build_pulses(cfg)
    corr = pl.CorrelationFn(cfg.corr, t_c=cfg.t_c, scale=cfg.scale, bias=cfg.bias)
    t = end if cfg.duration is None else cfg.duration
    if not t > 0:
        raise DomainError(f"duration={t} must be > 0")
    if cfg.points < 2:
        raise DomainError(f"points={cfg.points} must be >= 2")
    traj = pl.rate_trajectory(pulses, corr, np.linspace(0.0, t, cfg.points))
    eff = pl.effective_params_detail(traj, t)
    p = eff.params
    row = [fmt(t), fmt(p.nu1), fmt(p.alpha), fmt(p.zeta), fmt(p.mu), fmt(p.nu1 * t), fmt(eff.clamped)]
    if cfg.with_capacity:
        r = cap.optimize_capacity(p, t, seed=cfg.seed)
        row += [fmt(r.m_phi), fmt(r.m_psi), fmt(r.capacity_bits)]
    else:
        row += ["", "", ""]
    write_table(PULSE_HEADER, [row], cfg.output)


COMMANDS = {
    "capacity": _run_capacity,
    "sweep": _run_sweep,
    "limits": _run_limits,
    "pulse": _run_pulse,
}


def run(config: RunConfig) -> int:
    """Execute one command; returns the process exit status."""
    try:
        COMMANDS[config.command](config)
    except UsageError as exc:
        print(f"qmemcap: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QMemCapError as exc:
        print(f"qmemcap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"qmemcap: output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--output", "-o", help="CSV path, '-' for stdout (default)")
    p.add_argument("--seed", type=int)
    p.add_argument("--verbose", "-v", action="store_true", default=None)


def _channel(p: argparse.ArgumentParser, nu_t=True) -> None:
    p.add_argument("--nu1", type=float, help="decay magnitude (default 1)")
    if nu_t:
        p.add_argument("--nu-t", dest="nu_t", type=float, help="dimensionless duration nu1*t")
    p.add_argument("--mu", type=float, help="memory in [0, 1]")
    p.add_argument("--zeta", type=float, help="asymmetry in [0, 1]")
    p.add_argument("--alpha", type=float, help="state-bias in [0, 1]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmemcap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="capacity at one channel point")
    _common(p)
    _channel(p)
    p.add_argument("--basis", action="append", choices=["opt", *BASIS_FAMILIES],
                   help="fixed basis family (repeatable); default: optimise")
    p.add_argument("--m-phi", dest="m_phi", type=float)
    p.add_argument("--m-psi", dest="m_psi", type=float)

    p = sub.add_parser("sweep", help="capacity over a grid of mu/zeta/alpha")
    _common(p)
    _channel(p)
    p.add_argument("--axis", action="append", help="NAME:start:stop:step, NAME in mu, zeta, alpha")
    p.add_argument("--basis", action="append", choices=["opt", *BASIS_FAMILIES])
    p.add_argument("--workers", type=int, help="worker processes (default $QMEMCAP_WORKERS or 1)")

    p = sub.add_parser("limits", help="residuals of the extreme-limit relations")
    _common(p)
    p.add_argument("--nu-t", dest="nu_t", type=float)
    p.add_argument("--grid", help="p grid start:stop:step (default 0:1:0.25)")

    p = sub.add_parser("pulse", help="effective channel parameters from pulse shapes")
    _common(p)
    p.add_argument("--envelope", choices=["gaussian", "flat"])
    p.add_argument("--width", type=float, help="gaussian rms width or flat duration")
    p.add_argument("--width2", type=float, help="second pulse width (default --width)")
    p.add_argument("--delay", type=float, help="delay of the second pulse")
    p.add_argument("--amp1", type=float)
    p.add_argument("--amp2", type=float)
    p.add_argument("--chirp", type=float, help="linear chirp rate (rad/time^2)")
    p.add_argument("--chirp2", type=float)
    p.add_argument("--carrier", type=float, help="qubit frequency (rad/time)")
    p.add_argument("--carrier2", type=float)
    p.add_argument("--corr", choices=list(pl.CORRELATION_KINDS))
    p.add_argument("--t-c", dest="t_c", type=float, help="bath correlation time")
    p.add_argument("--scale", type=float, help="correlation amplitude")
    p.add_argument("--bias", type=float, help="excitation/decay rate ratio in [0, 1]")
    p.add_argument("--duration", type=float, help="averaging time (default: end of pulses)")
    p.add_argument("--points", type=int, help="time grid points")
    p.add_argument("--with-capacity", dest="with_capacity", action="store_true", default=None)
    return parser


def read_config_file(path: str) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key = key.strip().lstrip("-").replace("-", "_")
            out.setdefault(key, []).extend(v.strip() for v in value.split(",") if v.strip())
    return out


def _coerce(key: str, values: list[str], target):
    if key in LIST_KEYS:
        return list(values)
    if len(values) != 1:
        raise UsageError(f"config key {key!r}: expected one value, got {len(values)}")
    value = values[0]
    kind = int if key in INT_KEYS else (type(target) if target is not None else float)
    try:
        if kind is bool:
            return value.lower() in ("1", "true", "yes", "on")
        if kind is str:
            return value
        return kind(value)
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse {value!r}") from None


def config_from_args(argv: Sequence[str] | None = None) -> tuple[RunConfig, bool]:
    """Merge defaults < config file < flags into a RunConfig."""
    args = build_parser().parse_args(argv)
    cfg = RunConfig(command=args.command)
    known = set(RunConfig.__dataclass_fields__) - {"command"}
    if args.config:
        try:
            file_values = read_config_file(args.config)
        except OSError as exc:
            raise UsageError(f"--config: {exc}") from None
        for key, values in file_values.items():
            if key == "command":
                continue
            if key not in known or not hasattr(args, key):
                raise UsageError(f"config key {key!r} is not an option of {args.command!r}")
            setattr(cfg, key, _coerce(key, values, getattr(cfg, key)))
    for key in known:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    return cfg, bool(getattr(args, "verbose", False))


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg, verbose = config_from_args(argv)
    except UsageError as exc:
        print(f"qmemcap: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(name)s: %(message)s")
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
