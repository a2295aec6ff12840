"""Command-line front end: ``analyze``, ``simulate``, ``optimize`` and ``validate``.

Exit codes: 0 success, 1 analytic/simulation validation failure, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import analytics
from .analytics import LinkTiming, SchemeKind
from .channel import ChannelConfig, bler, is_loose
from .config import (
    REFERENCE_RATES,
    VALIDATION_BLOCKLENGTHS,
    ConfigError,
    ScenarioConfig,
    default_rate_sweep,
    load_config,
    parse_range,
    parse_rates,
    parse_schemes,
)
from .optimizer import AllPointsUnstableError, exhaustive_search, fcfs_grid_optimize, solve_blocklength
from .simulator import fcfs_stable, simulate

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_CONFIG = 2

REL_TOLERANCE = 0.01
ANALYZE_RANGE = (110, 1000, 10)

SWEEP_HEADER = ("scheme", "lambda", "m", "M", "epsilon", "analytic_aoi", "analytic_peak_aoi",
                "simulated_aoi", "ci95", "flags")
OPTIMIZE_HEADER = ("scheme", "lambda", "m_opt", "m_continuous", "aoi_opt", "method", "converged",
                   "exhaustive_m", "exhaustive_aoi", "simulated_aoi", "ci95", "flags")
VALIDATE_HEADER = ("scheme", "lambda", "m", "analytic_aoi", "simulated_aoi", "ci95", "rel_error", "in_ci",
                   "passed")

LOOSE = "loose-approximation"
UNSTABLE = "unstable"


def fmt(x) -> str:
    """17 significant digits; scientific notation below 1e-3 in magnitude; blank for missing."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return ""
    if x == 0.0:
        return "0"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if abs(x) < 1e-3:
        return f"{x:.16e}"
    return f"{x:.17g}"


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def _write(text: str, path) -> None:
    if path is None:
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


@dataclass(frozen=True)
class SweepRow:
    scheme: SchemeKind
    lam: float
    m: int
    M: float
    epsilon: float
    analytic_aoi: float | None = None
    analytic_peak_aoi: float | None = None
    simulated_aoi: float | None = None
    ci_halfwidth: float | None = None
    flags: tuple[str, ...] = ()

    def fields(self):
        return (self.scheme.value, self.lam, self.m, self.M, self.epsilon, self.analytic_aoi,
                self.analytic_peak_aoi, self.simulated_aoi, self.ci_halfwidth, ";".join(self.flags))


def _sort_key(scheme, lam, m=0):
    return (list(SchemeKind).index(scheme), lam, m)


def _channel(cfg: ScenarioConfig) -> ChannelConfig:
    try:
        return ChannelConfig.from_db(cfg.payload_bits, cfg.snr_db)
    except ValueError as exc:
        raise ConfigError("channel", str(exc)) from None


def _require_closed_form(cfg: ScenarioConfig):
    bad = [s.value for s in cfg.schemes if not s.has_closed_form]
    if bad:
        raise ConfigError("schemes", f"{', '.join(bad)} has no closed form; allowed here: NP, PR, RT")


def _analytic_row(scheme, lam, m, ch, cfg) -> SweepRow:
    timing = LinkTiming(cfg.symbol_time, lam)
    eps = bler(m, ch)
    M = timing.service_duration(m)
    flags = [LOOSE] if is_loose(m) else []
    if not scheme.has_closed_form:
        if not fcfs_stable(eps, lam, M):
            flags.append(UNSTABLE)
        return SweepRow(scheme, lam, m, M, eps, flags=tuple(flags))
    if eps >= 1.0:
        return SweepRow(scheme, lam, m, M, eps, math.inf, math.inf, flags=tuple(flags))
    mom = analytics.moments_for(scheme, eps, lam, M)
    return SweepRow(scheme, lam, m, M, eps, mom.avg_aoi, mom.peak_aoi, flags=tuple(flags))


def _grid(cfg, rates, ms):
    return sorted(((s, lam, m) for s in cfg.schemes for lam in rates for m in ms), key=lambda t: _sort_key(*t))


def cmd_analyze(cfg: ScenarioConfig) -> list[SweepRow]:
    """Closed-form AoI over the (scheme, lambda, m) grid."""
    _require_closed_form(cfg)
    ch = _channel(cfg)
    rows = [_analytic_row(s, lam, m, ch, cfg) for s, lam, m in _grid(cfg, cfg.rates(REFERENCE_RATES), cfg.grid(ANALYZE_RANGE))]
    _write(to_csv(SWEEP_HEADER, (r.fields() for r in rows)), cfg.output_path)
    return rows


def cmd_simulate(cfg: ScenarioConfig) -> list[SweepRow]:
    """Closed form plus simulated AoI and CI at every grid point; FCFS rows allowed."""
    ch = _channel(cfg)
    rows = []
    for s, lam, m in _grid(cfg, cfg.rates(REFERENCE_RATES), cfg.grid(default_list=VALIDATION_BLOCKLENGTHS)):
        row = _analytic_row(s, lam, m, ch, cfg)
        if UNSTABLE not in row.flags and row.epsilon < 1.0:
            res = simulate(s, m, ch, LinkTiming(cfg.symbol_time, lam), cfg.sim)
            row = replace(row, simulated_aoi=res.mean_aoi, ci_halfwidth=res.ci_halfwidth_95)
        rows.append(row)
    _write(to_csv(SWEEP_HEADER, (r.fields() for r in rows)), cfg.output_path)
    return rows


@dataclass(frozen=True)
class OptimizeRow:
    scheme: SchemeKind
    lam: float
    result: object | None
    exhaustive: object | None = None
    simulated_aoi: float | None = None
    ci_halfwidth: float | None = None
    flags: tuple[str, ...] = ()

    @property
    def aoi(self) -> float:
        return self.result.aoi_at_optimum if self.result is not None else math.nan

    def fields(self):
        r, e = self.result, self.exhaustive
        return (self.scheme.value, self.lam,
                r.m_integer if r else None, r.m_continuous if r else None, r.aoi_at_optimum if r else None,
                r.method if r else "", r.converged if r else None,
                e.m_integer if e else None, e.aoi_at_optimum if e else None,
                self.simulated_aoi, self.ci_halfwidth, ";".join(self.flags))


def cmd_optimize(cfg: ScenarioConfig, exhaustive_check: bool = True) -> list[OptimizeRow]:
    """Optimal blocklength and AoI per (scheme, lambda); FCFS by simulated grid search."""
    ch = _channel(cfg)
    rows = []
    for s, lam, _ in _grid(cfg, cfg.rates(default_rate_sweep()), (0,)):
        timing = LinkTiming(cfg.symbol_time, lam)
        if not s.has_closed_form:
            lo, hi, step = cfg.fcfs_range
            try:
                res = fcfs_grid_optimize(ch, timing, (lo, hi), cfg.sim, step=step)
            except AllPointsUnstableError:
                rows.append(OptimizeRow(s, lam, None, flags=(UNSTABLE,)))
                continue
            rows.append(OptimizeRow(s, lam, res, simulated_aoi=res.aoi_at_optimum))
            continue
        res = solve_blocklength(s, ch, timing, cfg.search_range)
        ex = exhaustive_search(s, ch, timing, cfg.search_range) if exhaustive_check else None
        sim_mean = sim_ci = None
        if cfg.simulate_optimum:
            sim = simulate(s, res.m_integer, ch, timing, cfg.sim)
            sim_mean, sim_ci = sim.mean_aoi, sim.ci_halfwidth_95
        flags = (LOOSE,) if is_loose(res.m_integer) else ()
        rows.append(OptimizeRow(s, lam, res, ex, sim_mean, sim_ci, flags))
    _write(to_csv(OPTIMIZE_HEADER, (r.fields() for r in rows)), cfg.output_path)
    return rows


@dataclass(frozen=True)
class ValidationPoint:
    scheme: SchemeKind
    lam: float
    m: int
    analytic_aoi: float
    simulated_aoi: float
    ci_halfwidth: float

    @property
    def rel_error(self) -> float:
        return abs(self.simulated_aoi - self.analytic_aoi) / self.analytic_aoi

    @property
    def in_ci(self) -> bool:
        return abs(self.simulated_aoi - self.analytic_aoi) <= self.ci_halfwidth

    @property
    def passed(self) -> bool:
        return self.rel_error <= REL_TOLERANCE and self.in_ci

    def fields(self):
        return (self.scheme.value, self.lam, self.m, self.analytic_aoi, self.simulated_aoi, self.ci_halfwidth,
                self.rel_error, self.in_ci, self.passed)


@dataclass(frozen=True)
class ValidationReport:
    points: list[ValidationPoint]

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.points)

    def failing(self) -> list[ValidationPoint]:
        return [p for p in self.points if not p.passed]


def cmd_validate(cfg: ScenarioConfig) -> ValidationReport:
    """Closed form against simulation: within 1% and inside the 95% CI at every point."""
    _require_closed_form(cfg)
    ch = _channel(cfg)
    points = []
    for s, lam, m in _grid(cfg, cfg.rates(REFERENCE_RATES), cfg.grid(default_list=VALIDATION_BLOCKLENGTHS)):
        timing = LinkTiming(cfg.symbol_time, lam)
        analytic = analytics.scheme_aoi(s, m, ch, timing).avg_aoi
        sim = simulate(s, m, ch, timing, cfg.sim)
        points.append(ValidationPoint(s, lam, m, analytic, sim.mean_aoi, sim.ci_halfwidth_95))
    report = ValidationReport(points)
    _write(to_csv(VALIDATE_HEADER, (p.fields() for p in points)), cfg.output_path)
    return report


# ------------------------------------------------------------------ argparse


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML scenario file (default: $SHORTAOI_CONFIG)")
    common.add_argument("--out", help="CSV output path")
    common.add_argument("--seed", help="base seed (unsigned 64-bit)")
    common.add_argument("--schemes", help="comma list, e.g. NP,PR,RT")
    common.add_argument("--lambda", dest="rates", help="comma list of generation rates")
    common.add_argument("--m-range", help="blocklength grid lo:hi:step")
    common.add_argument("--deliveries", help="counted deliveries per replication")
    common.add_argument("--replications", help="independent replications")

    parser = argparse.ArgumentParser(prog="shortaoi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="closed-form AoI sweep")
    sub.add_parser("simulate", parents=[common], help="closed form plus Monte Carlo sweep")
    opt = sub.add_parser("optimize", parents=[common], help="optimal blocklength per scheme and rate")
    opt.add_argument("--simulate-optimum", action="store_true", help="also simulate NP/PR/RT at their optimum")
    opt.add_argument("--no-exhaustive", action="store_true", help="skip the exhaustive-search cross-check")
    sub.add_parser("validate", parents=[common], help="analytic-vs-simulation acceptance grid")
    return parser


def apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    upd = {}
    if args.out:
        upd["output_path"] = Path(args.out)
    if args.schemes is not None:
        upd["schemes"] = parse_schemes(args.schemes, "--schemes")
    if args.rates is not None:
        upd["gen_rates"] = parse_rates(args.rates, "--lambda")
    if args.m_range is not None:
        upd["blocklength_range"] = parse_range(args.m_range, "--m-range")
        upd["blocklengths"] = None
    sim_upd = {}
    for flag, key in (("seed", "base_seed"), ("deliveries", "target_deliveries"), ("replications", "replications")):
        value = getattr(args, flag)
        if value is not None:
            try:
                sim_upd[key] = int(value)
            except ValueError:
                raise ConfigError(f"--{flag}", f"expected an integer, got {value!r}") from None
    if sim_upd:
        try:
            upd["sim"] = replace(cfg.sim, **sim_upd)
        except ValueError as exc:
            raise ConfigError("sim", str(exc)) from None
    if getattr(args, "simulate_optimum", False):
        upd["simulate_optimum"] = True
    return replace(cfg, **upd)


def _summary_sweep(rows, out):
    print(f"{len(rows)} rows", file=out)
    for s in dict.fromkeys(r.scheme for r in rows):
        for lam in sorted({r.lam for r in rows if r.scheme is s}):
            sel = [r for r in rows if r.scheme is s and r.lam == lam]
            key = [r for r in sel if r.analytic_aoi is not None and math.isfinite(r.analytic_aoi)]
            if key:
                best = min(key, key=lambda r: r.analytic_aoi)
                print(f"  {s.value:4s} lambda={lam:<8g} min analytic AoI {best.analytic_aoi:.6g} at m={best.m}", file=out)
            sims = [r for r in sel if r.simulated_aoi is not None]
            if sims:
                print(f"  {s.value:4s} lambda={lam:<8g} simulated points: {len(sims)}, unstable: "
                      f"{sum(UNSTABLE in r.flags for r in sel)}", file=out)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = apply_overrides(load_config(args.config), args)
        if args.command == "analyze":
            _summary_sweep(cmd_analyze(cfg), out)
        elif args.command == "simulate":
            _summary_sweep(cmd_simulate(cfg), out)
        elif args.command == "optimize":
            for row in cmd_optimize(cfg, exhaustive_check=not args.no_exhaustive):
                if row.result is None:
                    print(f"  {row.scheme.value:4s} lambda={row.lam:<10.4g} unstable", file=out)
                else:
                    print(f"  {row.scheme.value:4s} lambda={row.lam:<10.4g} m*={row.result.m_integer:<5d} "
                          f"AoI={row.aoi:.6g}", file=out)
        else:
            report = cmd_validate(cfg)
            for p in report.points:
                print(f"  {'PASS' if p.passed else 'FAIL'} {p.scheme.value:3s} lambda={p.lam:<5g} m={p.m:<5d} "
                      f"analytic={p.analytic_aoi:.6g} simulated={p.simulated_aoi:.6g} "
                      f"+/-{p.ci_halfwidth:.3g} rel={p.rel_error:.2e}", file=out)
            n_bad = len(report.failing())
            print(f"{len(report.points) - n_bad}/{len(report.points)} points passed", file=out)
            return EXIT_OK if report.passed else EXIT_VALIDATION_FAILED
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
