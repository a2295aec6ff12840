"""AoI-minimising blocklength per scheme.

NP, PR and RT are solved from their stationarity equations: an integer sign
scan brackets every root, bisection refines it, and the better adjacent
integer is returned.  FCFS has no closed form and is optimised by simulating
every grid point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .analytics import LinkTiming, SchemeKind, UnsupportedSchemeError, moments_for
from .channel import ChannelConfig, bler, bler_derivative
from .simulator import SimSettings, fcfs_stable, simulate

DEFAULT_RANGE = (110, 5000)
BISECT_XTOL = 1e-4
EPS_CEILING = 1.0 - 1e-12
TIE_RTOL = 1e-15

ROOT_FIND = "root_find"
EXHAUSTIVE = "exhaustive"
SIMULATION_GRID = "simulation_grid"


class OptimizationError(ValueError):
    pass


class AllPointsUnstableError(OptimizationError):
    pass


@dataclass(frozen=True)
class StationarityResidual:
    scheme: SchemeKind
    m: float
    residual: float


@dataclass(frozen=True)
class OptimizationResult:
    scheme: SchemeKind
    m_continuous: float
    m_integer: int
    aoi_at_optimum: float
    method: str
    bracket: tuple[float, float]
    converged: bool
    roots: tuple[float, ...] = ()
    unstable_points: tuple[int, ...] = field(default=(), repr=False)


def _eps_checked(m, ch):
    eps = bler(m, ch)
    if eps >= EPS_CEILING:
        raise OptimizationError(f"BLER is numerically 1 at m={m}; stationarity residual undefined")
    return eps


def np_residual(m: float, ch: ChannelConfig, timing: LinkTiming) -> float:
    """Left minus right side of the NP stationarity equation; equals dAoI/dm."""
    eps = _eps_checked(m, ch)
    tu, lam = timing.symbol_time, timing.gen_rate
    a = tu * m + 1.0 / lam
    lhs = tu * ((1.0 - eps * eps) / (2.0 * (1.0 - eps) ** 2) + 1.0) + a / (1.0 - eps) ** 2 * bler_derivative(m, ch)
    return lhs - tu / (2.0 * lam**2 * a * a)


def pr_residual(m: float, ch: ChannelConfig, timing: LinkTiming) -> float:
    """PR stationarity residual; has the sign of dAoI/dm."""
    eps = _eps_checked(m, ch)
    return timing.gen_rate * timing.symbol_time * (1.0 - eps) + bler_derivative(m, ch)


def rt_residual(m: float, ch: ChannelConfig, timing: LinkTiming) -> float:
    """RT stationarity residual; has the sign of dAoI/dm."""
    eps = _eps_checked(m, ch)
    lt = timing.gen_rate * timing.symbol_time
    return lt * (1.0 - eps) + bler_derivative(m, ch) * -math.expm1(-lt * m)


_RESIDUALS = {SchemeKind.NP: np_residual, SchemeKind.PR: pr_residual, SchemeKind.RT: rt_residual}


def residual(scheme, m: float, ch: ChannelConfig, timing: LinkTiming) -> StationarityResidual:
    scheme = _closed_form(scheme)
    return StationarityResidual(scheme, float(m), _RESIDUALS[scheme](m, ch, timing))


def _closed_form(scheme) -> SchemeKind:
    scheme = SchemeKind.parse(scheme)
    if not scheme.has_closed_form:
        raise UnsupportedSchemeError(f"{scheme.value} is optimised by simulation; use fcfs_grid_optimize")
    return scheme


def analytic_aoi(scheme, m, ch: ChannelConfig, timing: LinkTiming) -> float:
    """Closed-form average AoI, or ``inf`` where the BLER is numerically 1."""
    eps = bler(m, ch)
    if eps >= 1.0:
        return math.inf
    return moments_for(scheme, eps, timing.gen_rate, timing.service_duration(m)).avg_aoi


def _check_range(m_range):
    lo, hi = (int(v) for v in m_range[:2])
    if lo != m_range[0] or hi != m_range[1] or not 1 <= lo < hi:
        raise OptimizationError(f"need integer range 1 <= lo < hi, got {m_range!r}")
    return lo, hi


def argmin_first(values) -> int:
    """Index of the minimum; values within a relative 1e-15 of it tie toward the lowest index."""
    values = np.asarray(values, dtype=float)
    best = np.min(values)
    if not math.isfinite(best):
        raise OptimizationError("no finite value to minimise")
    return int(np.flatnonzero(values - best <= TIE_RTOL * abs(best))[0])


def exhaustive_search(scheme, ch: ChannelConfig, timing: LinkTiming, m_range=DEFAULT_RANGE) -> OptimizationResult:
    """Closed-form AoI at every integer blocklength of the range; argmin wins."""
    scheme = _closed_form(scheme)
    lo, hi = _check_range(m_range)
    ms = np.arange(lo, hi + 1)
    values = [analytic_aoi(scheme, int(m), ch, timing) for m in ms]
    if not any(math.isfinite(v) for v in values):
        raise OptimizationError(f"AoI undefined over the whole range [{lo}, {hi}]")
    i = argmin_first(values)
    return OptimizationResult(scheme, float(ms[i]), int(ms[i]), values[i], EXHAUSTIVE, (lo, hi), True)


def _sign_changes(f, ms):
    """Adjacent grid pairs where ``f`` changes sign (undefined points skipped)."""
    vals = []
    for m in ms:
        try:
            vals.append((int(m), f(float(m))))
        except OptimizationError:
            continue
    pairs = []
    for (m0, v0), (m1, v1) in zip(vals, vals[1:]):
        if v0 == 0.0:
            pairs.append((m0, m0))
        elif v0 < 0.0 < v1 or v1 < 0.0 < v0:
            pairs.append((m0, m1))
    if vals and vals[-1][1] == 0.0:
        pairs.append((vals[-1][0], vals[-1][0]))
    return pairs, len(vals)


def solve_blocklength(scheme, ch: ChannelConfig, timing: LinkTiming, search_range=DEFAULT_RANGE) -> OptimizationResult:
    """Stationary point of the closed-form AoI by sign scan plus bisection.

    Every bracketed root is refined; the one whose better adjacent integer
    gives the lowest AoI is reported.  Without a sign change the exhaustive
    grid minimum is returned with ``converged=False``.
    """
    scheme = _closed_form(scheme)
    lo, hi = _check_range(search_range)
    f = lambda m: _RESIDUALS[scheme](m, ch, timing)  # noqa: E731
    pairs, n_defined = ([], 0) if hi - lo < 2 else _sign_changes(f, range(lo, hi + 1))
    if hi - lo >= 2 and n_defined == 0:
        raise OptimizationError(f"AoI undefined over the whole range [{lo}, {hi}]")
    best = None
    roots = []
    for a, b in pairs:
        root = float(a) if a == b else bisect(f, float(a), float(b), xtol=BISECT_XTOL)
        roots.append(root)
        cands = sorted({max(lo, math.floor(root)), min(hi, math.ceil(root))})
        vals = [analytic_aoi(scheme, c, ch, timing) for c in cands]
        j = argmin_first(vals)
        if best is None or vals[j] < best[2]:
            best = (root, cands[j], vals[j], (float(a), float(b)))
    if best is None:
        fallback = exhaustive_search(scheme, ch, timing, (lo, hi))
        return OptimizationResult(scheme, fallback.m_continuous, fallback.m_integer, fallback.aoi_at_optimum,
                                  ROOT_FIND, (lo, hi), False)
    root, m_int, value, bracket = best
    return OptimizationResult(scheme, root, m_int, value, ROOT_FIND, bracket, True, tuple(roots))


def fcfs_grid_optimize(ch: ChannelConfig, timing: LinkTiming, m_range, sim_settings: SimSettings,
                       step: int = 1) -> OptimizationResult:
    """Simulated FCFS AoI at every stable grid blocklength; argmin of the means.

    Every grid point reuses ``sim_settings.base_seed``; unstable points are
    skipped and listed in ``unstable_points``.
    """
    lo, hi = _check_range(m_range)
    ms = list(range(lo, hi + 1, step))
    unstable = []
    stable_ms, means = [], []
    for m in ms:
        eps = bler(m, ch)
        if eps >= 1.0 or not fcfs_stable(eps, timing.gen_rate, timing.service_duration(m)):
            unstable.append(m)
            continue
        res = simulate(SchemeKind.FCFS, m, ch, timing, sim_settings)
        stable_ms.append(m)
        means.append(res.mean_aoi)
    if not stable_ms:
        raise AllPointsUnstableError(
            f"FCFS is unstable at every blocklength in [{lo}, {hi}] for lambda={timing.gen_rate}"
        )
    i = argmin_first(means)
    return OptimizationResult(SchemeKind.FCFS, float(stable_ms[i]), stable_ms[i], means[i], SIMULATION_GRID,
                              (lo, hi), True, unstable_points=tuple(unstable))
