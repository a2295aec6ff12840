"""Closed-form renewal moments and average/peak AoI of the NP, PR and RT schemes.

Every scheme is described through the interdeparture interval ``Y = W + K``
(wait for a fresh generation, then generation-to-delivery) and the service
time ``S`` of delivered updates, recombined as
``avg_aoi = E[Y^2] / (2 E[Y]) + E[S]`` and ``peak_aoi = E[Y] + E[S]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .channel import Blocklength, ChannelConfig, bler


class AnalyticsDomainError(ValueError):
    pass


class UnsupportedSchemeError(ValueError):
    pass


class SchemeKind(str, enum.Enum):
    NP = "NP"
    PR = "PR"
    RT = "RT"
    FCFS = "FCFS"

    @property
    def has_closed_form(self) -> bool:
        return self is not SchemeKind.FCFS

    @classmethod
    def parse(cls, value) -> "SchemeKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}; expected one of {[s.value for s in cls]}") from None


@dataclass(frozen=True)
class LinkTiming:
    symbol_time: float
    gen_rate: float

    def __post_init__(self):
        object.__setattr__(self, "symbol_time", float(self.symbol_time))
        object.__setattr__(self, "gen_rate", float(self.gen_rate))
        if not (self.symbol_time > 0 and math.isfinite(self.symbol_time)):
            raise AnalyticsDomainError(f"symbol_time must be positive, got {self.symbol_time!r}")
        if not (self.gen_rate > 0 and math.isfinite(self.gen_rate)):
            raise AnalyticsDomainError(f"gen_rate must be positive, got {self.gen_rate!r}")

    def service_duration(self, m) -> float:
        """Duration ``M = m * T_u`` of one transmission attempt."""
        if isinstance(m, Blocklength):
            m = m.m
        return float(m) * self.symbol_time


@dataclass(frozen=True)
class AoiMoments:
    mean_service: float
    mean_interdeparture: float
    second_moment_interdeparture: float
    mean_wait: float
    mean_k: float
    second_moment_k: float
    avg_aoi: float
    peak_aoi: float

    def recombined_aoi(self) -> float:
        return self.second_moment_interdeparture / (2.0 * self.mean_interdeparture) + self.mean_service


def _check_eps(eps: float) -> float:
    if not (0.0 <= eps < 1.0):
        raise AnalyticsDomainError(f"BLER must lie in [0, 1), got {eps!r}")
    return float(eps)


def _check_rate_time(lam: float, M: float):
    if not (lam > 0 and math.isfinite(lam)):
        raise AnalyticsDomainError(f"generation rate must be positive, got {lam!r}")
    if not (M > 0 and math.isfinite(M)):
        raise AnalyticsDomainError(f"service duration must be positive, got {M!r}")


def preemption_prob(lam: float, M: float) -> float:
    """Probability that a Poisson(lam) arrival falls inside an attempt of length M."""
    if not (M > 0) or not (lam >= 0):
        raise AnalyticsDomainError(f"need lam >= 0 and M > 0, got lam={lam!r}, M={M!r}")
    return -math.expm1(-lam * M)


_SERIES_CUTOFF = 0.1
# Taylor coefficients of E[X|X<M]/M and E[X^2|X<M]/M^2 in x = lam*M
_FIRST_SERIES = (1 / 2, -1 / 12, 0.0, 1 / 720, 0.0, -1 / 30240, 0.0, 1 / 1209600)
_SECOND_SERIES = (1 / 3, -1 / 12, 1 / 360, 1 / 720, -1 / 15120, -1 / 30240, 1 / 604800, 1 / 1209600)


def _poly(coeffs, x):
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def cond_moments_truncated_exp(lam: float, M: float) -> tuple[float, float]:
    """First and second moment of an Exp(lam) variable conditioned on being below M."""
    _check_rate_time(lam, M)
    x = lam * M
    if x < _SERIES_CUTOFF:
        return M * _poly(_FIRST_SERIES, x), M * M * _poly(_SECOND_SERIES, x)
    # M/p = M + M/expm1(x): the M terms cancel analytically
    tail = math.expm1(x)
    first = 1.0 / lam - M / tail
    second = 2.0 / lam**2 - (2.0 * M / lam + M * M) / tail
    return first, second


def np_moments(eps: float, lam: float, M: float) -> AoiMoments:
    """Non-preemption: arrivals during service are dropped, one attempt per update."""
    eps = _check_eps(eps)
    _check_rate_time(lam, M)
    a = M + 1.0 / lam
    mean_k = (eps / lam + M) / (1.0 - eps)
    second_k = (lam**2 * M**2 + lam**2 * M**2 * eps + 4.0 * lam * M * eps + 2.0 * eps) / (lam**2 * (1.0 - eps) ** 2)
    mean_y = a / (1.0 - eps)
    second_y = a * a * (1.0 + eps) / (1.0 - eps) ** 2 + 1.0 / (lam**2 * (1.0 - eps))
    avg = a * (1.0 + eps) / (2.0 * (1.0 - eps)) + 1.0 / (2.0 * lam**2 * a) + M
    return AoiMoments(
        mean_service=M,
        mean_interdeparture=mean_y,
        second_moment_interdeparture=second_y,
        mean_wait=1.0 / lam,
        mean_k=mean_k,
        second_moment_k=second_k,
        avg_aoi=avg,
        peak_aoi=mean_y + M,
    )


def pr_moments(eps: float, lam: float, M: float) -> AoiMoments:
    """Preemption: a fresh update always replaces the one in service."""
    eps = _check_eps(eps)
    _check_rate_time(lam, M)
    p = preemption_prob(lam, M)
    q = math.exp(-lam * M)  # 1 - p without cancellation
    # rate of successful deliveries
    rate = lam * q * (1.0 - eps)
    s = p + eps - p * eps
    mean_y = 1.0 / rate
    second_k = 2.0 * s * (1.0 / lam + M) / (lam * (q * (1.0 - eps)) ** 2) - 2.0 * M / (lam * (q * (1.0 - eps)) ** 2)
    second_y = 2.0 / rate**2 - 2.0 * M / rate
    avg = math.exp(lam * M) / (lam * (1.0 - eps))
    return AoiMoments(
        mean_service=M,
        mean_interdeparture=mean_y,
        second_moment_interdeparture=second_y,
        mean_wait=1.0 / lam,
        mean_k=s / rate,
        second_moment_k=second_k,
        avg_aoi=avg,
        peak_aoi=mean_y + M,
    )


def rt_success_stats(eps: float, p: float, M: float) -> tuple[float, float]:
    """Return ``(E_S, p_S)`` for retransmission until success or preemption.

    ``p_S`` is the probability that an update is decoded before a newer one
    arrives and ``E_S`` the service time accumulated on that event.
    """
    eps = _check_eps(eps)
    if not (0.0 <= p < 1.0):
        raise AnalyticsDomainError(f"preemption probability must lie in [0, 1), got {p!r}")
    if not (M > 0):
        raise AnalyticsDomainError(f"service duration must be positive, got {M!r}")
    return _success_stats(eps, p, 1.0 - p, M)


def _success_stats(eps, p, q, M):
    keep = 1.0 - eps * q
    e_s = q * (1.0 - eps) * M / keep**2
    p_s = q * (1.0 - eps) / keep
    return e_s, p_s


def rt_moments(eps: float, lam: float, M: float) -> AoiMoments:
    """Retransmission: PR plus repeated attempts of the current update."""
    eps = _check_eps(eps)
    _check_rate_time(lam, M)
    p = preemption_prob(lam, M)
    q = math.exp(-lam * M)
    e_s, p_s = _success_stats(eps, p, q, M)
    base = lam * q * (1.0 - eps)
    mean_y = (1.0 - eps + p * eps) / base
    second_y = 2.0 * mean_y**2 - 2.0 * M / base
    mean_s = e_s / p_s
    return AoiMoments(
        mean_service=mean_s,
        mean_interdeparture=mean_y,
        second_moment_interdeparture=second_y,
        mean_wait=1.0 / lam,
        mean_k=p / base,
        second_moment_k=2.0 * p * (1.0 - eps + p * eps) / base**2 - 2.0 * M / base,
        avg_aoi=(1.0 - eps * q) * math.exp(lam * M) / (lam * (1.0 - eps)),
        peak_aoi=mean_y + mean_s,
    )


_MOMENTS = {SchemeKind.NP: np_moments, SchemeKind.PR: pr_moments, SchemeKind.RT: rt_moments}


def moments_for(scheme, eps: float, lam: float, M: float) -> AoiMoments:
    scheme = SchemeKind.parse(scheme)
    if not scheme.has_closed_form:
        raise UnsupportedSchemeError(f"{scheme.value} has no closed-form AoI; use the simulator")
    return _MOMENTS[scheme](eps, lam, M)


def scheme_aoi(scheme, m, ch: ChannelConfig, timing: LinkTiming) -> AoiMoments:
    """Closed-form moments for ``scheme`` at blocklength ``m`` on the given link."""
    scheme = SchemeKind.parse(scheme)
    if not scheme.has_closed_form:
        raise UnsupportedSchemeError(f"{scheme.value} has no closed-form AoI; use the simulator")
    return moments_for(scheme, bler(m, ch), timing.gen_rate, timing.service_duration(m))
