"""Finite-blocklength block error rate of an AWGN link.

The error model is the normal approximation of the maximal coding rate:
a packet of ``N`` bits coded over ``m`` channel uses at SNR ``gamma``
fails with probability ``Q(psi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, log_ndtr

LOG2E = math.log2(math.e)
SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)

# the normal approximation is tight only above this blocklength
LOOSE_BLOCKLENGTH = 100


class ChannelDomainError(ValueError):
    """Raised for a non-positive SNR or a blocklength below one."""


@dataclass(frozen=True)
class ChannelConfig:
    payload_bits: int
    snr_linear: float

    def __post_init__(self):
        if int(self.payload_bits) != self.payload_bits or self.payload_bits < 1:
            raise ChannelDomainError(f"payload_bits must be a positive integer, got {self.payload_bits!r}")
        object.__setattr__(self, "payload_bits", int(self.payload_bits))
        object.__setattr__(self, "snr_linear", float(self.snr_linear))
        if not (self.snr_linear > 0 and math.isfinite(self.snr_linear)):
            raise ChannelDomainError(f"snr_linear must be positive, got {self.snr_linear!r}")

    @classmethod
    def from_db(cls, payload_bits: int, snr_db: float) -> "ChannelConfig":
        return cls(payload_bits, 10.0 ** (snr_db / 10.0))

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr_linear)

    @property
    def half_capacity(self) -> float:
        """``0.5*log2(1+gamma)``, bits per channel use."""
        return 0.5 * math.log2(1.0 + self.snr_linear)

    @property
    def _dispersion_root(self) -> float:
        return math.sqrt(1.0 - 1.0 / (1.0 + self.snr_linear) ** 2)


@dataclass(frozen=True)
class Blocklength:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ChannelDomainError(f"blocklength must be a positive integer, got {self.m!r}")

    @property
    def loose(self) -> bool:
        return is_loose(self.m)

    def __int__(self):
        return int(self.m)


def is_loose(m) -> bool:
    return float(m) <= LOOSE_BLOCKLENGTH


def _as_m(m):
    if isinstance(m, Blocklength):
        m = m.m
    arr = np.asarray(m, dtype=float)
    if np.any(~(arr >= 1.0)):
        raise ChannelDomainError(f"blocklength must be >= 1, got {m!r}")
    return arr


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def q_function(x):
    """Gaussian tail probability ``Q(x) = 0.5*erfc(x/sqrt(2))``."""
    return _out(0.5 * erfc(np.asarray(x, dtype=float) / SQRT2))


def psi(m, ch: ChannelConfig):
    """Argument of the Q-function in the BLER approximation.

    Accepts scalar or array ``m`` (continuous values allowed).
    """
    m = _as_m(m)
    num = ch.half_capacity - ch.payload_bits / m
    den = LOG2E * np.sqrt(1.0 / (2.0 * m)) * ch._dispersion_root
    return _out(num / den)


def bler(m, ch: ChannelConfig):
    """Block error probability ``epsilon = Q(psi(m))``, clipped to [0, 1]."""
    return _out(np.clip(q_function(psi(m, ch)), 0.0, 1.0))


def log_bler(m, ch: ChannelConfig):
    """Natural log of the BLER; stays finite where ``bler`` underflows to 0."""
    return _out(log_ndtr(-np.asarray(psi(m, ch))))


def bler_derivative(m, ch: ChannelConfig):
    """Derivative of the BLER with respect to a continuous blocklength."""
    m = _as_m(m)
    x = np.asarray(psi(m, ch))
    slope = SQRT2 * (ch.payload_bits / (m * np.sqrt(m)) + math.log2(1.0 + ch.snr_linear) / (2.0 * np.sqrt(m)))
    slope = slope / (2.0 * LOG2E * ch._dispersion_root)
    return _out(-np.exp(-0.5 * x * x) / SQRT2PI * slope)
