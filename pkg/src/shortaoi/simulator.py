"""Monte Carlo simulation of status-update links under packet management.

Arrivals are Poisson(lambda); every transmission attempt lasts ``M = m*T_u``
and is decoded independently with probability ``1 - eps``.  The age of the
destination is integrated exactly from the log of counted deliveries.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np
from scipy import stats

from . import _kernels
from .analytics import LinkTiming, SchemeKind
from .channel import Blocklength, ChannelConfig, bler

_KERNELS = {
    SchemeKind.NP: _kernels.run_np,
    SchemeKind.PR: _kernels.run_pr,
    SchemeKind.RT: _kernels.run_rt,
    SchemeKind.FCFS: _kernels.run_fcfs,
}

ARRIVAL_STREAM = 0
DECODE_STREAM = 1
MIN_STATS_DELIVERIES = 1000
DEFAULT_CHUNK = 1 << 16
MAX_TRACE_EVENTS = 100_000


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SimSettings:
    target_deliveries: int = 50_000
    replications: int = 20
    warmup_fraction: float = 0.02
    base_seed: int = 0
    scheme: SchemeKind | None = None

    def __post_init__(self):
        if int(self.target_deliveries) != self.target_deliveries or self.target_deliveries < 1:
            raise SimulationError(f"target_deliveries must be a positive integer, got {self.target_deliveries!r}")
        if int(self.replications) != self.replications or self.replications < 1:
            raise SimulationError(f"replications must be a positive integer, got {self.replications!r}")
        if not (0.0 <= self.warmup_fraction < 0.5):
            raise SimulationError(f"warmup_fraction must lie in [0, 0.5), got {self.warmup_fraction!r}")
        if not (0 <= int(self.base_seed) < 2**64):
            raise SimulationError(f"base_seed must be an unsigned 64-bit integer, got {self.base_seed!r}")

    @property
    def pooled_deliveries(self) -> int:
        return self.target_deliveries * self.replications


@dataclass(frozen=True)
class SimResult:
    mean_aoi: float
    ci_halfwidth_95: float
    delivered_count: int
    sim_duration: float
    per_replication_means: list[float]
    stable: bool
    seed: int
    growth_slope: float | None = None


@dataclass
class DeliveryLog:
    """Counted deliveries of one replication, in delivery order.

    ``first_gen_time[i]`` is the first generation after delivery ``i-1``
    (NaN for FCFS, where it carries no meaning).
    """

    delivery_time: np.ndarray
    gen_time: np.ndarray
    first_gen_time: np.ndarray
    service_starts: int = 0
    preemptions: int = 0
    attempts: int = 0
    discarded_arrivals: int = 0

    @property
    def interdeparture(self) -> np.ndarray:
        return np.diff(self.delivery_time, prepend=0.0)

    @property
    def service(self) -> np.ndarray:
        return self.delivery_time - self.gen_time

    @property
    def wait(self) -> np.ndarray:
        return self.first_gen_time - np.concatenate(([0.0], self.delivery_time[:-1]))

    @property
    def k_interval(self) -> np.ndarray:
        return self.delivery_time - self.first_gen_time


def replication_seeds(base_seed: int, replication: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Arrival and decode seed sequences of one replication; a pure function of its inputs."""
    return tuple(
        np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(replication), stream))
        for stream in (ARRIVAL_STREAM, DECODE_STREAM)
    )


class _Stream:
    """Lazily extended block of draws from one generator."""

    def __init__(self, seed_seq, draw, lam=None):
        self._rng = np.random.Generator(np.random.PCG64(seed_seq))
        self._draw = draw
        self._blocks: list[np.ndarray] = []
        self.values = np.empty(0)

    def extend(self, n: int) -> np.ndarray:
        self._blocks.append(self._draw(self._rng, int(n)))
        self.values = np.concatenate(self._blocks)
        return self.values


def _arrival_stream(seed_seq, lam):
    return _Stream(seed_seq, lambda rng, n: rng.exponential(1.0 / lam, size=n))


def _decode_stream(seed_seq):
    return _Stream(seed_seq, lambda rng, n: rng.random(size=n))


def fcfs_load(eps: float, lam: float, M: float) -> float:
    """Offered load ``lam * M / (1 - eps)`` of the FCFS retransmission queue."""
    if eps >= 1.0:
        return math.inf
    return lam * M / (1.0 - eps)


def fcfs_stable(eps: float, lam: float, M: float) -> bool:
    return fcfs_load(eps, lam, M) < 1.0


def _blocklength(m) -> float:
    if isinstance(m, Blocklength):
        return m.m
    if not m >= 1:
        raise SimulationError(f"blocklength must be >= 1, got {m!r}")
    return m


def run_replication(
    scheme,
    eps: float,
    lam: float,
    M: float,
    target: int,
    base_seed: int,
    replication: int,
    chunk: int = DEFAULT_CHUNK,
) -> DeliveryLog:
    """Simulate one replication until ``target`` counted deliveries."""
    scheme = SchemeKind.parse(scheme)
    if not (0.0 <= eps < 1.0):
        raise SimulationError(f"BLER must lie in [0, 1), got {eps!r}")
    if not (lam > 0 and M > 0):
        raise SimulationError("generation rate and service duration must be positive")
    kernel = _KERNELS[scheme]
    arr_seed, dec_seed = replication_seeds(base_seed, replication)
    arrivals = _arrival_stream(arr_seed, lam)
    decodes = _decode_stream(dec_seed)
    arrivals.extend(chunk)
    decodes.extend(chunk)
    gen = np.cumsum(arrivals.values)
    d = np.empty(target)
    s = np.empty(target)
    g = np.empty(target)
    while True:
        counters = np.zeros(_kernels.N_COUNTERS, dtype=np.int64)
        status, n = kernel(gen, decodes.values, float(eps), float(M), int(target), d, s, g, counters)
        if status == _kernels.OK:
            break
        if status == _kernels.NEED_ARRIVALS:
            arrivals.extend(max(chunk, len(arrivals.values) // 2))
            gen = np.cumsum(arrivals.values)
        else:
            decodes.extend(max(chunk, len(decodes.values) // 2))
    return DeliveryLog(d, s, g, *(int(c) for c in counters))


def _area_after(log: DeliveryLog, warmup_fraction: float) -> tuple[float, float, np.ndarray]:
    """Exact age integral and duration after the warmup cut, plus the kept peak ages.

    Age starts at 0 at t = 0 as if an update generated at 0 was just delivered.
    """
    d = log.delivery_time
    s = log.gen_time
    d_prev = np.concatenate(([0.0], d[:-1]))
    s_prev = np.concatenate(([0.0], s[:-1]))
    end = d[-1]
    cut = warmup_fraction * end
    keep = d > cut
    start = np.maximum(d_prev[keep], cut)
    age0 = start - s_prev[keep]
    span = d[keep] - start
    area = float(np.sum(age0 * span + 0.5 * span * span))
    peaks = d[keep] - s_prev[keep]
    return area, end - cut, peaks


def _t_halfwidth(means: list[float]) -> float:
    r = len(means)
    if r < 2:
        return math.inf
    sd = float(np.std(means, ddof=1))
    return float(stats.t.ppf(0.975, r - 1)) * sd / math.sqrt(r)


def _resolve(scheme, m, ch, timing, settings):
    scheme = SchemeKind.parse(scheme if scheme is not None else settings.scheme)
    m = _blocklength(m)
    eps = bler(m, ch)
    return scheme, eps, timing.gen_rate, timing.service_duration(m)


def _unstable(settings: SimSettings, slope=None) -> SimResult:
    return SimResult(math.nan, math.nan, 0, 0.0, [], False, int(settings.base_seed), slope)


def growth_slope(log: DeliveryLog) -> float:
    """Least-squares slope of the post-delivery age against time (diagnostic for FCFS overload)."""
    return float(np.polyfit(log.delivery_time, log.service, 1)[0])


def delivery_logs(scheme, m, ch: ChannelConfig, timing: LinkTiming, settings: SimSettings,
                  chunk: int = DEFAULT_CHUNK) -> list[DeliveryLog]:
    scheme, eps, lam, M = _resolve(scheme, m, ch, timing, settings)
    return [
        run_replication(scheme, eps, lam, M, settings.target_deliveries, settings.base_seed, r, chunk)
        for r in range(settings.replications)
    ]


def _simulate(scheme, m, ch, timing, settings, peak, chunk, diagnose_unstable):
    scheme, eps, lam, M = _resolve(scheme, m, ch, timing, settings)
    if scheme is SchemeKind.FCFS and not fcfs_stable(eps, lam, M):
        if not diagnose_unstable:
            return _unstable(settings)
        log = run_replication(scheme, eps, lam, M, settings.target_deliveries, settings.base_seed, 0, chunk)
        return _unstable(settings, growth_slope(log))
    totals, durations, counts, means = [], [], [], []
    for r in range(settings.replications):
        log = run_replication(scheme, eps, lam, M, settings.target_deliveries, settings.base_seed, r, chunk)
        area, duration, peaks = _area_after(log, settings.warmup_fraction)
        if peak:
            totals.append(float(np.sum(peaks)))
            durations.append(float(len(peaks)))
        else:
            totals.append(area)
            durations.append(duration)
        counts.append(len(log.delivery_time))
        means.append(totals[-1] / durations[-1])
    return SimResult(
        mean_aoi=math.fsum(totals) / math.fsum(durations),
        ci_halfwidth_95=_t_halfwidth(means),
        delivered_count=int(sum(counts)),
        sim_duration=math.fsum(durations) if not peak else math.nan,
        per_replication_means=means,
        stable=True,
        seed=int(settings.base_seed),
    )


def simulate(scheme, m, ch: ChannelConfig, timing: LinkTiming, settings: SimSettings,
             chunk: int = DEFAULT_CHUNK, diagnose_unstable: bool = False) -> SimResult:
    """Time-average AoI over independent replications with a Student-t 95% CI.

    An overloaded FCFS queue is not simulated; the result comes back with
    ``stable=False`` and NaN statistics (``diagnose_unstable`` runs one
    replication anyway and reports the age growth slope).
    """
    return _simulate(scheme, m, ch, timing, settings, False, chunk, diagnose_unstable)


def simulate_peak_aoi(scheme, m, ch: ChannelConfig, timing: LinkTiming, settings: SimSettings,
                      chunk: int = DEFAULT_CHUNK) -> SimResult:
    """Average of the age reached just before each counted delivery."""
    return _simulate(scheme, m, ch, timing, settings, True, chunk, False)


# ---------------------------------------------------------------- event trace


class TraceEvent(NamedTuple):
    time: float
    event: str
    update_gen_time: float
    detail: str = ""


GENERATION = "generation"
SERVICE_START = "service_start"
ATTEMPT_SUCCESS = "attempt_success"
ATTEMPT_FAILURE = "attempt_failure"
PREEMPTION = "preemption"
DISCARD = "discard"
DELIVERY = "delivery"


class _Draws:
    def __init__(self, stream: _Stream, chunk: int):
        self._stream = stream
        self._chunk = chunk
        self._i = 0

    def next(self) -> float:
        if self._i >= len(self._stream.values):
            self._stream.extend(self._chunk)
        v = self._stream.values[self._i]
        self._i += 1
        return float(v)


def _arrival_times(draws: _Draws) -> Iterator[float]:
    t = 0.0
    while True:
        t = t + draws.next()
        yield t


def _trace_events(scheme, eps, M, arrivals, decodes) -> Iterator[TraceEvent]:
    gens = _arrival_times(arrivals)
    g = next(gens)
    last_delivered = 0.0
    if scheme is SchemeKind.FCFS:
        free = 0.0
        pending = []
        while True:
            yield TraceEvent(g, GENERATION, g)
            pending.append(g)
            nxt = next(gens)
            # serve queued updates that start before the next generation
            while pending and max(pending[0], free) < nxt:
                head = pending.pop(0)
                start = max(head, free)
                yield TraceEvent(start, SERVICE_START, head)
                j = 1
                while True:
                    end = start + j * M
                    if decodes.next() >= eps:
                        yield TraceEvent(end, ATTEMPT_SUCCESS, head, f"attempt={j}")
                        yield TraceEvent(end, DELIVERY, head)
                        break
                    yield TraceEvent(end, ATTEMPT_FAILURE, head, f"attempt={j}")
                    j += 1
                free = end
            g = nxt
        return

    while True:
        yield TraceEvent(g, GENERATION, g)
        yield TraceEvent(g, SERVICE_START, g)
        nxt = next(gens)
        if scheme is SchemeKind.NP:
            end = g + M
            while nxt < end:
                yield TraceEvent(nxt, GENERATION, nxt)
                yield TraceEvent(nxt, DISCARD, nxt, "server busy")
                nxt = next(gens)
            if decodes.next() >= eps:
                yield TraceEvent(end, ATTEMPT_SUCCESS, g, "attempt=1")
                yield TraceEvent(end, DELIVERY, g)
            else:
                yield TraceEvent(end, ATTEMPT_FAILURE, g, "attempt=1")
        elif scheme is SchemeKind.PR:
            if nxt < g + M:
                yield TraceEvent(nxt, PREEMPTION, g)
            elif decodes.next() >= eps:
                yield TraceEvent(g + M, ATTEMPT_SUCCESS, g, "attempt=1")
                yield TraceEvent(g + M, DELIVERY, g)
            else:
                yield TraceEvent(g + M, ATTEMPT_FAILURE, g, "attempt=1")
        else:
            j = 1
            delivered = False
            while g + j * M <= nxt:
                end = g + j * M
                if delivered:
                    yield TraceEvent(end, DISCARD, g, f"duplicate attempt={j}")
                elif decodes.next() >= eps:
                    yield TraceEvent(end, ATTEMPT_SUCCESS, g, f"attempt={j}")
                    yield TraceEvent(end, DELIVERY, g)
                    delivered = True
                else:
                    yield TraceEvent(end, ATTEMPT_FAILURE, g, f"attempt={j}")
                j += 1
            if not delivered:
                yield TraceEvent(nxt, PREEMPTION, g)
        g = nxt


def event_trace(scheme, m, ch: ChannelConfig, timing: LinkTiming, seed: int,
                max_events: int = 10_000, replication: int = 0) -> list[TraceEvent]:
    """Time-ordered event log of one replication, truncated to ``max_events``.

    The trace consumes the same random streams as ``simulate`` so its
    deliveries coincide with the compiled event loop.
    """
    if max_events > MAX_TRACE_EVENTS:
        raise SimulationError(f"max_events is capped at {MAX_TRACE_EVENTS}")
    scheme = SchemeKind.parse(scheme)
    m = _blocklength(m)
    eps = bler(m, ch)
    M = timing.service_duration(m)
    arr_seed, dec_seed = replication_seeds(seed, replication)
    arrivals = _Draws(_arrival_stream(arr_seed, timing.gen_rate), 4096)
    decodes = _Draws(_decode_stream(dec_seed), 4096)
    out = []
    for ev in _trace_events(scheme, eps, M, arrivals, decodes):
        if len(out) >= max_events:
            break
        out.append(ev)
    if scheme is SchemeKind.FCFS:
        out.sort(key=lambda e: e.time)
    return out


@dataclass
class TraceIntervals:
    wait: np.ndarray
    k_interval: np.ndarray
    interdeparture: np.ndarray
    service: np.ndarray
    delivery_time: np.ndarray = field(repr=False)


def trace_intervals(events: list[TraceEvent]) -> TraceIntervals:
    """Per-delivery ``W, K, Y, S`` reconstructed from a trace."""
    w, k, y, s, dts = [], [], [], [], []
    last_d = 0.0
    first_gen = None
    for ev in events:
        if ev.event == GENERATION and first_gen is None and ev.time > last_d:
            first_gen = ev.time
        elif ev.event == DELIVERY:
            if first_gen is None:
                first_gen = math.nan
            w.append(first_gen - last_d)
            k.append(ev.time - first_gen)
            y.append(ev.time - last_d)
            s.append(ev.time - ev.update_gen_time)
            dts.append(ev.time)
            last_d = ev.time
            first_gen = None
    return TraceIntervals(*(np.asarray(v) for v in (w, k, y, s, dts)))


TRACE_HEADER = ("time", "event", "update_gen_time", "detail")


def write_trace_csv(events: list[TraceEvent], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for ev in events:
            writer.writerow((repr(ev.time), ev.event, repr(ev.update_gen_time), ev.detail))
