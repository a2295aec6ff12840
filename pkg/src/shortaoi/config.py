"""Scenario configuration: YAML file, environment default, command-line overrides.

Precedence is flags > file > defaults.  A config file looks like::

    channel:
      payload_bits: 150
      snr_db: 4.5
    link:
      symbol_time: 0.006
      gen_rates: [0.1, 0.33, 1.0]
    sweep:
      schemes: [NP, PR, RT]
      blocklength_range: [110, 1000, 10]   # or: blocklengths: [150, 200, 300]
    sim:
      target_deliveries: 50000
      replications: 20
      warmup_fraction: 0.02
      base_seed: 0
    optimize:
      search_range: [110, 2000]
      fcfs_range: [110, 400, 2]
      simulate_optimum: false
    output_path: results.csv
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .analytics import SchemeKind
from .simulator import SimSettings

CONFIG_ENV = "SHORTAOI_CONFIG"

REFERENCE_RATES = (0.1, 0.33, 1.0)
VALIDATION_BLOCKLENGTHS = (150, 200, 300)


def default_rate_sweep() -> tuple[float, ...]:
    return tuple(float(x) for x in np.geomspace(0.05, 1.2, 20))


class ConfigError(ValueError):
    """Invalid scenario configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ScenarioConfig:
    payload_bits: int = 150
    symbol_time: float = 0.006
    snr_db: float = 4.5
    gen_rates: tuple[float, ...] | None = None
    blocklength_range: tuple[int, int, int] | None = None
    blocklengths: tuple[int, ...] | None = None
    schemes: tuple[SchemeKind, ...] = (SchemeKind.NP, SchemeKind.PR, SchemeKind.RT)
    sim: SimSettings = field(default_factory=SimSettings)
    search_range: tuple[int, int] = (110, 2000)
    fcfs_range: tuple[int, int, int] = (110, 400, 2)
    simulate_optimum: bool = False
    output_path: Path | None = None

    def rates(self, default) -> tuple[float, ...]:
        return tuple(self.gen_rates) if self.gen_rates is not None else tuple(default)

    def grid(self, default_range=None, default_list=None) -> tuple[int, ...]:
        if self.blocklengths is not None:
            return tuple(self.blocklengths)
        if self.blocklength_range is not None:
            lo, hi, step = self.blocklength_range
            return tuple(range(lo, hi + 1, step))
        if default_list is not None:
            return tuple(default_list)
        lo, hi, step = default_range
        return tuple(range(lo, hi + 1, step))


# ------------------------------------------------------------------ parsing


def _num(name, value, kind=float, positive=True):
    if isinstance(value, bool):
        raise ConfigError(name, f"expected a number, got {value!r}")
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a number, got {value!r}") from None
    if kind is int and out != value and not (isinstance(value, str) and str(out) == value.strip()):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if kind is float and not math.isfinite(out):
        raise ConfigError(name, f"must be finite, got {value!r}")
    if positive and out <= 0:
        raise ConfigError(name, f"must be positive, got {value!r}")
    return out


def _list(name, value):
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    if not isinstance(value, (list, tuple)):
        raise ConfigError(name, f"expected a list, got {value!r}")
    return list(value)


def parse_schemes(value, name="schemes") -> tuple[SchemeKind, ...]:
    items = _list(name, value)
    if not items:
        raise ConfigError(name, "at least one scheme is required")
    out = []
    for item in items:
        try:
            out.append(SchemeKind.parse(item))
        except ValueError as exc:
            raise ConfigError(name, str(exc)) from None
    return tuple(dict.fromkeys(out))


def parse_rates(value, name="gen_rates") -> tuple[float, ...]:
    items = _list(name, value)
    if not items:
        raise ConfigError(name, "at least one generation rate is required")
    return tuple(_num(name, v) for v in items)


def parse_range(value, name="blocklength_range", parts=3) -> tuple[int, ...]:
    if isinstance(value, str):
        value = value.split(":")
    items = _list(name, value)
    if parts == 3 and len(items) == 2:
        items.append(1)
    if len(items) != parts:
        raise ConfigError(name, f"expected {parts} fields lo:hi{':step' if parts == 3 else ''}, got {value!r}")
    nums = tuple(_num(name, v, int) for v in items)
    if nums[0] < 1 or nums[1] <= nums[0]:
        raise ConfigError(name, f"need 1 <= lo < hi, got {value!r}")
    return nums


def _section(doc, key):
    sec = doc.get(key, {})
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(key, "expected a mapping section")
    return sec


_KNOWN = {
    "channel": {"payload_bits", "snr_db"},
    "link": {"symbol_time", "gen_rates"},
    "sweep": {"schemes", "blocklength_range", "blocklengths"},
    "sim": {"target_deliveries", "replications", "warmup_fraction", "base_seed"},
    "optimize": {"search_range", "fcfs_range", "simulate_optimum"},
}


def config_from_mapping(doc) -> ScenarioConfig:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config document must be a mapping")
    for key in doc:
        if key not in _KNOWN and key != "output_path":
            raise ConfigError(str(key), "unknown section")
    for sec, allowed in _KNOWN.items():
        for key in _section(doc, sec):
            if key not in allowed:
                raise ConfigError(f"{sec}.{key}", "unknown key")
    cfg = ScenarioConfig()
    ch, link, sweep, sim, opt = (_section(doc, k) for k in _KNOWN)
    updates = {}
    if "payload_bits" in ch:
        updates["payload_bits"] = _num("channel.payload_bits", ch["payload_bits"], int)
    if "snr_db" in ch:
        updates["snr_db"] = _num("channel.snr_db", ch["snr_db"], positive=False)
    if "symbol_time" in link:
        updates["symbol_time"] = _num("link.symbol_time", link["symbol_time"])
    if "gen_rates" in link:
        updates["gen_rates"] = parse_rates(link["gen_rates"], "link.gen_rates")
    if "schemes" in sweep:
        updates["schemes"] = parse_schemes(sweep["schemes"], "sweep.schemes")
    if "blocklength_range" in sweep:
        updates["blocklength_range"] = parse_range(sweep["blocklength_range"], "sweep.blocklength_range")
    if "blocklengths" in sweep:
        updates["blocklengths"] = tuple(
            _num("sweep.blocklengths", v, int) for v in _list("sweep.blocklengths", sweep["blocklengths"])
        )
    if "search_range" in opt:
        updates["search_range"] = parse_range(opt["search_range"], "optimize.search_range", parts=2)
    if "fcfs_range" in opt:
        updates["fcfs_range"] = parse_range(opt["fcfs_range"], "optimize.fcfs_range")
    if "simulate_optimum" in opt:
        if not isinstance(opt["simulate_optimum"], bool):
            raise ConfigError("optimize.simulate_optimum", "expected true or false")
        updates["simulate_optimum"] = opt["simulate_optimum"]
    if sim:
        kw = {}
        for key in ("target_deliveries", "replications"):
            if key in sim:
                kw[key] = _num(f"sim.{key}", sim[key], int)
        if "warmup_fraction" in sim:
            kw["warmup_fraction"] = _num("sim.warmup_fraction", sim["warmup_fraction"], positive=False)
        if "base_seed" in sim:
            kw["base_seed"] = _num("sim.base_seed", sim["base_seed"], int, positive=False)
        try:
            updates["sim"] = replace(cfg.sim, **kw)
        except ValueError as exc:
            raise ConfigError("sim", str(exc)) from None
    if doc.get("output_path") is not None:
        updates["output_path"] = Path(str(doc["output_path"]))
    return replace(cfg, **updates)


def load_config(path=None) -> ScenarioConfig:
    """Read a YAML scenario file; ``None`` falls back to ``$SHORTAOI_CONFIG`` or pure defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return ScenarioConfig()
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "<document>"
        raise ConfigError(where, f"malformed YAML in {path}") from None
    return config_from_mapping(doc)
