#!/usr/bin/env python3
"""Optimal AoI against generation rate, including the simulated FCFS baseline."""
import argparse
import sys
from dataclasses import replace
from pathlib import Path

from shortaoi.analytics import SchemeKind
from shortaoi.cli import cmd_optimize
from shortaoi.config import default_rate_sweep, load_config
from shortaoi.simulator import SimSettings


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="YAML scenario file")
    ap.add_argument("--out", default="results/optimum_vs_rate.csv")
    ap.add_argument("--no-fcfs", action="store_true", help="skip the simulated baseline (much faster)")
    ap.add_argument("--simulate-optimum", action="store_true", help="simulate NP/PR/RT at their optimum as well")
    ap.add_argument("--deliveries", type=int, default=20_000)
    ap.add_argument("--replications", type=int, default=10)
    args = ap.parse_args(argv)

    cfg = load_config(args.config)
    schemes = (SchemeKind.NP, SchemeKind.PR, SchemeKind.RT) if args.no_fcfs else tuple(SchemeKind)
    sim = SimSettings(args.deliveries, args.replications, cfg.sim.warmup_fraction, cfg.sim.base_seed)
    cfg = replace(cfg, gen_rates=cfg.gen_rates or default_rate_sweep(), schemes=schemes, sim=sim,
                  simulate_optimum=args.simulate_optimum or cfg.simulate_optimum, output_path=Path(args.out))

    rows = cmd_optimize(cfg)
    for r in rows:
        if r.result is None:
            print(f"{r.scheme.value:4s} lambda={r.lam:<8.4g} unstable")
        else:
            print(f"{r.scheme.value:4s} lambda={r.lam:<8.4g} m*={r.result.m_integer:<5d} AoI={r.aoi:.5g}")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
