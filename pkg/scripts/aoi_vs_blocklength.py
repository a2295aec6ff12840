#!/usr/bin/env python3
"""AoI against blocklength for NP, PR and RT at a few generation rates.

Writes the closed-form sweep and, with ``--simulate``, Monte Carlo points on a
coarser grid next to it. Columns follow ``shortaoi simulate``.
"""
import argparse
import sys
from dataclasses import replace
from pathlib import Path

from shortaoi.cli import cmd_analyze, cmd_simulate
from shortaoi.config import REFERENCE_RATES, load_config
from shortaoi.simulator import SimSettings


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="YAML scenario file")
    ap.add_argument("--outdir", default="results", help="directory for the CSV files")
    ap.add_argument("--simulate", action="store_true", help="add simulated points every 50 channel uses")
    ap.add_argument("--deliveries", type=int, default=50_000)
    ap.add_argument("--replications", type=int, default=20)
    args = ap.parse_args(argv)

    out = Path(args.outdir)
    cfg = load_config(args.config)
    cfg = replace(cfg, gen_rates=cfg.gen_rates or REFERENCE_RATES, blocklength_range=(110, 1000, 2), blocklengths=None)
    rows = cmd_analyze(replace(cfg, output_path=out / "aoi_vs_m_analytic.csv"))
    print(f"wrote {len(rows)} analytic rows to {out / 'aoi_vs_m_analytic.csv'}")

    if args.simulate:
        sim = SimSettings(args.deliveries, args.replications, cfg.sim.warmup_fraction, cfg.sim.base_seed)
        sim_cfg = replace(cfg, blocklength_range=(150, 1000, 50), sim=sim, output_path=out / "aoi_vs_m_simulated.csv")
        rows = cmd_simulate(sim_cfg)
        print(f"wrote {len(rows)} simulated rows to {out / 'aoi_vs_m_simulated.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
