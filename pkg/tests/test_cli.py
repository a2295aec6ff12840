import io
import math
from dataclasses import replace

import pytest

from shortaoi import analytics
from shortaoi.analytics import SchemeKind
from shortaoi.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_VALIDATION_FAILED,
    LOOSE,
    SWEEP_HEADER,
    UNSTABLE,
    cmd_analyze,
    cmd_optimize,
    cmd_simulate,
    cmd_validate,
    fmt,
    main,
)
from shortaoi.config import CONFIG_ENV, ConfigError, ScenarioConfig, config_from_mapping, load_config
from shortaoi.simulator import SimSettings

QUICK = SimSettings(4_000, 4)


def run(argv):
    buf = io.StringIO()
    return main(argv, buf), buf.getvalue()


@pytest.fixture(autouse=True)
def no_env_config(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)


# ---------------------------------------------------------------- formatting


@pytest.mark.parametrize("value,text", [
    (None, ""), (math.nan, ""), (0.0, "0"), (3, "3"), (True, "true"),
    (0.1, "0.10000000000000001"), (2.5e-4, "2.5000000000000001e-04"), (4.5, "4.5"),
])
def test_fmt(value, text):
    assert fmt(value) == text


def test_fmt_round_trips():
    for x in (1 / 3, 9.3671948610154613e-4, 4.4044699259812112, 1e-30):
        assert float(fmt(x)) == x


# ---------------------------------------------------------------- config


def test_config_defaults():
    cfg = load_config()
    assert cfg == ScenarioConfig()
    assert cfg.payload_bits == 150 and cfg.snr_db == 4.5 and cfg.symbol_time == 0.006
    assert cfg.sim.target_deliveries == 50_000 and cfg.sim.replications == 20


def test_config_file_and_env(tmp_path, monkeypatch):
    path = tmp_path / "s.yaml"
    path.write_text("channel:\n  snr_db: 6.0\nlink:\n  gen_rates: [0.2, 0.4]\nsim:\n  base_seed: 7\n")
    cfg = load_config(path)
    assert cfg.snr_db == 6.0 and cfg.gen_rates == (0.2, 0.4) and cfg.sim.base_seed == 7
    monkeypatch.setenv(CONFIG_ENV, str(path))
    assert load_config() == cfg


@pytest.mark.parametrize("doc,field", [
    ({"channel": {"payload_bits": 0}}, "channel.payload_bits"),
    ({"channel": {"payload_bits": 1.5}}, "channel.payload_bits"),
    ({"channel": {"colour": 1}}, "channel.colour"),
    ({"extra": {}}, "extra"),
    ({"link": {"gen_rates": []}}, "link.gen_rates"),
    ({"link": {"gen_rates": [0.1, -1]}}, "link.gen_rates"),
    ({"sweep": {"schemes": []}}, "sweep.schemes"),
    ({"sweep": {"schemes": ["XX"]}}, "sweep.schemes"),
    ({"sweep": {"blocklength_range": [300, 200, 1]}}, "sweep.blocklength_range"),
    ({"sim": {"replications": 0}}, "sim.replications"),
    ({"sim": {"warmup_fraction": 0.9}}, "sim"),
    ({"optimize": {"simulate_optimum": "yes"}}, "optimize.simulate_optimum"),
])
def test_config_rejects(doc, field):
    with pytest.raises(ConfigError) as info:
        config_from_mapping(doc)
    assert info.value.field == field


def test_malformed_yaml_names_line(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("channel:\n  snr_db: 4.5\n link: [\n")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.field.startswith("line ")
    code, _ = run(["validate", "--config", str(path)])
    assert code == EXIT_CONFIG


def test_flags_override_file(tmp_path):
    path = tmp_path / "s.yaml"
    out = tmp_path / "o.csv"
    path.write_text("link:\n  gen_rates: [0.1]\nsweep:\n  blocklengths: [150]\n")
    code, _ = run(["analyze", "--config", str(path), "--lambda", "0.5", "--m-range", "200:220:10", "--out", str(out)])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 3 * 3
    assert {line.split(",")[1] for line in lines[1:]} == {"0.5"}


@pytest.mark.parametrize("argv", [
    ["analyze", "--schemes", ""],
    ["analyze", "--schemes", "FCFS"],
    ["analyze", "--lambda", "abc"],
    ["simulate", "--seed", "x"],
    ["simulate", "--replications", "0"],
    ["frobnicate"],
    ["analyze", "--config", "/nonexistent/file.yaml"],
])
def test_config_errors_exit_2(argv):
    assert run(argv)[0] == EXIT_CONFIG


# ---------------------------------------------------------------- analyze


def test_analyze_default_sweep(tmp_path):
    out = tmp_path / "a.csv"
    code, text = run(["analyze", "--lambda", "0.33", "--out", str(out)])
    assert code == EXIT_OK and "270 rows" in text
    lines = out.read_text().splitlines()
    assert tuple(lines[0].split(",")) == SWEEP_HEADER
    assert len(lines) == 271
    rows = cmd_analyze(replace(ScenarioConfig(), gen_rates=(0.33,)))
    for s in (SchemeKind.NP, SchemeKind.PR, SchemeKind.RT):
        aoi = [r.analytic_aoi for r in rows if r.scheme is s]
        k = aoi.index(min(aoi))
        assert 0 < k < len(aoi) - 1


def test_analyze_row_order_and_loose_flag():
    rows = cmd_analyze(replace(ScenarioConfig(), gen_rates=(1.0, 0.1), blocklengths=(120, 90)))
    keys = [(r.scheme.value, r.lam, r.m) for r in rows]
    assert keys[:4] == [("NP", 0.1, 90), ("NP", 0.1, 120), ("NP", 1.0, 90), ("NP", 1.0, 120)]
    assert [r.scheme.value for r in rows[::4]] == ["NP", "PR", "RT"]
    for r in rows:
        assert (LOOSE in r.flags) == (r.m <= 100)
        assert r.simulated_aoi is None


# ---------------------------------------------------------------- simulate


def test_simulate_is_byte_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "--lambda", "0.33", "--m-range", "150:250:50", "--deliveries", "3000", "--replications", "3"]
    assert run(args + ["--out", str(a)])[0] == EXIT_OK
    assert run(args + ["--out", str(b)])[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    run(args + ["--out", str(c), "--seed", "1"])
    assert c.read_bytes() != a.read_bytes()


def test_simulate_fcfs_unstable():
    cfg = replace(ScenarioConfig(), gen_rates=(2.0,), blocklengths=(200,), schemes=(SchemeKind.FCFS,), sim=QUICK)
    (row,) = cmd_simulate(cfg)
    assert UNSTABLE in row.flags
    assert row.simulated_aoi is None or math.isnan(row.simulated_aoi)
    assert row.analytic_aoi is None


def test_simulate_fcfs_stable_row():
    cfg = replace(ScenarioConfig(), gen_rates=(0.33,), blocklengths=(200,), schemes=(SchemeKind.FCFS,), sim=QUICK)
    (row,) = cmd_simulate(cfg)
    assert not row.flags and row.simulated_aoi > 0 and row.ci_halfwidth > 0


# ---------------------------------------------------------------- optimize


def test_optimize_crossover_and_rt_beats_pr():
    cfg = replace(ScenarioConfig(), gen_rates=(0.05, 0.1, 0.33, 1.0))
    rows = {(r.scheme.value, r.lam): r for r in cmd_optimize(cfg)}
    for lam in (0.05, 0.1, 0.33, 1.0):
        assert rows["RT", lam].aoi <= rows["PR", lam].aoi
        for s in ("NP", "PR", "RT"):
            r = rows[s, lam]
            assert r.result.m_integer == r.exhaustive.m_integer and r.result.converged
    assert rows["RT", 0.05].aoi < rows["NP", 0.05].aoi
    assert rows["NP", 1.0].aoi < rows["RT", 1.0].aoi


def test_optimize_fcfs_unstable_row(tmp_path):
    cfg = replace(ScenarioConfig(), gen_rates=(1.1,), schemes=(SchemeKind.FCFS,), sim=QUICK,
                  output_path=tmp_path / "o.csv")
    (row,) = cmd_optimize(cfg)
    assert row.result is None and row.flags == (UNSTABLE,)
    assert "unstable" in (tmp_path / "o.csv").read_text()


def test_optimize_main(tmp_path):
    code, text = run(["optimize", "--lambda", "0.33", "--no-exhaustive", "--out", str(tmp_path / "o.csv")])
    assert code == EXIT_OK and text.count("m*=") == 3


# ---------------------------------------------------------------- validate


SMALL = ["validate", "--lambda", "0.33", "--m-range", "200:300:100", "--deliveries", "20000", "--replications", "10"]


def test_validate_passes():
    code, text = run(SMALL)
    assert code == EXIT_OK and "6/6 points passed" in text


def test_validate_detects_corrupted_formula(monkeypatch):
    good = analytics._MOMENTS[SchemeKind.PR]

    def skewed(eps, lam, M):
        r = good(eps, lam, M)
        return replace(r, avg_aoi=r.avg_aoi * 1.05)

    monkeypatch.setitem(analytics._MOMENTS, SchemeKind.PR, skewed)
    code, text = run(SMALL)
    assert code == EXIT_VALIDATION_FAILED
    fails = [line for line in text.splitlines() if "FAIL" in line]
    assert fails and all(" PR " in line for line in fails)
    report = cmd_validate(replace(ScenarioConfig(), gen_rates=(0.33,), blocklengths=(200,), sim=QUICK))
    assert {p.scheme for p in report.failing()} == {SchemeKind.PR}


def test_validate_rejects_fcfs():
    assert run(["validate", "--schemes", "NP,FCFS"])[0] == EXIT_CONFIG
