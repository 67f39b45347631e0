"""Config validation, experiment runner plumbing, CLI, SVG output."""

import json
import math
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from pctv import cli
from pctv.config import EXPERIMENTS, load_config, validate_config
from pctv.errors import ConfigError
from pctv.experiments import (
    connectivity_scale,
    critical_rate,
    eps_rule,
    run_experiment,
    worker_count,
    write_records_csv,
)
from pctv.svgplot import line_figure, scatter_figure


def test_defaults_are_filled_in():
    cfg = validate_config("gtv-convergence", {
        "domain": {"shape": "unit-box", "dimension": 2},
        "kernel": {"name": "indicator"},
        "function": {"coeffs": [1.0, 0.0]},
        "eps_rule": {"kind": "admissible"},
        "n": [100],
        "seeds": [0],
    })
    assert cfg["density"] == {"name": "uniform"}
    assert cfg["eps_rule"]["kind"] == "admissible"


def test_unknown_experiment_is_a_config_error():
    with pytest.raises(ConfigError, match="unknown experiment"):
        validate_config("spectral-clustering", {})


def test_error_messages_carry_json_pointers():
    base = {
        "domain": {"shape": "unit-box", "dimension": 2},
        "kernel": {"name": "indicator"},
        "function": {"coeffs": [1.0, 0.0]},
        "eps_rule": {"kind": "admissible"},
        "n": [100],
        "seeds": [0],
    }
    bad = json.loads(json.dumps(base))
    bad["kernel"]["name"] = "indicatr"
    with pytest.raises(ConfigError, match="^/kernel/name: "):
        validate_config("gtv-convergence", bad)
    extra = json.loads(json.dumps(base))
    extra["unknown_knob"] = 1
    with pytest.raises(ConfigError):
        validate_config("gtv-convergence", extra)
    missing = {k: v for k, v in base.items() if k != "seeds"}
    with pytest.raises(ConfigError, match="seeds"):
        validate_config("gtv-convergence", missing)


def test_experiment_names_are_stable():
    assert EXPERIMENTS == (
        "gtv-convergence",
        "perimeter-convergence",
        "nonlocal-convergence",
        "tl-distance",
        "matching-scaling",
        "connectivity",
        "bisect",
    )


def test_load_config_rejects_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(str(path))
    good = tmp_path / "ok.json"
    good.write_text('{"a": 1}')
    assert load_config(str(good)) == {"a": 1}


def test_eps_rules_evaluate_their_formulas():
    rate2 = critical_rate(1000, 2)
    assert math.isclose(rate2, math.log(1000) ** 0.75 / math.sqrt(1000))
    rate3 = critical_rate(1000, 3)
    assert math.isclose(rate3, (math.log(1000) / 1000) ** (1 / 3))
    assert math.isclose(connectivity_scale(1000, 2),
                        math.sqrt(math.log(1000) / 1000))

    adm = eps_rule({"kind": "admissible", "c": 2.0, "gamma": 0.8}, 2)
    assert math.isclose(adm(1000), 2.0 * rate2 ** 0.8)
    bord = eps_rule({"kind": "borderline", "c": 1.5}, 2)
    assert math.isclose(bord(1000), 1.5 * rate2)
    sub = eps_rule({"kind": "sub-connectivity", "factor": 0.25}, 2)
    assert math.isclose(sub(1000), 0.25 * connectivity_scale(1000, 2))
    fixed = eps_rule({"kind": "fixed", "value": 0.2}, 2)
    assert fixed(10) == 0.2 and fixed(100000) == 0.2
    with pytest.raises(ConfigError, match="/eps_rule/value"):
        eps_rule({"kind": "fixed"}, 2)


def test_worker_count_respects_environment(monkeypatch):
    monkeypatch.setenv("PCTV_THREADS", "2")
    assert worker_count() == 2
    monkeypatch.delenv("PCTV_THREADS")
    assert worker_count() >= 1


def test_records_csv_formats_cells(tmp_path):
    path = tmp_path / "records.csv"
    write_records_csv(path, ["n", "flag", "value"],
                      [{"n": 10, "flag": True, "value": 0.1},
                       {"n": 20, "flag": False, "value": 1.0 / 3.0}])
    text = path.read_bytes().decode()
    lines = text.split("\r\n")
    assert lines[0] == "n,flag,value"
    assert lines[1] == "10,1,0.1"
    assert lines[2] == "20,0," + repr(1.0 / 3.0)


GTV_CFG = {
    "domain": {"shape": "unit-box", "dimension": 2},
    "kernel": {"name": "indicator"},
    "function": {"coeffs": [1.0, 0.0]},
    "eps_rule": {"kind": "fixed", "value": 0.3},
    "n": [60, 120],
    "seeds": [0, 1],
}


def test_run_experiment_writes_the_standard_artifacts(tmp_path):
    out = tmp_path / "out"
    summary = run_experiment("gtv-convergence", GTV_CFG, str(out))
    assert (out / "records.csv").exists()
    assert (out / "summary.json").exists()
    assert (out / "convergence.svg").exists()
    stored = json.loads((out / "summary.json").read_text())
    assert stored["experiment"] == "gtv-convergence"
    assert stored["version"] == summary["version"]
    assert stored["config"]["density"] == {"name": "uniform"}
    header = (out / "records.csv").read_text().splitlines()[0]
    assert header == "n,eps,seed,kernel,domain,gtv,reference,rel_error"


def test_reruns_are_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    run_experiment("gtv-convergence", GTV_CFG, str(out1))
    os.environ["PCTV_THREADS"] = "1"
    try:
        run_experiment("gtv-convergence", GTV_CFG, str(out2))
    finally:
        del os.environ["PCTV_THREADS"]
    assert (out1 / "records.csv").read_bytes() == (out2 / "records.csv").read_bytes()
    assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()


def test_empty_schedule_is_a_noop_success(tmp_path):
    cfg = dict(GTV_CFG, n=[])
    out = tmp_path / "empty"
    run_experiment("gtv-convergence", cfg, str(out))
    lines = (out / "records.csv").read_text().splitlines()
    assert lines == ["n,eps,seed,kernel,domain,gtv,reference,rel_error"]


def test_matching_records_have_the_exact_header(tmp_path):
    cfg = {"dimension": 2, "n": [16], "seeds": [0]}
    out = tmp_path / "match"
    run_experiment("matching-scaling", cfg, str(out))
    header = (out / "records.csv").read_text().splitlines()[0]
    assert header == "n,d,seed,dist,ratio"


def test_bisect_run_emits_partition_figures(tmp_path):
    cfg = {
        "domain": {"shape": "dumbbell"},
        "kernel": {"name": "indicator"},
        "eps_rule": {"kind": "fixed", "value": 0.45},
        "n": [60],
        "seeds": [4],
        "restarts": 4,
        "reference_size": 120,
    }
    out = tmp_path / "bisect"
    summary = run_experiment("bisect", cfg, str(out))
    assert (out / "partition-n60-seed4.svg").exists()
    record = summary["summary"]["records"][0]
    assert sorted(record) == ["agreement", "connected", "energy", "eps",
                              "n", "seed", "tl1_distance"]


def test_cli_success_and_error_paths(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(GTV_CFG))
    out = tmp_path / "cli-out"
    code = cli.main(["gtv-convergence", "--config", str(cfg_path),
                     "--out", str(out)])
    assert code == 0
    captured = capsys.readouterr()
    assert "summary.json" in captured.out

    bad = tmp_path / "bad.json"
    bad_cfg = json.loads(json.dumps(GTV_CFG))
    bad_cfg["kernel"]["name"] = "indicatr"
    bad.write_text(json.dumps(bad_cfg))
    code = cli.main(["gtv-convergence", "--config", str(bad),
                     "--out", str(tmp_path / "x")])
    assert code == 2
    captured = capsys.readouterr()
    assert captured.err.startswith("config error: /kernel/name")

    code = cli.main(["gtv-convergence", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "y")])
    assert code in (1, 2)


def test_scatter_figures_are_valid_and_deterministic(tmp_path):
    rng = np.random.default_rng(0)
    pts = rng.uniform(size=(40, 2))
    labels = pts[:, 0] < 0.5
    p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
    scatter_figure(p1, pts, labels, title="cut")
    scatter_figure(p2, pts, labels, title="cut")
    assert p1.read_bytes() == p2.read_bytes()
    root = ET.parse(p1).getroot()
    assert root.tag.endswith("svg")
    circles = [el for el in root.iter() if el.tag.endswith("circle")]
    assert len(circles) == 40


def test_line_figures_support_log_axes(tmp_path):
    path = tmp_path / "curve.svg"
    line_figure(path, [([100, 1000, 10000], [0.3, 0.1, 0.03], "median")],
                title="error", xlabel="n", ylabel="err",
                xscale="log", yscale="log")
    root = ET.parse(path).getroot()
    polylines = [el for el in root.iter() if el.tag.endswith("polyline")]
    assert polylines
