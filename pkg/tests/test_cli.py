import json

import pytest

from conftest import LAMBDA_REF
from henon_renorm.cli import DEFAULTS, build_parser, _settings, main, parse_rect


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_feigenbaum_command(tmp_path):
    assert run(tmp_path, "feigenbaum", "--degree", "40") == 0
    data = json.loads((tmp_path / "feigenbaum.json").read_text())
    assert abs(data["lambda"] - LAMBDA_REF) < 1e-12
    assert data["warnings"] == []
    assert abs(data["identity_checks"]["slope_b2"]) < 1e-10


def test_feigenbaum_low_degree_warns(tmp_path, capsys):
    assert run(tmp_path, "feigenbaum", "--degree", "10") == 0
    data = json.loads((tmp_path / "feigenbaum.json").read_text())
    assert data["warnings"]
    assert "warning" in capsys.readouterr().err


def test_tower_command(tmp_path):
    assert run(tmp_path, "tower", "--depth", "3") == 0
    data = json.loads((tmp_path / "tower.json").read_text())
    assert data["depth"] == 3
    assert data["levels"][0]["eps_norm"] == pytest.approx(0.0325)
    assert len(data["decay_ratios"]) == 3


def test_tower_partial_exit(tmp_path):
    m = tmp_path / "map.json"
    m.write_text(json.dumps({"f": {"kind": "quadratic", "a": 1.7}, "eps": {"kind": "zero"}}))
    # a = 1.7 renormalizes fewer times than requested
    assert run(tmp_path, "tower", "--map", str(m), "--depth", "12") == 2


def test_partition_command(tmp_path):
    assert run(tmp_path, "partition") == 0
    out = tmp_path / "partition"
    assert (out / "level0_W0_0.csv").exists()
    summary = json.loads((out / "level0_partition.json").read_text())
    assert len(summary["graphs"]) == 5
    assert run(tmp_path, "partition", "--level", "1") == 0
    assert (out / "level1_W2_m1.csv").exists()


def test_regions_command(tmp_path):
    assert run(tmp_path, "regions", "--level", "1", "--depth", "4") == 0
    data = json.loads((tmp_path / "regions.json").read_text())
    assert data["K"] == 1
    assert data["geometry_checks"]["pass"]


def test_regions_degenerate(tmp_path):
    m = tmp_path / "map.json"
    m.write_text(json.dumps({"f": {"kind": "quadratic", "a": 1.7996565}}))
    assert run(tmp_path, "regions", "--map", str(m), "--depth", "2") == 0
    data = json.loads((tmp_path / "regions.json").read_text())
    assert data["K"] is None and data["K_infinite"]


def test_approach_command(tmp_path, capsys):
    assert run(tmp_path, "approach", "--depth", "4") == 2
    lines = (tmp_path / "trace.jsonl").read_text().splitlines()
    regions = [json.loads(s)["region"] for s in lines]
    assert regions == ["A", "A", "B(1)", "A", "B(1)"]
    assert "[straddle]" in capsys.readouterr().out


def test_double_command(tmp_path):
    assert run(tmp_path, "double", "--depth", "4", "--max-rows", "1") == 0
    data = json.loads((tmp_path / "rows.json").read_text())
    assert data["rows"][0]["end"] == "bad"
    assert data["rate_report"]["alpha"] > 0


def test_bad_map_reports_error(tmp_path):
    m = tmp_path / "bad.json"
    m.write_text(json.dumps({"f": {"kind": "cubic"}}))
    assert run(tmp_path, "tower", "--map", str(m)) == 1
    err = json.loads((tmp_path / "error.json").read_text())
    assert "MapFormatError" in err["error"]


def test_config_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"depth": 5, "b": 20.0}))
    args = build_parser().parse_args(["regions", "--config", str(cfg), "--depth", "7"])
    st = _settings(args)
    assert st["depth"] == 7
    assert st["b"] == 20.0
    assert st["max_steps"] == DEFAULTS["max_steps"]


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"colour": 1}))
    with pytest.raises(SystemExit):
        _settings(build_parser().parse_args(["tower", "--config", str(cfg)]))


def test_parse_rect():
    assert parse_rect("-0.95,-0.947,0.042,0.045") == (-0.95, -0.947, 0.042, 0.045)
    with pytest.raises(Exception):
        parse_rect("1,2,3")


def test_thread_limit_env(tmp_path, monkeypatch):
    monkeypatch.setenv("HENON_RENORM_THREADS", "1")
    assert run(tmp_path, "tower", "--depth", "1") == 0
