import json
from dataclasses import asdict

import pytest

from dfsrepeater import experiments as ex
from dfsrepeater import protocol as pr
from dfsrepeater.cli import main
from dfsrepeater.presets import PRESETS
from dfsrepeater.verify import tables_suite


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_table3_csv_layout(tmp_path):
    out = tmp_path / "t3.csv"
    assert run_cli("run", "table3", "--out", out) == 0
    text = out.read_bytes()
    assert b"\r" not in text
    lines = text.decode().splitlines()
    assert lines[0] == "num_links,fidelity,acceptance_probability"
    assert [line.split(",")[0] for line in lines[1:]] == ["4", "8", "10", "11"]
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["summary"]["max_links_above_floor"] == 10
    assert meta["version"].startswith("0.1.0")


def test_identical_runs_are_byte_identical(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"chain": {"distances_km": [100, 400, 800]}}))
    outs = []
    for threads in ("1", "3"):
        monkeypatch.setenv("SIM_THREADS", threads)
        out = tmp_path / f"fig4_{threads}.csv"
        assert run_cli("run", "fig4", "--config", cfg, "--seed", 42, "--trials", 2000,
                       "--out", out, "--no-plot") == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert b"mc_expected_time_s" in outs[0]


def test_fig2_parallel_matches_serial(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"chain": {"links": [4, 8], "distances_km": [5, 15, 25]}}))
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("SIM_THREADS", threads)
        out = tmp_path / f"fig2_{threads}.csv"
        assert run_cli("run", "fig2", "--config", cfg, "--out", out, "--no-plot") == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_figure_written_next_to_csv(tmp_path):
    out = tmp_path / "direct.csv"
    assert run_cli("run", "direct", "--out", out) == 0
    assert out.with_suffix(".png").stat().st_size > 0
    header = out.read_text().splitlines()[0]
    assert header == "distance_km,expected_time_s"


@pytest.mark.parametrize("experiment, preset", [("table3", "current"), ("table6", "improved")])
def test_presets_round_trip_through_sidecar(tmp_path, experiment, preset):
    out = tmp_path / f"{experiment}.csv"
    assert run_cli("run", experiment, "--out", out) == 0
    loaded = ex.load_sidecar_parameters(out.with_suffix(".json"))
    assert loaded.hardware == PRESETS[preset].hardware
    assert loaded.noise == PRESETS[preset].noise
    assert loaded.chain["link_fidelity"] == PRESETS[preset].link_fidelity
    assert asdict(loaded.hardware) == asdict(ex.resolve(experiment, {}).hardware)


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 1, "trials": 500, "out": str(tmp_path / "a.csv"),
                               "noise": {"p_g2": 0.99}, "chain": {"links": [2]}}))
    out = tmp_path / "b.csv"
    assert run_cli("run", "table3", "--config", cfg, "--seed", 2, "--out", out) == 0
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["seed"] == 2 and meta["trials"] == 500
    assert meta["parameters"]["noise"]["p_g2"] == 0.99
    assert not (tmp_path / "a.csv").exists()


@pytest.mark.parametrize("content", [
    {"bogus": 1},
    {"noise": {"p_g3": 0.9}},
    {"chain": {"num_links": 0}},
    {"hardware": {"p": 2.0}},
    {"seed": -1},
])
def test_bad_config_exits_2(tmp_path, content):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(content))
    assert run_cli("run", "table3", "--config", cfg, "--out", tmp_path / "x.csv") == 2


def test_unparseable_config_exits_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    assert run_cli("run", "direct", "--config", cfg) == 2


def test_monte_carlo_without_seed_exits_2(tmp_path):
    assert run_cli("run", "fig4", "--trials", 10, "--out", tmp_path / "x.csv") == 2


def test_unknown_experiment_is_usage_error():
    with pytest.raises(SystemExit) as err:
        run_cli("run", "table9")
    assert err.value.code == 2


FULL = {
    "hardware": {"p": 0.35, "eta_d": 0.9, "L_att_km": 22, "c_fiber_km_s": 2e5},
    "noise": {"p_g1": 0.999, "p_g2": 0.995, "tau": 0.01},
    "chain": {"num_links": 4, "link_length_km": 25, "encoding": "dfs", "link_fidelity": 0.99},
}


def test_custom_needs_full_parameter_set(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"hardware": FULL["hardware"]}))
    assert run_cli("run", "custom", "--config", cfg, "--out", tmp_path / "x.csv") == 2
    cfg.write_text(json.dumps(FULL))
    assert run_cli("run", "custom", "--config", cfg, "--out", tmp_path / "y.csv") == 0


def test_infeasible_custom_exits_3(tmp_path):
    data = json.loads(json.dumps(FULL))
    data["chain"]["link_fidelity"] = 0.7
    data["search"] = {"time_budget_s": 1.0}
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(data))
    assert run_cli("run", "custom", "--config", cfg, "--out", tmp_path / "x.csv") == 3


def test_verify_suite_passes(capsys):
    assert run_cli("verify", "--suite", "tables", "--suite", "clifford") == 0
    out = capsys.readouterr().out
    assert "[PASS] tables" in out and "[PASS] clifford" in out


def test_corrupted_table_fails_verification(monkeypatch, capsys):
    corrupted = dict(pr.TABLE_V1)
    key = next(iter(corrupted))
    corrupted[key] = "psi-"
    assert not tables_suite({1: corrupted}).passed
    monkeypatch.setattr(pr, "TABLE_V1", corrupted)
    assert run_cli("verify", "--suite", "tables") == 1
    assert "[FAIL] tables" in capsys.readouterr().out


def test_presets_listing(capsys):
    assert run_cli("presets") == 0
    out = capsys.readouterr().out
    assert "current:" in out and "improved:" in out and "provenance" in out
