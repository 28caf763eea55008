import json

import pytest

from robinlayer import cli, config
from robinlayer.assembly import read_matrix_market

SMALL_GRID = {"L": 4.0, "n_lat": 41}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def _run(tmp_path, cfg, out="out", *extra):
    code = cli.main(["run", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def test_validate_examples(tmp_path):
    assert config.diagnostics({"command": "spectrum"}) == []
    sharp = {"command": "resolvent-sweep", "solver": {"seed": 0},
             "coupling": {"preset": "step", "alpha0": 1.0, "c": 0.5, "smoothing": 0.0}}
    d = config.diagnostics(sharp)
    assert len(d) == 1 and "W^1_inf" in d[0]["message"]
    d = config.diagnostics({"command": "spectrum", "grid": {"n_trans": 1}})
    assert len(d) == 1 and d[0]["path"] == "grid/n_trans"


def test_validate_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["validate", "--config", str(_write(tmp_path, {"command": "assemble"}))]) == 0
    assert json.loads(capsys.readouterr().out) == []
    assert cli.main(["validate", "--config", str(_write(tmp_path, {"command": "nope"}))]) == 2
    with pytest.raises(OSError):
        cli.main(["validate", "--config", str(tmp_path / "missing.json")])


def test_seed_mandatory_for_randomized():
    d = config.diagnostics({"command": "resolvent-sweep"})
    assert [x["path"] for x in d] == ["solver/seed"]


def test_config_round_trip(tmp_path):
    cfg = config.with_defaults({"command": "spectrum", "coupling": {"preset": "step", "c": -0.2}})
    p = _write(tmp_path, cfg)
    assert config.load(p) == cfg
    assert config.diagnostics(cfg) == []
    assert config.config_hash(cfg) == config.config_hash(json.loads(json.dumps(cfg)))


def test_schema_violation_exit_2(tmp_path, capsys):
    code, out = _run(tmp_path, {"command": "spectrum", "grid": {"n_trans": 1}})
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config" and len(err["diagnostics"]) == 1
    assert (out / "error.json").exists()


def test_selftest_exit_0(tmp_path):
    code, out = _run(tmp_path, {"command": "selftest", "solver": {"seed": 0, "samples": 10000}})
    assert code == 0
    assert json.loads((out / "selftest.json").read_text())["passed"]


def test_assemble_outputs_in_manifest(tmp_path):
    code, out = _run(tmp_path, {"command": "assemble", "grid": dict(SMALL_GRID, n_trans=4)})
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    files = {p.name for p in out.rglob("*") if p.is_file()} - {"manifest.json"}
    assert set(man["outputs"]) == files
    for key in ("config_hash", "tool_version", "started_at", "finished_at"):
        assert man[key]
    H = read_matrix_market(out / "H_eps.mtx")
    assert H.shape == (39 * 4, 39 * 4)
    checks = json.loads((out / "assemble.json").read_text())["checks"]
    assert checks["adjoint_rule_defect"] == 0 and checks["pt_defect"] == 0


def test_resolvent_sweep_zero_coupling(tmp_path):
    cfg = {"command": "resolvent-sweep", "coupling": {"preset": "constant", "alpha0": 0.0},
           "grid": {"L": 6.0, "n_lat": 61}, "solver": {"seed": 1, "probes": 5}}
    code, out = _run(tmp_path, cfg)
    assert code == 0
    rows = (out / "resolvent_sweep.csv").read_text().strip().splitlines()
    assert len(rows) == 5
    summary = json.loads((out / "summary.json").read_text())
    assert summary["slope"] == pytest.approx(1.0, abs=0.05)


def test_enclosure_check_benchmark(tmp_path):
    cfg = {"command": "enclosure-check", "grid": SMALL_GRID,
           "sweep": {"epsilons": [0.2, 0.1]}, "solver": {"k": 4}}
    code, out = _run(tmp_path, cfg)
    assert code == 0
    assert json.loads((out / "enclosure.json").read_text())["violations"] == []


def test_spectrum_and_format_flag(tmp_path):
    cfg = {"command": "spectrum", "grid": dict(SMALL_GRID, n_trans=4), "solver": {"k": 3}}
    code, out = _run(tmp_path, cfg, "out", "--format", "csv")
    assert code == 0
    assert (out / "spectrum.csv").exists()
    head = (out / "spectrum.csv").read_text().splitlines()[0]
    assert head.startswith("epsilon,near_re")


def test_weak_coupling_and_trajectory(tmp_path):
    step = {"preset": "step", "alpha0": 1.0, "c": 0.0, "smoothing": 0.5}
    code, out = _run(tmp_path, {"command": "weak-coupling", "coupling": step,
                                "grid": {"L": 200.0, "n_lat": 4001},
                                "sweep": {"c_values": [-0.1, 0.1]}}, "w")
    assert code == 0
    rows = (out / "weak_coupling.csv").read_text().strip().splitlines()
    assert rows[2].split(",")[1] == ""  # wrong sign: absent
    code, out = _run(tmp_path, {"command": "trajectory", "coupling": step,
                                "grid": {"L": 40.0, "n_lat": 801},
                                "sweep": {"c_values": [0.0, -0.5, -1.0, -2.0, -3.0]}}, "t")
    assert code == 0
    assert json.loads((out / "trajectory.json").read_text())["pattern"] == "emerge-min-return"


def test_numerical_failure_exit_3(tmp_path, monkeypatch):
    def boom(cfg, art, threads):
        art.csv("partial.csv", ["x"], [[1.0]])
        raise cli.NumericalFailure("did not converge")
    monkeypatch.setitem(cli.COMMANDS, "spectrum", boom)
    code, out = _run(tmp_path, {"command": "spectrum"})
    assert code == 3
    man = json.loads((out / "manifest.json").read_text())
    assert "partial.csv" in man["outputs"] and "error.json" in man["outputs"]
    assert man["exit_code"] == 3


def test_seed_flag_overrides(tmp_path):
    code, out = _run(tmp_path, {"command": "selftest", "solver": {"samples": 1000}}, "s", "--seed", "5")
    assert code == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 5


def test_schema_command(capsys):
    assert cli.main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out)["title"] == "robinlayer experiment"
