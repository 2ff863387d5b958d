import json
import os

import pytest
from hypothesis import given, strategies as st

from pulledfront import cli
from pulledfront.errors import ConfigInvalid

SMALL = {"model": {"preset": "fisher-kpp"}, "grid": {"L": 60, "n": 1201}}


def write(tmp_path, cfg, name="run.json"):
    p = tmp_path / name
    p.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    return str(p)


def run(tmp_path, sub, cfg, *extra, outdir="out"):
    code = cli.main([sub, "--config", write(tmp_path, cfg), "--outdir", str(tmp_path / outdir),
                     *extra])
    return code


def report(tmp_path, sub, outdir="out"):
    (d,) = [p for p in (tmp_path / outdir).iterdir() if p.name.startswith(sub)]
    return json.loads((d / "report.json").read_text()), d


def test_speed_fkpp(tmp_path):
    assert run(tmp_path, "speed", SMALL) == 0
    rep, d = report(tmp_path, "speed")
    sp = rep["speed"]
    assert sp["c_star"] == pytest.approx(2.0, abs=1e-10)
    assert sp["eta_star"] == pytest.approx(1.0, abs=1e-10)
    assert sp["alpha"] == pytest.approx(1.0, abs=1e-10)
    manifest = json.loads((d / "manifest.json").read_text())
    assert manifest["status"] == "passed"
    assert manifest["files"] == ["border.csv", "report.json"]


def test_missing_config(tmp_path, capsys):
    code = cli.main(["speed", "--config", str(tmp_path / "nope.json")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_syntax_error_names_line(tmp_path, capsys):
    assert run(tmp_path, "speed", '{\n "model": {"preset": "fisher-kpp"},\n}') == 1
    assert "line 3" in capsys.readouterr().err


@pytest.mark.parametrize("cfg, field", [
    ({"model": {"preset": "fisher-kpp"}, "grid": {"n": 4}}, "grid.n"),
    ({"model": {"preset": "fisher-kpp"}, "colour": 1}, "<root>"),
    ({"model": {"preset": "fisher-kpp", "order": 2, "p": [0, 1], "f": [0, 1, -1]}}, "model"),
    ({"model": {"preset": "fisher-kpp"}, "output": {"run_id": "a/b"}}, "output.run_id"),
])
def test_schema_violations(tmp_path, cfg, field):
    with pytest.raises(ConfigInvalid, match=field.replace(".", r"\.")):
        cli.load_config(write(tmp_path, cfg))
    assert run(tmp_path, "speed", cfg) == 1


def test_set_overrides(tmp_path):
    cfg = cli.load_config(write(tmp_path, SMALL), ["grid.n=2001", "model.name=\"x\"",
                                                    "experiment.note=plain"])
    assert cfg["grid"]["n"] == 2001 and cfg["experiment"]["note"] == "plain"
    assert cfg["weights"]["r_plus"] == 2.0
    with pytest.raises(ConfigInvalid):
        cli.load_config(write(tmp_path, SMALL), ["grid.n"])
    assert run(tmp_path, "speed", SMALL, "--set", "grid.n=3") == 1


def test_run_is_deterministic(tmp_path):
    assert run(tmp_path, "front", SMALL, outdir="a") == 0
    assert run(tmp_path, "front", SMALL, outdir="b") == 0
    (da,), (db,) = list((tmp_path / "a").iterdir()), list((tmp_path / "b").iterdir())
    assert da.name == db.name
    for f in sorted(os.listdir(da)):
        assert (da / f).read_bytes() == (db / f).read_bytes()


def test_run_id_tracks_config():
    a = cli.run_id_for("speed", cli._merge(cli.DEFAULTS, SMALL))
    b = cli.run_id_for("speed", cli._merge(cli.DEFAULTS, {**SMALL, "seed": 1}))
    assert a != b and a.startswith("speed-")
    assert a == cli.run_id_for("speed", cli._merge(cli.DEFAULTS, json.loads(json.dumps(SMALL))))


def test_explicit_run_id_and_env_outdir(tmp_path, monkeypatch):
    monkeypatch.setenv("PULLEDFRONT_OUTDIR", str(tmp_path / "env"))
    code = cli.main(["speed", "--config", write(tmp_path, SMALL), "--run-id", "mine"])
    assert code == 0
    assert (tmp_path / "env" / "mine" / "report.json").exists()


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("PULLEDFRONT_THREADS", "many")
    assert run(tmp_path, "speed", SMALL) == 1


def test_detuned_weight_fails_with_exit_2(tmp_path):
    cfg = {**SMALL, "weights": {"eta": 1.2}}
    assert run(tmp_path, "spectrum", cfg) == 2
    rep, _ = report(tmp_path, "spectrum")
    assert rep["spectrum"]["right_max_re"] > 0


def test_spectrum_reports_resonance(tmp_path):
    cfg = {"model": {"preset": "bistable", "mu": 1 / 3}, "grid": {"L": 100, "n": 4001},
           "experiment": {"point_spectrum": True}}
    assert run(tmp_path, "spectrum", cfg) == 2
    rep, _ = report(tmp_path, "spectrum")
    assert rep["regime"] == "resonance"


def test_explicit_model_block(tmp_path):
    cfg = {"model": {"order": 2, "p": [0, 1], "f": [0, 1, -1], "name": "mine"},
           "grid": {"L": 60, "n": 1201}}
    assert run(tmp_path, "speed", cfg) == 0
    rep, _ = report(tmp_path, "speed")
    assert rep["model"]["name"] == "mine"


@pytest.mark.parametrize("sub, files", [
    ("kernel", ["kernel.csv"]),
    ("resolvent", ["lipschitz.csv"]),
    ("simulate", ["timeseries.csv"]),
])
def test_subcommands_write_outputs(tmp_path, sub, files):
    assert run(tmp_path, sub, SMALL) == 0
    _, d = report(tmp_path, sub)
    for f in files:
        assert (d / f).read_text().count("\n") > 1


def test_verify_all_fkpp(tmp_path):
    assert run(tmp_path, "verify-all", {"model": {"preset": "fisher-kpp"}}) == 0
    rep, _ = report(tmp_path, "verify-all")
    assert all(v["passed"] for v in rep["checks"].values())


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=5))
def test_csv_numbers_round_trip(values):
    text = cli.format_csv([f"c{i}" for i in range(len(values))], [values])
    back = [float(v) for v in text.splitlines()[1].split(",")]
    assert back == values
