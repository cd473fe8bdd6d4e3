import json

import pytest
from click.testing import CliRunner

from dyadica.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def _json(runner, args):
    res = runner.invoke(main, args)
    assert res.exit_code == 0, res.output
    return res


def test_measure_gen_and_info(runner, tmp_path):
    m = tmp_path / "m.json"
    _json(runner, ["measure", "gen", "--kind", "cascade", "--depth", "5", "--beta", "0.25", "--seed", "3",
                   "--output", str(m)])
    obj = json.loads(m.read_text())
    assert obj["depth"] == 5 and len(obj["atoms"]) == 32
    res = _json(runner, ["measure", "info", str(m)])
    info = json.loads(res.output)
    assert info["results"]["total"] == pytest.approx(1.0)


def test_bad_measure_file_names_field(runner, tmp_path):
    m = tmp_path / "bad.json"
    m.write_text(json.dumps({"n": 1, "depth": 3, "atoms": [{"x": [0.2], "m": -1.0}]}))
    res = runner.invoke(main, ["measure", "info", str(m)])
    assert res.exit_code == 2
    assert "atoms[0].m" in res.output


def test_missing_file_exit_two(runner, tmp_path):
    res = runner.invoke(main, ["measure", "info", str(tmp_path / "none.json")])
    assert res.exit_code == 2


def _strip(report):
    report = dict(report)
    report.pop("timestamp")
    report.pop("timing", None)
    return report


def test_reports_deterministic(runner, tmp_path):
    m = tmp_path / "m.json"
    _json(runner, ["measure", "gen", "--kind", "cascade", "--depth", "6", "--seed", "1", "--output", str(m)])
    outs = []
    for k in range(2):
        r = tmp_path / f"c{k}.json"
        _json(runner, ["corona", "--measure", str(m), "--seed", "4", "--report", str(r)])
        outs.append(json.loads(r.read_text()))
    assert _strip(outs[0]) == _strip(outs[1])
    assert outs[0]["content_hash"] == outs[1]["content_hash"]
    assert len(outs[0]["inputs"]) >= 1


def test_square_requires_seed(runner):
    res = runner.invoke(main, ["square", "--kind", "haar", "--p", "2", "--trials", "3"])
    assert res.exit_code == 2


def test_square_runs(runner, tmp_path):
    r = tmp_path / "s.json"
    _json(runner, ["square", "--kind", "alpert", "--kappa", "2", "--p", "3", "--trials", "5", "--seed", "7",
                   "--depth", "6", "--no-calibrate", "--report", str(r)])
    rep = json.loads(r.read_text())
    assert rep["command"] == "square"


def test_constants_csv(runner, tmp_path):
    s, w, k = tmp_path / "s.json", tmp_path / "w.json", tmp_path / "k.json"
    _json(runner, ["measure", "gen", "--kind", "cascade", "--depth", "4", "--seed", "1", "--output", str(s)])
    _json(runner, ["measure", "gen", "--kind", "cascade", "--depth", "4", "--seed", "2", "--output", str(w)])
    k.write_text(json.dumps({"family": "hilbert", "lambda": 0, "delta": 0.01, "R": 2}))
    out = tmp_path / "c.csv"
    _json(runner, ["constants", "--spec", str(k), "--sigma", str(s), "--omega", str(w), "--p", "2",
                   "--report", str(out)])
    lines = out.read_text().splitlines()
    assert lines[0] == "name,value,kind,family,witness,seed"
    assert len(lines) > 5


def test_forms_identities(runner, tmp_path):
    r = tmp_path / "f.json"
    _json(runner, ["forms", "--identity", "all", "--depth", "4", "--seed", "2", "--eps", "0.9",
                   "--report", str(r)])
    assert json.loads(r.read_text())["command"] == "forms"


def test_counterexample_csv(runner, tmp_path):
    out = tmp_path / "a.csv"
    _json(runner, ["counterexample", "--p", "1.5", "--alpha", "1", "--eps", "0.1", "--nmax", "4000",
                   "--report", str(out)])
    assert out.read_text().count("\n") > 3


def test_counterexample_bad_eps(runner):
    res = runner.invoke(main, ["counterexample", "--p", "1.5", "--eps", "0.4"])
    assert res.exit_code == 2


def test_verify_all_unknown_criterion(runner):
    res = runner.invoke(main, ["verify-all", "--only", "42"])
    assert res.exit_code == 2
