import json

import pytest

from hypergauss import __version__
from hypergauss.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATED, SEED_ENV, dumps, main
from hypergauss.config import ConfigError, digest, load

COMPLEX = {
    "command": "verify-global",
    "inequality": "complex_hc",
    "covariance": {"kind": "equicorrelated", "n": 2, "rho": 0.3},
    "p": [1.5, 2.0], "alpha": 1.2, "z": [[0.0, 0.3], 0.4],
    "functions": [{"kind": "random_polynomial", "dim": 1, "degree": 2, "seed": 1},
                  {"kind": "random_polynomial", "dim": 1, "degree": 2, "seed": 2}],
    "seed": 3,
}
VIOLATED_LOCAL = {
    "command": "check-local", "mode": "complex",
    "covariance": {"kind": "identity", "block_sizes": [1]},
    "p": 1.5, "alpha": 2.0, "z": [[0.0, 0.85]],
}


def run_cli(tmp_path, cfg, *extra, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out.json"
    code = main([cfg["command"], "--config", str(path), "--out", str(out), *extra])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_report_has_the_documented_keys(tmp_path):
    code, report = run_cli(tmp_path, COMPLEX)
    assert code == EXIT_OK
    assert set(report) == {"artifact_version", "config_digest", "command", "verdict", "records",
                           "wall_clock_seconds"}
    assert report["artifact_version"] == __version__ and report["verdict"] == "holds"
    assert {"lhs", "rhs", "margin", "verdict", "method"} <= set(report["records"][0])


def test_records_are_byte_reproducible(tmp_path):
    _, a = run_cli(tmp_path, COMPLEX)
    _, b = run_cli(tmp_path, COMPLEX)
    a.pop("wall_clock_seconds"), b.pop("wall_clock_seconds")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_digest_ignores_key_order():
    shuffled = dict(reversed(list(COMPLEX.items())))
    assert digest(COMPLEX) == digest(shuffled)
    assert digest(COMPLEX) != digest(dict(COMPLEX, seed=4))


def test_violated_local_condition_carries_a_certified_witness(tmp_path):
    code, report = run_cli(tmp_path, VIOLATED_LOCAL)
    assert code == EXIT_VIOLATED
    assert report["records"][0]["perturbation"]["certified"]


@pytest.mark.parametrize("bad, where", [
    ({"covariance": {"kind": "equicorrelated", "n": "two", "rho": 0.3}}, "covariance.n"),
    ({"p": "x"}, "p"),
    ({"surprise": 1}, "surprise"),
])
def test_schema_errors_name_the_field(bad, where, tmp_path, capsys):
    code, _ = run_cli(tmp_path, dict(COMPLEX, **bad))
    assert code == EXIT_USAGE
    err = capsys.readouterr().err
    assert where in err
    with pytest.raises(ConfigError):
        load(dict(COMPLEX, **bad))


def test_missing_covariance_file_is_a_usage_error(tmp_path):
    cfg = dict(COMPLEX, covariance={"kind": "file", "path": "nope.json", "block_sizes": [1, 1]})
    assert run_cli(tmp_path, cfg)[0] == EXIT_USAGE


def test_covariance_file_relative_to_config(tmp_path):
    (tmp_path / "cov.json").write_text(json.dumps([[1.0, 0.3], [0.3, 1.0]]))
    cfg = dict(COMPLEX, covariance={"kind": "file", "path": "cov.json", "block_sizes": [1, 1]})
    code, report = run_cli(tmp_path, cfg)
    _, ref = run_cli(tmp_path, COMPLEX)
    assert code == EXIT_OK and report["records"] == ref["records"]


def test_unknown_command_and_missing_config(capsys):
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["verify-global"]) == EXIT_USAGE


def test_constants_without_config(capsys):
    assert main(["constants", "-p", "1.5", "-q", "3", "-n", "1"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["records"][0]["beckner_babenko"] == pytest.approx(0.7016926042943222, rel=1e-14)


def test_infinite_values_are_written_as_strings(tmp_path):
    cfg = {"command": "verify-global", "inequality": "chaos", "p": 2.0, "q": 4.0,
           "covariance": {"kind": "equicorrelated", "n": 2, "rho": 0.5},
           "functions": [{"kind": "hermite", "beta": [1]}, {"kind": "hermite", "beta": [1]}]}
    code, report = run_cli(tmp_path, cfg)
    assert code == EXIT_OK
    rec = report["records"][0]
    assert rec["rhs"] == "inf" and rec["details"]["degenerate"] is True
    assert "Infinity" not in dumps({"x": float("inf")})


def test_seed_environment_variable(tmp_path, monkeypatch):
    cfg = {k: v for k, v in COMPLEX.items() if k != "seed"}
    monkeypatch.setenv(SEED_ENV, "3")
    _, from_env = run_cli(tmp_path, cfg)
    monkeypatch.delenv(SEED_ENV)
    _, explicit = run_cli(tmp_path, COMPLEX)
    assert from_env["records"] == explicit["records"]
    monkeypatch.setenv(SEED_ENV, "three")
    assert run_cli(tmp_path, cfg)[0] == EXIT_USAGE


def test_suite_entries_keep_their_order(tmp_path):
    entries = [VIOLATED_LOCAL, COMPLEX, {"command": "constants", "p": 2.0, "q": 4.0}]
    cfg = {"command": "suite", "entries": entries, "budget": {"jobs": 2}}
    code, report = run_cli(tmp_path, cfg)
    assert code == EXIT_VIOLATED
    rows = report["records"]
    assert [r["entry"] for r in rows] == [0, 1, 2]
    assert [r["command"] for r in rows] == ["check-local", "verify-global", "constants"]
    assert [r["verdict"] for r in rows] == ["violated", "holds", "holds"]


def test_command_line_overrides_reach_the_budget(tmp_path):
    cfg = dict(COMPLEX, budget={"method": "mc"})
    _, a = run_cli(tmp_path, cfg, "--samples", "20000", "--seed", "9")
    rec = a["records"][0]
    assert rec["method"] == "mc" and rec["details"]["seed"] == 9
