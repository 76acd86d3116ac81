import json

import pytest

import delay_etc
from delay_etc import errors
from delay_etc.benchmarks import example1_config, example2_config
from delay_etc.cli import EXIT_INFEASIBLE, EXIT_INVALID, EXIT_OK, EXIT_VIOLATION, build_parser, main
from delay_etc.systems import MatrixNorm


@pytest.fixture(autouse=True)
def _isolated_env(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for name in ("DELAY_ETC_LOG_LEVEL", "DELAY_ETC_OUT_DIR", "DELAY_ETC_MAX_WORKERS"):
        monkeypatch.delenv(name, raising=False)


def _write(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_simulate_example2(tmp_path, capsys):
    config = _write(tmp_path, example2_config())
    out_dir = tmp_path / "runs"
    assert main(["--out-dir", str(out_dir), "simulate", config]) == EXIT_OK
    assert (out_dir / "example2_summary.json").exists()
    assert "strongly_nontrivial" in capsys.readouterr().out


def test_simulate_counts_follow_flag(tmp_path, capsys):
    config = _write(tmp_path, example2_config())
    main(["--out-dir", str(tmp_path / "a"), "simulate", config])
    excluded = capsys.readouterr().out
    main(["--out-dir", str(tmp_path / "b"), "--include-initial-event", "simulate", config])
    included = capsys.readouterr().out
    summary = json.loads((tmp_path / "a" / "example2_summary.json").read_text())
    run = summary["runs"][0]
    assert f"{run['event_count_excl']} events" in excluded
    assert f"{run['event_count_incl']} events" in included


def test_tune_prints_parameters(tmp_path, capsys):
    assert main(["tune", _write(tmp_path, example2_config())]) == EXIT_OK
    results = json.loads(capsys.readouterr().out)
    assert len(results) == 1
    assert results[0]["nontrivial_certified"] is True
    assert results[0]["b"] < results[0]["c"]


def test_check_prints_report(tmp_path, capsys):
    assert main(["check", _write(tmp_path, example1_config())]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["feasible"] is True
    assert report["certificate"]["mu"] == pytest.approx(0.4030, abs=5e-4)


def test_invalid_config_exit_code(tmp_path, capsys):
    data = example2_config()
    data["initial"] = []
    assert main(["check", _write(tmp_path, data)]) == EXIT_INVALID
    assert "Error" in capsys.readouterr().err


def test_malformed_json_exit_code(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["simulate", str(path)]) == EXIT_INVALID


def test_missing_file_exit_code(tmp_path):
    assert main(["check", str(tmp_path / "absent.json")]) == EXIT_INVALID


def test_infeasible_exit_code(tmp_path, capsys):
    data = example2_config()
    data["system"] = {"linear": {"A1": [[0.5]], "A2": [[0.0]], "B": [[1.0]], "K": [[-0.9]], "tau": 1}}
    del data["certificate"]
    data["initial"] = [[1.0]]
    assert main(["tune", _write(tmp_path, data)]) == EXIT_INFEASIBLE
    assert "Infeasible" in capsys.readouterr().err


def test_tuner_infeasible_exit_code(tmp_path):
    data = example2_config()
    data["system"] = {"linear": {"A1": [[0.5]], "A2": [[0.0]], "B": [[1.0]], "K": [[-0.9]], "tau": 1}}
    del data["certificate"]
    data["initial"] = [[1.0]]
    data["allow_infeasible"] = True
    assert main(["tune", _write(tmp_path, data)]) == EXIT_INFEASIBLE


def test_violation_exit_code(tmp_path, capsys):
    data = example2_config()
    data["certificate"] = {"eps": 0.1, "mu": 0.99}
    assert main(["--out-dir", str(tmp_path / "runs"), "simulate", _write(tmp_path, data)]) == EXIT_VIOLATION
    assert "certified run" in capsys.readouterr().err


def test_bad_environment_exit_code(tmp_path, monkeypatch):
    monkeypatch.setenv("DELAY_ETC_MAX_WORKERS", "zero")
    assert main(["check", _write(tmp_path, example1_config())]) == EXIT_INVALID


def test_package_exports_every_error():
    hierarchy = {
        name
        for name, value in vars(errors).items()
        if isinstance(value, type) and issubclass(value, errors.DelayEtcError)
    }
    assert "InvariantViolationError" in hierarchy
    assert hierarchy <= set(delay_etc.__all__)
    assert delay_etc.InvariantViolationError is errors.InvariantViolationError


def test_tables_matrix_norm_option():
    parser = build_parser()
    assert parser.parse_args(["tables"]).matrix_norm is MatrixNorm.SPECTRAL
    assert parser.parse_args(["tables", "--matrix-norm", "inf"]).matrix_norm is MatrixNorm.INF
    with pytest.raises(SystemExit):
        parser.parse_args(["tables", "--matrix-norm", "fro"])
