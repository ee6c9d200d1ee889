import json

import pytest

from dpsurvey.cli import main
from dpsurvey.frames import dump_frame_csv, make_frame


@pytest.fixture
def frame_csv(tmp_path):
    frame = make_frame([0.2, 0.8, 0.4, 1.0], propensities=[1.0] * 4)
    path = tmp_path / "frame.csv"
    dump_frame_csv(frame, path)
    return str(path)


@pytest.fixture
def config_path(tmp_path, frame_csv):
    config = {
        "frame": frame_csv,
        "universe": {"y_min": 0.0, "y_max": 1.0},
        "design": {"kind": "srswor", "n": 2},
        "releases": [{"statistic": "ht_mean", "epsilon": 1.0}],
        "mechanism_start": "responding-sample",
        "invariant": "frame",
        "budget": 1.0,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return str(path)


def test_validate_good_config(config_path, capsys):
    assert main(["validate-config", config_path]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_bad_config_exits_1(tmp_path, frame_csv, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"frame": frame_csv}))
    assert main(["validate-config", str(bad)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError"


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as excinfo:
        main(["run"])  # missing config argument
    assert excinfo.value.code == 2


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as excinfo:
        main(["frobnicate"])
    assert excinfo.value.code == 2


def test_run_twice_is_byte_identical(config_path, tmp_path):
    out_a = tmp_path / "a.json"
    out_b = tmp_path / "b.json"
    assert main(["run", config_path, "--seed", "7", "--out", str(out_a)]) == 0
    assert main(["run", config_path, "--seed", "7", "--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    report = json.loads(out_a.read_text())
    assert report["seed"] == 7
    assert report["budget"]["ledger_total"] == 1.0


def test_run_without_seed_fails_cleanly(config_path, capsys):
    assert main(["run", config_path]) == 1
    err = json.loads(capsys.readouterr().err)
    assert "seed" in err["message"]


def test_sample_writes_csv(config_path, tmp_path):
    out = tmp_path / "sample.csv"
    assert main(["sample", config_path, "--seed", "3", "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "id,y,pi,w"
    assert len(lines) == 3  # header + n=2 rows


def test_impute_fills_missing_values(tmp_path):
    frame = make_frame([0.4, 0.6, float("nan")])
    frame_path = tmp_path / "frame.csv"
    dump_frame_csv(frame, frame_path)
    config = {
        "frame": str(frame_path),
        "universe": {"y_min": 0.0, "y_max": 1.0},
        "design": {"kind": "srswor", "n": 3},
        "imputation": {"method": "dp_mean", "epsilon": 0.5},
        "releases": [{"statistic": "mean", "epsilon": 0.5}],
        "mechanism_start": "responding-sample",
        "invariant": "frame",
        "budget": 1.0,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))
    out = tmp_path / "filled.csv"
    assert main(["impute", str(config_path), "--seed", "5", "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "id,y,imputed"
    filled_row = lines[3].split(",")
    assert filled_row[2] == "1"
    assert 0.0 <= float(filled_row[1]) <= 1.0


def test_audit_sensitivity_table(tmp_path, capsys):
    out = tmp_path / "sens.csv"
    assert main(["audit-sensitivity", "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    header = lines[0].split(",")
    assert header == ["instance", "statistic", "invariant", "mutable",
                      "exact", "analytic", "match"]
    assert all(line.split(",")[-1] == "1" for line in lines[1:])


def test_audit_amplification_poisson(tmp_path):
    out = tmp_path / "amp.csv"
    code = main(["audit-amplification", "--design", "poisson", "--rate", "0.1",
                 "--eps", "0.1", "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "design,epsilon,rate_or_maxpi,eps_effective,status"
    fields = lines[1].split(",")
    eps_effective = float(fields[3])
    assert eps_effective == pytest.approx(0.01, rel=0.10)
    assert fields[4] == "ok"


def test_audit_amplification_threads_match(tmp_path):
    out1 = tmp_path / "a1.csv"
    out4 = tmp_path / "a4.csv"
    args = ["audit-amplification", "--design", "srswor", "-n", "2", "--eps", "0.1"]
    assert main(args + ["--threads", "1", "--out", str(out1)]) == 0
    assert main(args + ["--threads", "4", "--out", str(out4)]) == 0
    assert out1.read_bytes() == out4.read_bytes()


def test_audit_amplification_requires_rate_for_poisson(capsys):
    assert main(["audit-amplification", "--design", "poisson", "--eps", "0.1"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert "rate" in err["message"]
