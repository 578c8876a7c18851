import csv
import json

import numpy as np
import pytest

from sbmkit.cli import main, parse_grid, run_config_schema

STABLE = ["--family", "pure_power", "--param", "alpha=1"]


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_parse_grid():
    g = parse_grid("1e-3:1e3:64")
    assert g[0] == pytest.approx(1e-3) and g[-1] == pytest.approx(1e3)
    assert len(g) == 6 * 64 + 1


def test_schema(capsys):
    assert main(["--schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert schema == run_config_schema()
    assert {"command", "spec", "seed"} <= set(schema["properties"])


@pytest.mark.parametrize("command", ["eval", "certify", "simulate", "verify"])
def test_help_lists_flags(command, capsys):
    assert main([command, "--help"]) == 0
    text = capsys.readouterr().out
    for flag in ("--spec", "--family", "--seed", "--out", "--config"):
        assert flag in text


def test_eval_phi_from_spec_file(tmp_path, capsys):
    spec = tmp_path / "stable.json"
    spec.write_text(json.dumps({"family": "pure_power", "params": {"alpha": 1.0}}))
    assert main(["eval", "--fn", "phi", "--spec", str(spec), "--grid", "1e-3:1e3:64", "--out", str(tmp_path / "o")]) == 0
    header, data = read_csv(tmp_path / "o" / "phi.csv")
    assert header[:2] == ["x", "phi"]
    np.testing.assert_allclose(data[:, 1], np.sqrt(data[:, 0]), rtol=1e-14)


def test_eval_j_matches_oracle(tmp_path):
    assert main(["eval", "--fn", "j", "--d", "1", *STABLE, "--out", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "j.csv")
    assert header == ["x", "j", "oracle"]
    np.testing.assert_allclose(data[:, 1], data[:, 2], rtol=1e-6)


def test_invalid_family(capsys, tmp_path):
    assert main(["eval", "--fn", "phi", "--family", "nope", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "sum_of_powers" in err and "log_sinh" in err


def test_certify_stable(tmp_path):
    assert main(["certify", *STABLE, "--out", str(tmp_path)]) == 0
    cert = json.loads((tmp_path / "certificate.json").read_text())
    for k in ("delta1", "delta2", "delta3", "delta4"):
        assert cert[k] == pytest.approx(0.5, abs=1e-9)


def test_certify_mixture(tmp_path):
    assert main(["certify", "--family", "sum_of_powers", "--param", "alpha=0.3", "--param", "beta=0.7", "--out", str(tmp_path)]) == 0
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert all(0 < cert[k] < 1 for k in ("delta1", "delta2", "delta3", "delta4"))


def test_certify_log1p_fails(tmp_path, capsys):
    assert main(["certify", "--expr", "log1p(lam)", "--out", str(tmp_path)]) == 3
    err = capsys.readouterr().err
    assert "certification failed" in err and "at_infinity" in err
    assert json.loads((tmp_path / "certificate.json").read_text())["side"] == "at_infinity"


def test_simulate_needs_paths(tmp_path):
    assert main(["simulate", "exit-ball", *STABLE, "--n", "50", "--out", str(tmp_path)]) == 2


def test_simulate_exit_ball_defaults(tmp_path):
    assert main(["simulate", "exit-ball", *STABLE, "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    est = summary["mean_exit_time"]
    assert summary["oracle"] == pytest.approx(1.0)
    assert abs(est["estimate"] - 1.0) < 3 * est["se"] + 0.005


def test_simulate_same_seed_same_bytes(tmp_path):
    args = ["simulate", "survival", "--family", "log_cosh", "--param", "alpha=0.5", "--n", "2000", "--seed", "9"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()


def test_config_replay(tmp_path):
    args = ["simulate", "heat-kernel", *STABLE, "--n", "3000", "--seed", "4", "--cells", "10"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    cfg = json.loads((tmp_path / "a" / "run_config.json").read_text())
    cfg["output_dir"] = str(tmp_path / "b")
    (tmp_path / "replay.json").write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(tmp_path / "replay.json")]) == 0
    for name in ("summary.json", "heat_kernel_cells.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_verify_stable_quadrature(tmp_path):
    assert main(["verify", *STABLE, "--d", "1", "--quadrature-only", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "summary.json").exists()


def test_verify_negative_control(tmp_path, capsys):
    args = ["verify", *STABLE, "--quadrature-only", "--negative-control", "wrong_jump_exponent"]
    assert main([*args, "--check", "jump_density_comparability", "--out", str(tmp_path)]) == 1
    assert "jump_density_comparability" in capsys.readouterr().err


def test_verify_missing_spec(tmp_path):
    assert main(["verify", "--spec", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_unknown_command_flag():
    assert main(["eval", "--bogus"]) == 2
