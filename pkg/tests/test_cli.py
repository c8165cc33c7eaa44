import csv
import io
import json
import math

import pytest

from cmd_example_kp import control_gap
from gapdefect import EXIT_OK, EXIT_USAGE, RunConfig, build_parser, config_from_args, run
from errors import ConfigError
from potential import spec_to_dict

PHI = (1 + math.sqrt(5)) / 2


@pytest.fixture
def free_file(tmp_path, free_spec):
    path = tmp_path / "free.json"
    path.write_text(json.dumps(spec_to_dict(free_spec)))
    return str(path)


@pytest.fixture
def kp_file(tmp_path, kp_spec):
    path = tmp_path / "kp.json"
    path.write_text(json.dumps(spec_to_dict(kp_spec)))
    return str(path)


def _csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bands"],
        ["bands", "--emax", "10"],
        ["gaps", "--emax", "10", "--format", "xml"],
        ["diophantine", "--jmax", "4"],
        ["diophantine", "--quadratic", "1,-1"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    assert run(argv) == EXIT_USAGE


def test_missing_potential_file(tmp_path, capsys):
    assert run(["gaps", "--config", str(tmp_path / "nope.json"), "--emax", "50"]) == EXIT_USAGE
    assert "does not exist" in capsys.readouterr().err


def test_unknown_keys_in_potential_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({
        "period": 1.0,
        "periodic": [{"from": 0, "to": 1, "coeffs": [0]}],
        "defect": [{"from": 0, "to": 1, "coeffs": [0]}],
        "comment": "not allowed",
    }))
    assert run(["gaps", "--config", str(path), "--emax", "50"]) == EXIT_USAGE


def test_nonpositive_tolerance_rejected(free_file, capsys):
    assert run(["gaps", "--config", free_file, "--emax", "50", "--tol", "0"]) == EXIT_USAGE


def test_run_config_validation(free_file):
    with pytest.raises(ConfigError):
        RunConfig(command="nope")
    with pytest.raises(ConfigError):
        RunConfig(command="count", config_path=free_file, j_lo=3, j_hi=1)
    with pytest.raises(ConfigError):
        RunConfig(command="diophantine", quadratic=(1, -1, -1), real="1.5")


def test_gap_flag_sets_both_bounds(free_file):
    args = build_parser().parse_args(["roots", "--config", free_file, "--gap", "4"])
    cfg = config_from_args(args)
    assert (cfg.j_lo, cfg.j_hi) == (4, 4)
    assert cfg.output_format == "json"
    args = build_parser().parse_args(["evans-scan", "--config", free_file, "--jlo", "2"])
    cfg = config_from_args(args)
    assert (cfg.j_lo, cfg.j_hi) == (2, 2)
    assert cfg.output_format == "csv"


def test_bands_csv_for_free_particle(free_file, capsys):
    assert run(["bands", "--config", free_file, "--emin", "0.5", "--emax", "20", "--samples", "40"]) == EXIT_OK
    captured = capsys.readouterr()
    rows = _csv_rows(captured.out)
    assert len(rows) == 40
    assert list(rows[0]) == ["E", "k", "classification"]
    for row in rows:
        E, k = float(row["E"]), float(row["k"])
        assert k == pytest.approx(2 * math.cos(PHI * math.sqrt(E)), abs=1e-8)
        assert row["classification"] in ("band", "edge")
    assert "📋 params:" in captured.err


def test_bands_json(free_file, capsys):
    assert run(["bands", "--config", free_file, "--emax", "5", "--samples", "3", "--format", "json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["samples"]) == 3
    assert doc["params"]["n_samples"] == 3
    assert set(doc["samples"][0]) == {"E", "k", "class"}


def test_gaps_json(kp_file, capsys):
    assert run(["gaps", "--config", kp_file, "--emax", "320"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    by_index = {g["index"]: g for g in doc["gaps"]}
    assert by_index[0]["E_lo"] is None
    assert 304.0 < by_index[9]["E_lo"] < 306.0
    assert by_index[9]["omega"] > 0
    assert doc["params"]["e_max"] == 320.0


def test_gaps_csv_to_file(kp_file, tmp_path, capsys):
    out = tmp_path / "out" / "gaps.csv"
    assert run(["gaps", "--config", kp_file, "--emax", "120", "--format", "csv", "--output", str(out)]) == EXIT_OK
    rows = _csv_rows(out.read_text())
    assert rows[0]["j"] == "0"
    assert rows[0]["E_lo"] == ""
    assert capsys.readouterr().out == ""


def test_roots_csv(kp_file, capsys):
    assert run(["roots", "--config", kp_file, "--gap", "9", "--format", "csv"]) == EXIT_OK
    rows = _csv_rows(capsys.readouterr().out)
    assert len(rows) == 2
    for row in rows:
        assert row["gap"] == "9"
        assert int(row["fE_sign"]) == -int(math.copysign(1, float(row["mu"])))


def test_evans_scan_csv(kp_file, capsys):
    assert run(["evans-scan", "--config", kp_file, "--gap", "9", "--grid-n", "33"]) == EXIT_OK
    rows = _csv_rows(capsys.readouterr().out)
    assert 0 < len(rows) <= 33
    coords = [float(r["gap_coordinate"]) for r in rows]
    assert coords == sorted(coords)


def test_evans_scan_rejects_closed_gap(free_file, capsys):
    assert run(["evans-scan", "--config", free_file, "--gap", "2"]) == EXIT_USAGE


def test_count_writes_report_and_summary(kp_file, tmp_path, capsys):
    out = tmp_path / "count.json"
    assert run(["count", "--config", kp_file, "--gap", "9", "--output", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    report = doc["reports"][0]
    assert report["evans_count"] == 2
    assert report["n_G"] == 1
    assert report["exact_certified"] is True
    summary = _csv_rows((tmp_path / "count.summary.csv").read_text())
    assert summary[0]["j"] == "9"
    assert summary[0]["evans"] == "2"
    assert summary[0]["oracle"] == ""


def test_diophantine_quadratic(capsys):
    assert run(["diophantine", "--quadratic", "1,-1,-1", "--j", "11", "--kmax", "6", "--jmax", "12"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["kind"] == "quadratic"
    assert doc["discriminant"] == 5
    assert doc["continued_fraction"] == {"pre_period": [], "period": [1]}
    orbits = [[(h["N"], h["M"]) for h in orbit] for orbit in doc["orbits"]]
    assert orbits[0][:4] == [(4, 1), (9, 5), (23, 14), (60, 37)]
    assert orbits[1][:4] == [(5, 2), (12, 7), (31, 19), (81, 50)]
    assert all(len(orbit) == 6 for orbit in orbits)
    assert doc["residual_limit_value"] == pytest.approx(11 / math.sqrt(5))
    assert 11 in [p["j"] for p in doc["F_a"]]


def test_diophantine_real_expression_uses_quadratic_path(capsys):
    assert run(["diophantine", "--real", "sqrt(2)", "--j", "1", "--kmax", "4"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["kind"] == "quadratic"
    assert doc["coefficients"] == [1, 0, -2]


def test_diophantine_real_decimal(capsys):
    assert run(["diophantine", "--real", "0.75", "--kmax", "3"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["kind"] == "real"
    assert doc["continued_fraction"][:2] == [0, 1]


def test_diophantine_bad_real(capsys):
    assert run(["diophantine", "--real", "1+"]) == EXIT_USAGE


@pytest.mark.slow
def test_example_kp_is_deterministic(capsys):
    argv = ["example-kp", "--A", "40", "--nk", "9"]
    assert run(argv) == EXIT_OK
    first = capsys.readouterr().out
    assert run(argv) == EXIT_OK
    second = capsys.readouterr().out
    assert first == second
    doc = json.loads(first)
    assert doc["A_above_threshold"] is True
    assert doc["threshold"] == pytest.approx(34.65, abs=0.01)
    gap = doc["gaps"][0]
    assert gap["n"] == 9
    assert gap["evans_count"] == 2
    assert gap["oracle_count"] == 2


def test_control_gap_skips_orbit_terms_and_even_indices():
    assert control_gap({4, 5, 9, 12, 23, 31, 60, 81}, 4) == 7
    assert control_gap({7, 9}, 6) == 11
    assert control_gap(set(), 2) == 3


@pytest.mark.slow
def test_example_kp_default_run_includes_control_gap(capsys):
    assert run(["example-kp", "--A", "40"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    by_n = {g["n"]: g for g in doc["gaps"]}
    assert {4, 5, 9, 12} <= set(by_n)
    controls = [g for g in doc["gaps"] if g["control"]]
    assert [g["n"] for g in controls] == [7]
    assert not controls[0]["exceptional"]
    assert controls[0]["evans_count"] == 1
    assert controls[0]["oracle_count"] == 1
    assert by_n[9]["evans_count"] == 2
