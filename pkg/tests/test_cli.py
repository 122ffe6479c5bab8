import argparse
import csv
import io
from pathlib import Path

import msgspec
import pytest

from qutrit_lg import config, models
from qutrit_lg.__main__ import main, parse_tau_grid


def _rows(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def test_scan_finds_the_violation(capsys: pytest.CaptureFixture[str]):
    assert main(["scan"]) == 0
    rows = _rows(capsys.readouterr().out)

    assert len(rows) == 241
    assert list(rows[0]) == ["tau_ms", "k3_inrm", "k3_luders"]
    best = max(rows, key=lambda row: float(row["k3_inrm"]))
    assert best["tau_ms"] == "0.208"
    assert float(best["k3_inrm"]) == pytest.approx(1.7566, abs=1e-3)
    assert max(float(row["k3_luders"]) for row in rows) <= 1.5 + 1e-6


SCAN_RULE_CASES = [
    pytest.param("luders", id="luders"),
    pytest.param("inrm", id="inrm"),
]


@pytest.mark.parametrize("rule", SCAN_RULE_CASES)
def test_scan_single_rule(rule: str, capsys: pytest.CaptureFixture[str]):
    assert main(["scan", "--rule", rule, "--tau-grid", "0.02:0.5:0.01"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert list(rows[0]) == ["tau_ms", f"k3_{rule}"]
    highest = max(float(row[f"k3_{rule}"]) for row in rows)
    if rule == "luders":
        assert highest <= 1.5 + 1e-6
    else:
        assert highest > 1.5


def test_scan_writes_file(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    out = tmp_path / "scan.csv"
    assert main(["scan", "--tau-grid", "0.1:0.3:0.1", "-o", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert [row["tau_ms"] for row in _rows(out.read_text())] == ["0.1", "0.2", "0.3"]


def test_scan_with_noise_adds_column(capsys: pytest.CaptureFixture[str]):
    assert main(["scan", "--tau-grid", "0.2:0.21:0.008", "--noise", str(config.NOISE_PROFILE)]) == 0
    rows = _rows(capsys.readouterr().out)
    assert list(rows[0]) == ["tau_ms", "k3_inrm", "k3_luders", "k3_noisy"]
    assert float(rows[1]["k3_noisy"]) < float(rows[1]["k3_inrm"])


def test_empty_grid_fails_without_output(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    out = tmp_path / "scan.csv"
    with pytest.raises(SystemExit) as exc:
        main(["scan", "--tau-grid", "0.5:0.1:0.01", "-o", str(out)])
    assert exc.value.code == 2
    assert "tau grid is empty" in capsys.readouterr().err
    assert not out.exists()


@pytest.mark.parametrize("value", ["0.1:0.2", "a:b:c", "0.1:0.2:0", "0.1:0.2:-0.1"])
def test_parse_tau_grid_rejects(value: str):
    with pytest.raises(argparse.ArgumentTypeError, match="Invalid tau grid"):
        parse_tau_grid(value)


SETTING_CASES = [
    pytest.param("12", (0.5, 0.708), [0.1366, 0.4660, 0.3974], id="12"),
    pytest.param("13", (0.5, 0.916), [0.8685, 0.1268, 0.0046], id="13"),
]


@pytest.mark.parametrize(("pair", "times", "last_row"), SETTING_CASES)
def test_setting(
    pair: str, times: tuple[float, float], last_row: list[float], capsys: pytest.CaptureFixture[str]
):
    assert main(["setting", pair]) == 0
    table = msgspec.json.decode(capsys.readouterr().out, type=models.SettingTable)
    assert table.pair == pair
    assert table.times_ms == pytest.approx(times)
    assert table.rows == ["0", "1", "2"]
    assert table.joint[0] == pytest.approx([0, 0, 0], abs=1e-12)
    assert table.joint[2] == pytest.approx(last_row, abs=1e-3)
    assert table.note is None


def test_setting_23_notes_the_misprint(capsys: pytest.CaptureFixture[str]):
    assert main(["setting", "23"]) == 0
    table = msgspec.json.decode(capsys.readouterr().out, type=models.SettingTable)
    assert table.times_ms == pytest.approx((0.708, 0.916))
    assert table.joint[0][0] == pytest.approx(0.0543, abs=1e-3)
    assert table.correlation == pytest.approx(0.2926, abs=1e-3)
    assert "0.0778" in table.note


def test_setting_text_with_luders(capsys: pytest.CaptureFixture[str]):
    assert main(["setting", "12", "--rule", "luders", "--text"]) == 0
    text = capsys.readouterr().out
    assert "1|2,0" in text
    assert "sum   1.0000" in text
    assert "note" not in text


K3_CASES = [
    pytest.param("inrm", 1.7566, id="inrm"),
    pytest.param("luders", None, id="luders"),
]


@pytest.mark.parametrize(("rule", "expected"), K3_CASES)
def test_k3(rule: str, expected: float | None, capsys: pytest.CaptureFixture[str]):
    assert main(["k3", "--rule", rule]) == 0
    summary = msgspec.json.decode(capsys.readouterr().out, type=models.K3Summary)
    assert (summary.rule, summary.tau_ms) == (rule, 0.208)
    assert summary.k3 == pytest.approx(summary.c12 + summary.c23 - summary.c13)
    if expected is None:
        assert summary.k3 <= 1.5 + 1e-9
    else:
        assert summary.k3 == pytest.approx(expected, abs=1e-3)


def test_setting_rejects_invalid_pair(capsys: pytest.CaptureFixture[str]):
    with pytest.raises(SystemExit) as exc:
        main(["setting", "21"])
    assert exc.value.code == 2
    assert "invalid choice" in capsys.readouterr().err


def test_ledger(tmp_path: Path, data_dir: Path, capsys: pytest.CaptureFixture[str]):
    out = tmp_path / "report.json"
    assert main(["ledger", str(data_dir / "measured_ledger.json"), "-o", str(out)]) == 0
    assert "0.1936 (liberal 0.0912)" in capsys.readouterr().out

    report = msgspec.json.decode(out.read_bytes(), type=models.LedgerReportModel)
    assert report.km1_strict == 0.1936
    assert report.bound_strict == 1.4031
    assert report.dark_count_range == (0.1079, 0.2103)


def test_ledger_missing_state(data_dir: Path, capsys: pytest.CaptureFixture[str]):
    with pytest.raises(SystemExit) as exc:
        main(["ledger", str(data_dir / "missing_state_ledger.json")])
    assert exc.value.code == 2
    assert "$.states['2']" in capsys.readouterr().err


def test_ledger_probability_out_of_range(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    ledger = tmp_path / "ledger.json"
    ledger.write_text('{"states": {"0": {"ng": {"00": 1.5}, "cg": {}}}}')
    with pytest.raises(SystemExit) as exc:
        main(["ledger", str(ledger)])
    assert exc.value.code == 2
    assert "$.states['0'].ng['00']" in capsys.readouterr().err


def test_optimize_qubit(capsys: pytest.CaptureFixture[str]):
    assert main(["optimize", "--dim", "2"]) == 0
    result = msgspec.json.decode(capsys.readouterr().out, type=models.OptimizeResult)
    assert (result.dimension, result.rule) == (2, "inrm")
    assert result.k3_star == pytest.approx(1.5, abs=1e-3)


def test_optimize_writes_file(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    out = tmp_path / "optimum.json"
    assert main(["optimize", "-o", str(out)]) == 0
    assert capsys.readouterr().out == ""
    result = msgspec.json.decode(out.read_bytes(), type=models.OptimizeResult)
    assert result.tau_star == pytest.approx(0.208, abs=2e-3)
    assert result.k3_star == pytest.approx(1.7566, abs=1e-3)


def test_invasiveness_feeds_ledger(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    table = tmp_path / "ledger.json"
    assert main(["invasiveness", "-o", str(table)]) == 0
    msgspec.json.decode(table.read_bytes(), type=models.LedgerInput)

    assert main(["ledger", str(table)]) == 0
    assert "Bound" in capsys.readouterr().out


def test_noisy_scan(capsys: pytest.CaptureFixture[str]):
    assert main(["noisy-scan", "--tau-grid", "0.2:0.216:0.008"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert list(rows[0]) == ["tau_ms", "k3_inrm", "k3_noisy"]
    assert 1.47 <= float(rows[1]["k3_noisy"]) <= 1.52


def test_invalid_noise_profile(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    profile = tmp_path / "noise.json"
    profile.write_text('{"pulse_fidelity": 0}')
    with pytest.raises(SystemExit) as exc:
        main(["noisy-scan", "--tau-grid", "0.2:0.2:0.01", "--noise", str(profile)])
    assert exc.value.code == 2
    assert "invalid noise profile" in capsys.readouterr().err


def test_oracle(capsys: pytest.CaptureFixture[str]):
    assert main(["oracle", "--seed", "7", "--count", "500"]) == 0
    assert "max K3 over 500 classical models (seed 7)" in capsys.readouterr().out


def test_unwritable_output(tmp_path: Path):
    with pytest.raises(SystemExit) as exc:
        main(["setting", "12", "-o", str(tmp_path)])
    assert exc.value.code not in (0, None)
