import csv
import io
import json
import math
import subprocess
import sys

import pytest

from qtpp_sim import __version__
from qtpp_sim.cli import EXIT_CONFIG, SWEEP_CSV_COLUMNS, parse_and_run


def run(argv, capsys):
    code = parse_and_run(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_qtpp_report_schema(capsys):
    code, out, _ = run(["qtpp", "--seed", "42", "--bits", "1000", "--adversary", "intercept-resend",
                        "--attack-passes", "1"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["version"] == __version__ and rep["seed"] == 42
    assert rep["config"]["adversary"]["kind"] == "intercept-resend"
    assert rep["config"]["adversary"]["attacked_passes"] == [1]
    for key in ("mean_qber", "qber_ci95", "eve_accuracy", "eve_ci95", "detection_rate", "sift_fraction",
                "lost_fraction"):
        assert key in rep["results"]
    assert 0.0 <= rep["results"]["mean_qber"] <= 1.0
    assert rep["sweep"] == [] and "rng" in rep


def test_classical_demo(capsys):
    code, out, _ = run(["classical-demo", "--message", "1010", "--ka", "0110", "--kb", "0011"], capsys)
    assert code == 0
    assert out == "m1=1100 m2=1111 m3=1001 bob_recovered=1010 eve_recovered=1010\n"


def test_classical_demo_length_mismatch(capsys):
    code, _, err = run(["classical-demo", "--message", "101", "--ka", "0110", "--kb", "0011"], capsys)
    assert code == EXIT_CONFIG and "error" in err


def test_sweep_csv(capsys):
    code, out, _ = run(["sweep", "--param", "theta", "--from", "0", "--to", "1.5708", "--points", "9",
                        "--adversary", "intercept-resend", "--bits", "20000", "--check-fraction", "1"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 9
    assert list(rows[0]) == SWEEP_CSV_COLUMNS
    assert {r["param_name"] for r in rows} == {"theta"}
    for r in rows:
        t, q = float(r["param_value"]), float(r["mean_qber"])
        assert abs(q - 0.5 * math.sin(2 * t) ** 2) < 0.02


def test_sweep_json(capsys):
    code, out, _ = run(["sweep", "--param", "flip-prob", "--from", "0", "--to", "0.2", "--points", "3",
                        "--format", "json", "--bits", "200"], capsys)
    rep = json.loads(out)
    assert code == 0 and len(rep["sweep"]) == 3 and rep["sweep_param"] == "flip_prob"
    assert {"param_value", "mean_qber", "qber_ci95"} <= set(rep["sweep"][0])


@pytest.mark.parametrize(
    "argv, needle",
    [
        (["qtpp", "--set", "colour=blue"], "colour"),
        (["qtpp", "--flip-prob", "2"], "flip_prob"),
        (["qtpp", "--adversary", "sniffer"], "adversary"),
        (["qtpp", "--bits", "many"], "bits"),
        (["qtpp", "--angle-mode", "gaussian"], "angle"),
        (["compare", "--floor-target", "0.9"], "target"),
    ],
)
def test_config_errors_exit_2_naming_key(argv, needle, capsys):
    code, _, err = run(argv, capsys)
    assert code == EXIT_CONFIG
    assert needle in err


def test_unknown_subcommand_exit_2(capsys):
    code, _, _ = run(["teleport"], capsys)
    assert code == EXIT_CONFIG


def test_config_file_and_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# noisy channel\nbits = 400\nchannel.flip_prob=0.1\nseed=9  # trailing comment\n")
    code, out, _ = run(["qtpp", "--config", str(cfg), "--set", "bits=300", "--seed", "3"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["config"]["bits_per_session"] == 300
    assert rep["config"]["channel"]["flip_prob"] == 0.1
    assert rep["seed"] == 3


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bits=10\nwavelength=1550\n")
    code, _, err = run(["qtpp", "--config", str(cfg)], capsys)
    assert code == EXIT_CONFIG and "wavelength" in err


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(["qtpp", "--config", str(tmp_path / "nope.cfg")], capsys)
    assert code == EXIT_CONFIG and "nope.cfg" in err


def test_output_file_and_byte_identical(tmp_path, capsys):
    argv = ["compare", "--seed", "5", "--bits", "2000", "--trials", "3", "--adversary", "intercept-resend",
            "--flip-prob", "0.05", "--jitter-sigma", "0.02"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert parse_and_run(argv + ["--output", str(a)]) == 0
    assert parse_and_run(argv + ["--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert set(rep["compare"]) >= {"qtpp", "bb84", "flip_prob"}


def test_compare_floor_target(capsys):
    code, out, _ = run(["compare", "--adversary", "intercept-resend", "--theta", str(math.pi / 4),
                        "--bits", "20000", "--check-fraction", "1", "--floor-target", "0.25"], capsys)
    assert code == 0
    c = json.loads(out)["compare"]
    assert c["flip_prob"]["qtpp"] == pytest.approx(0.25, abs=0.03)
    assert c["flip_prob"]["bb84"] == pytest.approx(0.5, abs=0.05)
    assert abs(c["bb84"]["noise_floor_qber"] - 0.25) < 0.01


def test_transcript_redacted_unless_debug(capsys):
    base = ["qtpp", "--bits", "4", "--seed", "1", "--transcript"]
    _, out, _ = run(base, capsys)
    assert json.loads(out)["transcript"]["keys"] == "redacted"
    _, out, _ = run(base + ["--debug"], capsys)
    keys = json.loads(out)["transcript"]["keys"]
    assert len(keys["key_a"]) == 4 and len(keys["key_b"]) == 4


def test_csv_output_for_protocol(capsys):
    code, out, _ = run(["bb84", "--bits", "500", "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1 and "mean_qber" in rows[0]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qtpp_sim", "classical-demo", "--message", "1010",
                           "--ka", "0110", "--kb", "0011"], capture_output=True, text=True)
    assert proc.returncode == 0 and "eve_recovered=1010" in proc.stdout
