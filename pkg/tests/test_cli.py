import csv
import io
import json
import math

import pytest

from selfcorrect.cli import (
    EXIT_ABORTED,
    EXIT_BAD_INPUT,
    EXIT_OK,
    EXIT_UNCORRECTABLE,
    main,
    parse_seeds,
)
from selfcorrect.container import HEADER


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_seeds():
    assert parse_seeds("0-3,10") == [0, 1, 2, 3, 10]
    assert parse_seeds("7") == [7]
    assert parse_seeds(5) == [5]


def test_analyze_default_text(capsys):
    code, out, _ = run(capsys, "analyze")
    assert code == EXIT_OK
    for needle in ("0.718", "0.238", "0.044", "0.115", "191.5", "198.3", "49049", "140491",
                   "0.349 (35%)", "99.0%", "97.0%", "491520", "251658240 (2.5e+08)"):
        assert needle in out


def test_analyze_zero_ber(capsys):
    code, out, _ = run(capsys, "analyze", "--ber", "0")
    assert code == EXIT_OK
    assert "n/a" in out
    _, out, _ = run(capsys, "analyze", "--ber", "0", "--format", "json")
    rep = json.loads(out)
    for key in ("protocol_cost_per_packet", "baseline_cost_per_packet", "protocol_total", "baseline_total"):
        assert rep[key] == 0


def test_analyze_ber_1e4_matches_hand_evaluation(capsys):
    _, out, _ = run(capsys, "analyze", "--ber", "1e-4", "--format", "json")
    rep = json.loads(out)
    lam = 3.3088
    p0, p1 = round(math.exp(-lam), 3), round(lam * math.exp(-lam), 3)
    q = round(1 - math.exp(-1.2208), 3)
    assert rep["protocol_cost_per_packet"] == pytest.approx(40 * p1 + 4136 * (1 - p0 - p1))
    assert rep["baseline_cost_per_packet"] == pytest.approx(1526 * q / (1 - q))


def test_analyze_json(capsys):
    code, out, _ = run(capsys, "analyze", "--format", "json")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["schema_version"] == 1
    assert round(rep["protocol_cost_per_packet"], 1) == 191.5
    assert rep["xor_ops_per_block"] == 491520


def test_analyze_json_nan_is_null(capsys):
    _, out, _ = run(capsys, "analyze", "--ber", "0", "--format", "json")
    assert json.loads(out)["ratio"] is None


def test_analyze_csv(tmp_path, capsys):
    path = tmp_path / "a.csv"
    assert main(["analyze", "--format", "csv", "--out", str(path)]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    assert len(rows) == 1 and float(rows[0]["p0"]) == pytest.approx(0.718)


def test_invalid_probability_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--ber", "1.5"])
    assert exc.value.code == 2


def test_config_file_and_env(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"ber": 0.0, "format": "json"}))
    _, out, _ = run(capsys, "--config", str(cfg), "analyze")
    assert json.loads(out)["p0"] == 1.0

    monkeypatch.setenv("SELFCORRECT_CONFIG", str(cfg))
    _, out, _ = run(capsys, "analyze", "--ber", "1e-5")
    assert json.loads(out)["p0"] == pytest.approx(0.718)


def test_encode_decode_round_trip(tmp_path, capsys):
    src = tmp_path / "in.bin"
    src.write_bytes(bytes(range(256)) * 50)
    framed, out = tmp_path / "f.scf", tmp_path / "out.bin"
    assert main(["encode", str(src), "-o", str(framed)]) == EXIT_OK
    assert (len(framed.read_bytes()) - HEADER.size) % 4136 == 0

    flips = ["--flip", "0:400", "--flip", "1:90", "--flip", "2:5000", "--flip", "3:200"]
    code, _, err = run(capsys, "decode", str(framed), "-o", str(out), *flips)
    assert code == EXIT_OK
    assert out.read_bytes() == src.read_bytes()
    assert "corrected@" in err


def test_decode_two_payload_flips_names_frame(tmp_path, capsys):
    src = tmp_path / "in.bin"
    src.write_bytes(b"z" * 9000)
    framed, out = tmp_path / "f.scf", tmp_path / "out.bin"
    main(["encode", str(src), "-o", str(framed)])
    code, _, err = run(capsys, "decode", str(framed), "-o", str(out), "--flip", "1:1000", "--flip", "1:2000")
    assert code == EXIT_UNCORRECTABLE
    assert "uncorrectable frame(s): 1" in err
    assert not out.exists()


def test_decode_truncated(tmp_path, capsys):
    src = tmp_path / "in.bin"
    src.write_bytes(b"z" * 100)
    framed = tmp_path / "f.scf"
    main(["encode", str(src), "-o", str(framed)])
    framed.write_bytes(framed.read_bytes()[:-3])
    code, _, err = run(capsys, "decode", str(framed), "-o", str(tmp_path / "o"))
    assert code == EXIT_BAD_INPUT and "error" in err


def test_encode_empty_input(tmp_path, capsys):
    src = tmp_path / "empty"
    src.write_bytes(b"")
    code, _, _ = run(capsys, "encode", str(src), "-o", str(tmp_path / "o"))
    assert code == EXIT_BAD_INPUT


def test_simulate_json(capsys):
    code, out, _ = run(capsys, "simulate", "--seeds", "0-1", "--bytes", "50000", "--format", "json")
    rep = json.loads(out)
    assert code == EXIT_OK
    assert len(rep["rows"]) == 2 and rep["corrupted"] == 0
    assert rep["schema_version"] == 1


def test_simulate_total_loss_aborts(capsys):
    code, out, _ = run(capsys, "simulate", "--seeds", "0-1", "--bytes", "5000", "--loss", "1.0", "--format", "json")
    rep = json.loads(out)
    assert code == EXIT_ABORTED
    assert rep["aborted"] == 2 and all(r["delivered_bytes"] == 0 for r in rep["rows"])


def test_trace_jsonl(capsys):
    code, out, _ = run(capsys, "trace", "--seed", "3", "--bytes", "20000", "--ber", "1e-4")
    lines = [json.loads(line) for line in out.splitlines()]
    assert lines[-1]["event"] == "summary" and lines[-1]["seed"] == 3
    assert all("tick" in ev for ev in lines[:-1])
    assert code in (EXIT_OK, EXIT_ABORTED)


def test_baseline_campaign_tracks_analytic(capsys):
    code, out, _ = run(capsys, "simulate", "--baseline", "--seeds", "0-15", "--format", "json")
    rep = json.loads(out)
    assert code == EXIT_OK
    assert abs(rep["mean_overhead"] - 140491) <= 0.10 * 140491
