"""CLI subcommands: exit codes, CSV schemas, env precedence."""

import struct
import subprocess
import sys

import numpy as np
import pytest

from corrvol.cli import main
from corrvol.flowio import write_flo
from corrvol.types import FlowField


def _flo(tmp_path, name, vectors):
    path = tmp_path / name
    write_flo(FlowField(vectors=np.asarray(vectors, dtype=np.float32)), str(path))
    return str(path)


def test_verify_defaults_pass(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    assert "matched-accumulation bitwise: on-demand=yes sparse=yes" in out


def test_verify_zero_tolerance_fails_with_offense(capsys):
    """Documented reassociation demo: pooled-volume vs pooled-feature levels."""
    assert main(["verify", "--tolerance", "0", "--block", "4"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out
    assert "first offense" in out


def test_verify_zero_tolerance_block1_matched_lanes(capsys):
    """At a single level the two dense pooling modes coincide bit for bit,
    so even a zero tolerance passes."""
    code = main(["verify", "--tolerance", "0", "--block", "1", "--levels", "1"])
    assert code == 0  # single level: both dense modes coincide bit for bit


def test_verify_writes_csv(tmp_path, capsys):
    out = tmp_path / "verify.csv"
    assert main(["verify", "--iterations", "2", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("# corrvol-verify-csv v1\n")
    assert len(text.strip().split("\n")) == 2 + 2
    capsys.readouterr()


def test_verify_infeasible_dense_exits_5(capsys):
    code = main(["verify", "--dense-limit-bytes", "1"])
    assert code == 5
    assert "bytes" in capsys.readouterr().err


def test_analyze_row_count_and_determinism(tmp_path, capsys):
    args = [
        "analyze", "--seeds", "2", "--height", "16", "--width", "16",
        "--iterations", "2", "--levels", "1",
    ]
    assert main(args) == 0
    first = capsys.readouterr().out
    lines = first.strip().split("\n")
    assert lines[0] == "# corrvol-occupancy-csv v1"
    # B list {1,2,4,8,16} with both layouts shares the B=1 row: 9 data rows.
    assert len(lines) == 2 + 9
    assert main(args) == 0
    assert capsys.readouterr().out == first


def test_analyze_thread_flag_matches_sequential(capsys):
    args = [
        "analyze", "--seeds", "3", "--height", "12", "--width", "12",
        "--iterations", "2", "--levels", "1", "--blocks", "2,4",
    ]
    assert main(args) == 0
    seq = capsys.readouterr().out
    assert main(args + ["--threads", "3"]) == 0
    par = capsys.readouterr().out
    assert seq == par


def test_bench_csv_smoke(tmp_path):
    out = tmp_path / "bench.csv"
    assert main([
        "bench", "--sizes", "8,16", "--iterations", "2", "--blocks", "2",
        "--cache", "both", "--out", str(out),
    ]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "# corrvol-bench-csv v1"
    # Per size: dense + ondemand + sparse(on) + sparse(off) = 4 rows.
    assert len(lines) == 2 + 8
    header = lines[1].split(",")
    for line in lines[2:]:
        assert len(line.split(",")) == len(header)


def test_bench_rejects_unknown_sampler(capsys):
    assert main(["bench", "--samplers", "dense,quantum"]) == 2
    assert "unknown sampler" in capsys.readouterr().err


def test_metrics_identical_files(tmp_path, capsys):
    rng = np.random.default_rng(0)
    path = _flo(tmp_path, "a.flo", rng.standard_normal((4, 5, 2)))
    assert main(["metrics", path, path]) == 0
    out = capsys.readouterr().out
    assert "epe,0.000000,20" in out


def test_metrics_bad_magic_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.flo"
    bad.write_bytes(struct.pack("<f", 1.0) + struct.pack("<ii", 1, 1) + b"\0" * 8)
    good = _flo(tmp_path, "g.flo", np.zeros((1, 1, 2)))
    assert main(["metrics", str(bad), good]) == 3
    assert "magic" in capsys.readouterr().err


def test_metrics_dim_mismatch_exits_4(tmp_path, capsys):
    a = _flo(tmp_path, "a.flo", np.zeros((2, 2, 2)))
    b = _flo(tmp_path, "b.flo", np.zeros((3, 2, 2)))
    assert main(["metrics", a, b]) == 4
    capsys.readouterr()


def test_metrics_scale_resamples_prediction(tmp_path, capsys):
    pred_half = _flo(tmp_path, "half.flo", np.full((2, 2, 2), 2.0))
    gt_full = _flo(tmp_path, "full.flo", np.full((4, 4, 2), 4.0))
    assert main(["metrics", pred_half, gt_full, "--scale", "2"]) == 0
    out = capsys.readouterr().out
    assert "epe,0.000000,16" in out


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--block", "zero"])
    assert exc.value.code == 2


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    assert "verify" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "corrvol", "--version"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "corrvol" in proc.stdout


def test_backend_env_is_honored(capsys, monkeypatch):
    monkeypatch.setenv("CORRVOL_BACKEND", "python")
    assert main(["verify", "--iterations", "1"]) == 0
    capsys.readouterr()


def test_threads_env_is_honored(capsys, monkeypatch):
    monkeypatch.setenv("CORRVOL_THREADS", "2")
    args = [
        "analyze", "--seeds", "2", "--height", "8", "--width", "8",
        "--iterations", "1", "--levels", "1", "--blocks", "2",
    ]
    assert main(args) == 0
    capsys.readouterr()
