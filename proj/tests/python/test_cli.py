"""End-to-end tests for the c3sl command-line tool."""

import json
import os
import subprocess

import pytest

BIN = os.environ.get("C3SL_BIN", "c3sl")


def run(*args, check=True, **kwargs):
    proc = subprocess.run([BIN, *args], capture_output=True, text=True, **kwargs)
    if check and proc.returncode != 0:
        raise AssertionError(
            f"{args} exited {proc.returncode}\nstdout:{proc.stdout}\nstderr:{proc.stderr}")
    return proc


def read_csv_without_wall_ms(path):
    """steps.csv rows minus the wall-clock column, which is never reproducible."""
    rows = []
    with open(path) as fh:
        for line in fh:
            rows.append(",".join(line.strip().split(",")[:-1]))
    return rows


def test_keygen_is_deterministic_and_reports_params(tmp_path):
    out1, out2 = tmp_path / "a.c3ks", tmp_path / "b.c3ks"
    proc = run("keygen", "--dim", "2048", "--count", "16", "--seed", "7", "--out", str(out1))
    assert "params: 32768" in proc.stdout
    run("keygen", "--dim", "2048", "--count", "16", "--seed", "7", "--out", str(out2))
    assert out1.read_bytes() == out2.read_bytes()


def test_keygen_usage_errors_exit_2(tmp_path):
    assert run("keygen", "--dim", "0", "--count", "1", check=False).returncode == 2
    assert run("keygen", "--count", "1", check=False).returncode == 2


def test_keygen_unwritable_path_exits_5():
    proc = run("keygen", "--dim", "4", "--count", "1", "--out",
               "/nonexistent-dir/keys.c3ks", check=False)
    assert proc.returncode == 5


def test_bench_delta_keys_identity_and_monotonicity(tmp_path):
    proc = run("bench", "--dim", "64", "--ratio", "1", "--trials", "5", "--delta-keys",
               "--out", str(tmp_path))
    line = (tmp_path / "bench.csv").read_text().splitlines()[1]
    assert float(line.split(",")[3]) == 1.0  # mean cosine is exactly 1

    run("bench", "--dim", "512", "--ratio", "2", "--ratio", "16", "--trials", "10",
        "--seed", "3", "--out", str(tmp_path))
    rows = (tmp_path / "bench.csv").read_text().splitlines()[1:]
    cosines = [float(r.split(",")[3]) for r in rows]
    assert cosines[0] > cosines[1]

    assert run("bench", "--trials", "0", check=False).returncode == 2


def test_train_writes_metrics_and_is_reproducible(tmp_path):
    args = ["train", "--ratio", "16", "--batch", "64", "--dim", "64", "--epochs", "2",
            "--lr", "1e-3", "--train-samples", "256", "--test-samples", "64",
            "--seed", "9", "--quiet"]
    run(*args, "--out", str(tmp_path / "r1"))
    run(*args, "--out", str(tmp_path / "r2"))

    summary = json.loads((tmp_path / "r1" / "summary.json").read_text())
    assert summary["achieved_ratio"] == 16.0
    assert summary["config"]["ratio"] == 16

    assert read_csv_without_wall_ms(tmp_path / "r1" / "steps.csv") == \
        read_csv_without_wall_ms(tmp_path / "r2" / "steps.csv")

    s1 = json.loads((tmp_path / "r1" / "summary.json").read_text())
    s2 = json.loads((tmp_path / "r2" / "summary.json").read_text())
    for volatile in ("wall_ms",):
        s1.pop(volatile), s2.pop(volatile)
    assert s1 == s2

    b1 = (tmp_path / "r1" / "model_edge.c3md").read_bytes()
    b2 = (tmp_path / "r2" / "model_edge.c3md").read_bytes()
    assert b1 == b2


def test_train_strict_grouping_violation_exits_2(tmp_path):
    proc = run("train", "--ratio", "6", "--batch", "64", "--strict", "--epochs", "1",
               "--train-samples", "64", "--out", str(tmp_path), check=False)
    assert proc.returncode == 2


def test_report_golden_cells(tmp_path):
    proc = run("report", "--batch", "64", "--out", str(tmp_path))
    assert "c3sl" in proc.stdout and "bottlenet++" in proc.stdout
    rows = json.loads((tmp_path / "report.json").read_text())
    by_key = {(r["method"], r["model"], r["ratio"]): r for r in rows}
    assert by_key[("c3sl", "vgg16-cifar10", 16)]["params"] == 32768
    assert by_key[("c3sl", "vgg16-cifar10", 16)]["flops"] == 536870912
    assert by_key[("c3sl", "resnet50-cifar100", 2)]["params"] == 8192
    assert by_key[("c3sl", "resnet50-cifar100", 4)]["flops"] == 2147483648
    assert by_key[("bottlenet++", "vgg16-cifar10", 8)]["params"] == 1049344


def serve_cloud(tmp_path, *extra):
    """Starts serve-cloud on an ephemeral port; returns (process, port)."""
    proc = subprocess.Popen(
        [BIN, "serve-cloud", "--listen", "127.0.0.1:0", "--out", str(tmp_path / "cloud"),
         *extra],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    line = proc.stdout.readline()
    assert "listening on" in line, line
    port = int(line.strip().rsplit(":", 1)[1])
    return proc, port


COMMON = ["--ratio", "4", "--batch", "16", "--dim", "64", "--epochs", "2",
          "--lr", "1e-3", "--classes", "3", "--input-dim", "12",
          "--edge-hidden", "24", "--cloud-hidden", "24", "--seed", "71",
          "--model-seed", "72"]


def test_loopback_session_matches_local_run(tmp_path):
    data_flags = ["--train-samples", "96", "--test-samples", "0",
                  "--data-seed", "5", "--blob-sep", "9"]

    cloud_proc, port = serve_cloud(tmp_path, *COMMON)
    edge = run("run-edge", "--connect", f"127.0.0.1:{port}", *COMMON, *data_flags,
               "--out", str(tmp_path / "edge"), "--quiet")
    assert cloud_proc.wait(timeout=60) == 0

    run("train", *COMMON, *data_flags, "--out", str(tmp_path / "local"), "--quiet")

    edge_ckpt = (tmp_path / "edge" / "model_edge.c3md").read_bytes()
    local_edge = (tmp_path / "local" / "model_edge.c3md").read_bytes()
    assert edge_ckpt == local_edge

    cloud_ckpt = (tmp_path / "cloud" / "model_cloud.c3md").read_bytes()
    local_cloud = (tmp_path / "local" / "model_cloud.c3md").read_bytes()
    assert cloud_ckpt == local_cloud

    # byte counters agree between the two sides of the session
    cloud_summary = json.loads((tmp_path / "cloud" / "cloud_summary.json").read_text())
    edge_summary = json.loads((tmp_path / "edge" / "summary.json").read_text())
    assert cloud_summary["feature_block_bytes"] == edge_summary["forward_feature_bytes"]


def test_mismatched_configuration_is_a_protocol_error(tmp_path):
    cloud_proc, port = serve_cloud(tmp_path, *COMMON)
    bad = [f if f != "64" else "32" for f in COMMON]  # different --dim
    edge = run("run-edge", "--connect", f"127.0.0.1:{port}", *bad,
               "--train-samples", "32", "--test-samples", "0",
               "--out", str(tmp_path / "edge"), check=False)
    assert edge.returncode == 3
    assert cloud_proc.wait(timeout=60) == 3


def test_connection_refused_is_an_io_error(tmp_path):
    proc = run("run-edge", "--connect", "127.0.0.1:1", *COMMON,
               "--train-samples", "32", "--test-samples", "0",
               "--out", str(tmp_path), check=False)
    assert proc.returncode == 5
