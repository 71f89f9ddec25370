import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import make_jpeg
from romp.cli import run


@pytest.fixture(scope="module")
def tiny_corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli_corpus")
    rng = np.random.default_rng(61)
    for i in range(4):
        arr = np.clip(rng.normal(125, 20, (96, 128)) +
                      np.linspace(0, 35, 128)[None, :], 25, 230).astype(np.uint8)
        (d / f"img{i}.jpg").write_bytes(make_jpeg(arr, quality=75))
    return d


@pytest.fixture(scope="module")
def trained(tiny_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_tables") / "tables.rmpt"
    assert run(["train", "--corpus", str(tiny_corpus), "--out", str(out)]) == 0
    assert out.exists()
    return out


class TestExitCodes:
    def test_encode_decode_verify_ok(self, tiny_corpus, trained, tmp_path):
        src = tiny_corpus / "img0.jpg"
        container = tmp_path / "img0.romp"
        back = tmp_path / "back.jpg"
        assert run(["encode", "--tables", str(trained), "--verify-bitexact",
                    str(src), str(container)]) == 0
        assert run(["decode", "--tables", str(trained), str(container),
                    str(back), "--verify-against", str(src)]) == 0
        assert back.read_bytes() == src.read_bytes()

    def test_usage_error_is_1(self, trained, tmp_path):
        assert run(["encode", "--no-such-flag", "a", "b"]) == 1
        assert run(["decode", "in.romp", "out.jpg"]) in (1,)  # no tables anywhere

    def test_lossy_conflicts_with_verify(self, tiny_corpus, trained, tmp_path):
        src = tiny_corpus / "img0.jpg"
        assert run(["encode", "--tables", str(trained), "--lossy",
                    "--verify-bitexact", str(src), str(tmp_path / "x.romp")]) == 1

    def test_unsupported_mode_is_2(self, trained, tmp_path):
        prog = tmp_path / "prog.jpg"
        prog.write_bytes(make_jpeg(np.full((32, 32), 90, dtype=np.uint8),
                                   progressive=True))
        assert run(["encode", "--tables", str(trained), str(prog),
                    str(tmp_path / "p.romp")]) == 2

    def test_corrupt_container_is_3(self, tiny_corpus, trained, tmp_path):
        src = tiny_corpus / "img1.jpg"
        container = tmp_path / "c.romp"
        assert run(["encode", "--tables", str(trained), str(src),
                    str(container)]) == 0
        blob = bytearray(container.read_bytes())
        blob = blob[:len(blob) - 7]
        container.write_bytes(bytes(blob))
        assert run(["decode", "--tables", str(trained), str(container),
                    str(tmp_path / "o.jpg")]) == 3

    def test_verify_mismatch_is_4(self, tiny_corpus, trained, tmp_path):
        src = tiny_corpus / "img2.jpg"
        other = tiny_corpus / "img3.jpg"
        container = tmp_path / "c.romp"
        assert run(["encode", "--tables", str(trained), str(src),
                    str(container)]) == 0
        assert run(["decode", "--tables", str(trained), str(container),
                    str(tmp_path / "o.jpg"), "--verify-against",
                    str(other)]) == 4

    def test_tables_env_var(self, tiny_corpus, trained, tmp_path, monkeypatch):
        monkeypatch.setenv("ROMP_TABLES", str(trained))
        src = tiny_corpus / "img1.jpg"
        assert run(["encode", str(src), str(tmp_path / "e.romp")]) == 0


class TestLossyAndReports:
    def test_lossy_encode_with_report(self, tiny_corpus, trained, tmp_path):
        src = tiny_corpus / "img0.jpg"
        container = tmp_path / "l.romp"
        report = tmp_path / "report.json"
        assert run(["encode", "--tables", str(trained), "--lossy",
                    "--report", str(report), str(src), str(container)]) == 0
        rep = json.loads(report.read_text())
        assert rep["zeroed"] >= 0 and "per_component" in rep
        out = tmp_path / "l.jpg"
        assert run(["decode", "--tables", str(trained), str(container),
                    str(out)]) == 0
        from PIL import Image
        Image.open(out).load()

    def test_bench_json_schema(self, tiny_corpus, trained, tmp_path):
        out = tmp_path / "bench.json"
        assert run(["bench", "--tables", str(trained), "--corpus",
                    str(tiny_corpus), "--format", "json", "--out",
                    str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["schema"] == 1
        assert "mean_ratio" in rep["aggregate"]
        assert len(rep["files"]) == 4
        for row in rep["files"]:
            assert {"ratio", "encode_ms", "decode_ms"} <= set(row)

    def test_bench_lossy_has_quality_fields(self, tiny_corpus, trained, tmp_path):
        out = tmp_path / "bench.json"
        assert run(["bench", "--tables", str(trained), "--corpus",
                    str(tiny_corpus), "--lossy", "--format", "json",
                    "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert all("min_block_ssim" in r and "psnr_db" in r for r in rep["files"])


class TestEstimate:
    def test_estimate_from_config(self, tmp_path):
        for name, ms in (("edge.csv", 50), ("origin.csv", 150), ("backend.csv", 400)):
            (tmp_path / name).write_text(f"bucket_ms,probability\n{ms},1.0\n")
        cfg = tmp_path / "model.toml"
        cfg.write_text(
            '[model]\n'
            'edge_hit_rate = 0.59\norigin_hit_rate = 0.31\n'
            'compression_ratio = 0.13\nlossy_ratio = 0.0\n'
            'replication_factors = [3.6, 2.1]\ndecode_shift_ms = 3\n'
            '[model.hit_curve]\nedge = [[1.0, 0.59], [1.4, 0.62]]\n'
            '[latency]\nedge = "edge.csv"\norigin = "origin.csv"\n'
            'backend = "backend.csv"\n')
        out = tmp_path / "estimate.json"
        assert run(["estimate", "--config", str(cfg), "--format", "json",
                    "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["effective_cache_size"] == pytest.approx(1.149, abs=1e-3)
        assert rep["replication"][0]["new"] == pytest.approx(3.132)
        assert rep["replication"][1]["new"] == pytest.approx(1.827)
        assert rep["latency_ms"]["after"]["p50"] == 53  # 50 + decode shift


class TestConsoleScript:
    def test_installed_entry_point(self, tiny_corpus, trained, tmp_path):
        src = tiny_corpus / "img0.jpg"
        container = tmp_path / "cli.romp"
        proc = subprocess.run(
            [sys.executable, "-m", "romp.cli", "encode", "--tables",
             str(trained), str(src), str(container)],
            capture_output=True, text=True, timeout=240)
        assert proc.returncode == 0, proc.stderr
        proc = subprocess.run(
            [sys.executable, "-m", "romp.cli", "decode", "--tables",
             str(trained), str(container), str(tmp_path / "cli.jpg"),
             "--verify-against", str(src)],
            capture_output=True, text=True, timeout=240)
        assert proc.returncode == 0, proc.stderr
        assert "verified byte-identical" in proc.stderr
