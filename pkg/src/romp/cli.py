"""Command-line entry point: train, encode, decode, bench, estimate.

Exit codes: 0 success, 1 usage error, 2 unsupported input, 3 data
corruption, 4 verification failure. Diagnostics go to stderr; reports go to
stdout or --out.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import cache_model, codec, jpeg_io, metrics, threshold, training
from .errors import (CorruptPayload, CorruptTableSet, HuffmanDecodeError,
                     InsufficientSamples, MalformedStream, RompError,
                     TableSetMismatch, UnsupportedMode, VerificationFailure,
                     VersionMismatch)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNSUPPORTED = 2
EXIT_CORRUPT = 3
EXIT_VERIFY = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _log(msg):
    print(msg, file=sys.stderr)


def build_parser():
    p = _Parser(prog="romp", description="Context-trained JPEG recompressor")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="learn a context table set from a corpus")
    t.add_argument("--corpus", required=True, type=Path)
    t.add_argument("--out", required=True, type=Path)
    t.add_argument("--buckets", type=int, default=20)
    t.add_argument("--window", type=int, default=5)
    t.add_argument("--prior-blocks", type=int, default=3)
    t.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("encode", help="JPEG -> ROMP container")
    e.add_argument("input", type=Path)
    e.add_argument("output", type=Path)
    e.add_argument("--tables", type=Path, default=None)
    e.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    e.add_argument("--lossy", action="store_true")
    e.add_argument("--rate-threshold", type=float, default=2.0)
    e.add_argument("--perceptual-threshold", type=float, default=0.4)
    e.add_argument("--report", type=Path, default=None)
    e.add_argument("--verify-bitexact", action="store_true",
                   help="decode the container and require byte identity")

    d = sub.add_parser("decode", help="ROMP container -> JPEG")
    d.add_argument("input", type=Path)
    d.add_argument("output", type=Path)
    d.add_argument("--tables", type=Path, default=None)
    d.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    d.add_argument("--verify-against", type=Path, default=None)

    b = sub.add_parser("bench", help="compression/quality/timing over a corpus")
    b.add_argument("--tables", type=Path, default=None)
    b.add_argument("--corpus", required=True, type=Path)
    b.add_argument("--lossy", action="store_true")
    b.add_argument("--rate-threshold", type=float, default=2.0)
    b.add_argument("--perceptual-threshold", type=float, default=0.4)
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--format", choices=("text", "json"), default="text")
    b.add_argument("--out", type=Path, default=None)

    s = sub.add_parser("estimate", help="cache-stack benefit estimator")
    s.add_argument("--config", required=True, type=Path)
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.add_argument("--out", type=Path, default=None)
    return p


def _tables_path(args):
    if args.tables is not None:
        return args.tables
    env = os.environ.get("ROMP_TABLES")
    if env:
        return Path(env)
    raise UsageError("no table set: pass --tables or set ROMP_TABLES")


def _emit(text, out_path):
    if out_path is None:
        print(text)
    else:
        Path(out_path).write_text(text + "\n")


def cmd_train(args):
    paths = sorted(p for p in args.corpus.iterdir()
                   if p.suffix.lower() in (".jpg", ".jpeg"))
    if not paths:
        raise UsageError(f"no JPEG files under {args.corpus}")
    progress = _log if args.verbose else None
    tables, skipped = training.train_tables(
        paths, F=args.window, B=args.prior_blocks, U=args.buckets,
        seed=args.seed, progress=progress)
    for name, err in skipped:
        _log(f"skipped {name}: {err}")
    nbytes = training.save_table_set(tables, args.out)
    _log(f"trained on {len(paths) - len(skipped)} files -> {args.out} "
         f"({nbytes} bytes, id {tables.set_id.hex()[:16]})")
    return EXIT_OK


def cmd_encode(args):
    if args.lossy and args.verify_bitexact:
        raise UsageError("--lossy cannot be combined with --verify-bitexact "
                         "(thresholding is not byte-exact by design)")
    tables = training.load_table_set(_tables_path(args))
    data = args.input.read_bytes()
    f = jpeg_io.parse_jpeg(data)
    img = jpeg_io.entropy_decode(f)
    report = None
    if args.lossy:
        params = threshold.ThresholdParams(args.rate_threshold,
                                           args.perceptual_threshold)
        img, report = threshold.threshold_image(img, f, params)
    container = codec.romp_encode(img, f, tables, threads=max(1, args.threads),
                                  thresholded=args.lossy)
    blob = container.serialize()
    args.output.write_bytes(blob)
    if args.verify_bitexact:
        if codec.romp_decode(container, tables, threads=max(1, args.threads)) != data:
            raise VerificationFailure("round trip is not byte-identical")
    if report is not None and args.report is not None:
        args.report.write_text(json.dumps(report.summary(), indent=2) + "\n")
    _log(f"{args.input} ({len(data)} B) -> {args.output} ({len(blob)} B, "
         f"ratio {metrics.compression_ratio(len(data), len(blob)):.3f})")
    return EXIT_OK


def cmd_decode(args):
    tables = training.load_table_set(_tables_path(args))
    container = codec.RompContainer.deserialize(args.input.read_bytes())
    out = codec.romp_decode(container, tables, threads=max(1, args.threads))
    args.output.write_bytes(out)
    if args.verify_against is not None:
        if out != args.verify_against.read_bytes():
            raise VerificationFailure(
                f"decoded JPEG differs from {args.verify_against}")
        _log(f"verified byte-identical against {args.verify_against}")
    return EXIT_OK


def cmd_bench(args):
    tables = training.load_table_set(_tables_path(args))
    paths = sorted(p for p in args.corpus.iterdir()
                   if p.suffix.lower() in (".jpg", ".jpeg"))
    if not paths:
        raise UsageError(f"no JPEG files under {args.corpus}")
    rows = []
    params = threshold.ThresholdParams(args.rate_threshold,
                                       args.perceptual_threshold)
    for path in paths:
        data = path.read_bytes()
        try:
            f = jpeg_io.parse_jpeg(data)
            img = jpeg_io.entropy_decode(f)
        except UnsupportedMode as exc:
            _log(f"skipped {path.name}: {exc}")
            continue
        row = {"file": path.name, "input_bytes": len(data)}
        enc_img = img
        if args.lossy:
            enc_img, _ = threshold.threshold_image(img, f, params)
        t0 = time.perf_counter()
        container = codec.romp_encode(enc_img, f, tables,
                                      threads=max(1, args.threads),
                                      thresholded=args.lossy)
        t1 = time.perf_counter()
        blob = container.serialize()
        out = codec.romp_decode(container, tables, threads=max(1, args.threads))
        t2 = time.perf_counter()
        if not args.lossy and out != data:
            raise VerificationFailure(f"{path.name}: lossless round trip failed")
        row["container_bytes"] = len(blob)
        row["ratio"] = metrics.compression_ratio(len(data), len(blob))
        row["encode_ms"] = (t1 - t0) * 1e3
        row["decode_ms"] = (t2 - t1) * 1e3
        if args.lossy:
            a = metrics.reconstruct_pixels(img, f)[0]
            b = metrics.reconstruct_pixels(enc_img, f)[0]
            db = metrics.psnr(a, b)
            row["psnr_db"] = db if db != metrics.PSNR_IDENTICAL else None
            row["min_block_ssim"] = float(metrics.block_ssim_map(a, b).min())
        rows.append(row)
    if not rows:
        raise UsageError("no usable files in the corpus")
    agg = {
        "files": len(rows),
        "mean_ratio": sum(r["ratio"] for r in rows) / len(rows),
        "mean_encode_ms": sum(r["encode_ms"] for r in rows) / len(rows),
        "mean_decode_ms": sum(r["decode_ms"] for r in rows) / len(rows),
    }
    if args.lossy:
        agg["min_block_ssim"] = min(r["min_block_ssim"] for r in rows)
    report = {"schema": 1, "lossy": args.lossy, "files": rows, "aggregate": agg}
    if args.format == "json":
        _emit(json.dumps(report, indent=2), args.out)
    else:
        lines = []
        for r in rows:
            if args.lossy:
                db = "inf" if r["psnr_db"] is None else f"{r['psnr_db']:.2f}"
                extra = f"  psnr {db} dB  minSSIM {r['min_block_ssim']:.4f}"
            else:
                extra = ""
            lines.append(f"{r['file']:>16}  {r['input_bytes']:>9} -> "
                         f"{r['container_bytes']:>9} B  ratio {r['ratio']:.3f}  "
                         f"enc {r['encode_ms']:.1f} ms  dec {r['decode_ms']:.1f} ms"
                         + extra)
        lines.append(f"mean ratio {agg['mean_ratio']:.4f} over {agg['files']} files  "
                     f"(enc {agg['mean_encode_ms']:.1f} ms, dec {agg['mean_decode_ms']:.1f} ms)")
        _emit("\n".join(lines), args.out)
    return EXIT_OK


def _load_hist(path, horizon):
    pairs = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        try:
            pairs.append((float(parts[0]), float(parts[1])))
        except (ValueError, IndexError):
            continue  # header or comment line
    return cache_model.LatencyHistogram.from_points(pairs, horizon)


def cmd_estimate(args):
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    cfg = tomllib.loads(args.config.read_text())
    model = cfg.get("model", {})
    horizon = int(model.get("horizon_ms", cache_model.DEFAULT_HORIZON_MS))
    curves = model.get("hit_curve", {})
    lat = cfg.get("latency", {})
    hists = {}
    for layer in ("edge", "origin", "backend"):
        if layer in lat:
            path = args.config.parent / lat[layer]
            hists[layer] = _load_hist(path, horizon)
    inputs = cache_model.CacheModelInputs(
        h_e=float(model["edge_hit_rate"]),
        h_o=float(model["origin_hit_rate"]),
        x=float(model["compression_ratio"]),
        lossy_x=float(model.get("lossy_ratio", 0.0)),
        r_factors=tuple(model.get("replication_factors", (3.6, 2.1))),
        decode_shift=float(model.get("decode_shift_ms", 0.0)),
        hit_curve_edge=[tuple(p) for p in curves.get("edge", [])],
        hit_curve_origin=[tuple(p) for p in curves.get("origin", [])],
        l_e=hists.get("edge"),
        l_o=hists.get("origin"),
        l_b=hists.get("backend"),
    )
    report = cache_model.estimate(inputs)
    if args.format == "json":
        _emit(json.dumps(report, indent=2), args.out)
    else:
        lines = [
            f"compression ratio          {report['compression_ratio']:.1%}",
            f"effective cache size       {report['effective_cache_size']:.2f}x",
            f"backend request reduction  {report['reductions']['backend_requests']:.1%}",
            f"bytes-to-edge reduction    {report['reductions']['bytes_to_edge']:.1%}",
            f"external bandwidth saving  {report['reductions']['external_bandwidth']:.1%}",
        ]
        for entry in report["replication"]:
            lines.append(f"replication {entry['base']:.1f}x -> {entry['new']:.3f}x")
        if "latency_ms" in report:
            lm = report["latency_ms"]
            lines.append(f"latency p50/p90/p99 before "
                         f"{lm['before']['p50']}/{lm['before']['p90']}/{lm['before']['p99']} ms")
            lines.append(f"latency p50/p90/p99 after  "
                         f"{lm['after']['p50']}/{lm['after']['p90']}/{lm['after']['p99']} ms")
        _emit("\n".join(lines), args.out)
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "bench": cmd_bench,
    "estimate": cmd_estimate,
}


def run(argv):
    """Parse argv and dispatch; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return EXIT_USAGE
    except UnsupportedMode as exc:
        _log(f"unsupported mode: {exc}")
        return EXIT_UNSUPPORTED
    except VerificationFailure as exc:
        _log(f"verification failed: {exc}")
        return EXIT_VERIFY
    except (MalformedStream, HuffmanDecodeError, CorruptPayload,
            CorruptTableSet, VersionMismatch, TableSetMismatch) as exc:
        _log(f"corrupt data: {exc}")
        return EXIT_CORRUPT
    except InsufficientSamples as exc:
        _log(f"training data problem: {exc}")
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError) as exc:
        _log(f"file error: {exc}")
        return EXIT_USAGE
    except RompError as exc:
        _log(f"error: {exc}")
        return EXIT_CORRUPT


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
