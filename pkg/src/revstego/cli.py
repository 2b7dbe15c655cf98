"""Command-line front end: ``revstego <command> ...``.

Exit codes: 0 ok, 2 infeasible payload, 3 capacity/overflow, 4 I/O or
malformed input, 5 internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import brute, codec, imaging, milp, model
from .codec import MessageBits
from .errors import (
    CapacityExceeded,
    CorruptStream,
    EmbeddingOverflow,
    Infeasible,
    NonEmptyReservedBins,
    PGMFormatError,
    RevStegoError,
)
from .model import AbsErrorHistogram, ProblemSpec

log = logging.getLogger("revstego")

EXIT_OK, EXIT_INFEASIBLE, EXIT_CAPACITY, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4, 5

CURVE_FIELDS = ["payload", "distortion", "distortion_per_query", "capacity_bits", "x", "method", "status"]


@dataclass(frozen=True)
class CurvePoint:
    payload: float
    distortion: float
    distortion_per_query: float
    capacity: float
    x: tuple[int, ...]
    method: str
    status: str = "ok"


def parse_grid(spec: str, max_cap: float | None = None) -> list[float]:
    """``start:stop:step`` in bits, inclusive of ``stop``.  Any field may be
    a percentage of ``max_cap`` (e.g. ``10%:80%:10%``)."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be start:stop:step, got {spec!r}")

    def value(tok):
        tok = tok.strip()
        if tok.endswith("%"):
            if max_cap is None:
                raise ValueError("percentage grid needs a known maximum capacity")
            return float(tok[:-1]) / 100.0 * max_cap
        return float(tok)

    start, stop, step = (value(p) for p in parts)
    if step <= 0:
        raise ValueError("grid step must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + k * step for k in range(max(count, 0))]


def solve(spec: ProblemSpec, method: str, max_iter: int = milp.MAX_ITER):
    if method == "brute":
        res = brute.brute_force_optimize(spec)
        return res.x, res.evaluation
    if method == "milp":
        res = milp.iterate_optimize(spec, max_iter=max_iter)
        return res.x, res.evaluation
    raise ValueError(f"unknown method {method!r}")


def compute_curve(
    hist: AbsErrorHistogram,
    n: int,
    theta: int,
    payloads: list[float],
    method: str,
    jobs: int = 1,
    max_iter: int = milp.MAX_ITER,
) -> list[CurvePoint]:
    """One independent solve per payload; rows come back sorted by payload."""
    queries = max(hist.total, 1)

    def point(payload):
        try:
            x, ev = solve(ProblemSpec(hist, n, theta, payload), method, max_iter)
        except Infeasible:
            return CurvePoint(payload, math.nan, math.nan, math.nan, (), method, "infeasible")
        except RevStegoError as exc:
            log.warning("payload %s failed: %s", payload, exc)
            return CurvePoint(payload, math.nan, math.nan, math.nan, (), method, "error")
        return CurvePoint(payload, ev.distortion, ev.distortion / queries, ev.capacity, x, method)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(point, payloads))
    else:
        points = [point(p) for p in payloads]
    return sorted(points, key=lambda p: p.payload)


def curve_csv(points: list[CurvePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_FIELDS)
    for p in points:
        w.writerow(
            [
                repr(p.payload),
                repr(p.distortion),
                repr(p.distortion_per_query),
                repr(p.capacity),
                " ".join(map(str, p.x)),
                p.method,
                p.status,
            ]
        )
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _load_hist(path: str) -> AbsErrorHistogram:
    try:
        return AbsErrorHistogram.from_csv(Path(path).read_text())
    except (ValueError, UnicodeDecodeError) as exc:
        raise PGMFormatError(f"{path}: {exc}") from exc


def _spec_from_args(args) -> ProblemSpec:
    hist = _load_hist(args.histogram)
    n = args.n if args.n is not None else imaging.select_n(hist, args.theta)
    return ProblemSpec(hist, n, args.theta, args.payload)


def _parse_x(text: str) -> tuple[int, ...]:
    try:
        return model.check_links(int(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise ValueError(f"bad link vector {text!r}: {exc}") from exc


def cmd_histogram(args) -> int:
    hist = imaging.abs_error_histogram(imaging.load_pgm(args.image))
    _emit(hist.to_csv(), args.out)
    return EXIT_OK


def cmd_brute(args) -> int:
    spec = _spec_from_args(args)
    res = brute.brute_force_optimize(spec)
    _emit(
        _dump(
            {
                "x": list(res.x),
                "capacity_bits": res.evaluation.capacity,
                "distortion": res.evaluation.distortion,
                "evaluated_count": res.evaluated_count,
            }
        ),
        args.out,
    )
    return EXIT_OK


def cmd_optimize(args) -> int:
    spec = _spec_from_args(args)
    res = milp.iterate_optimize(spec, max_iter=args.max_iter)
    _emit(_dump(res.to_json()), args.out)
    return EXIT_OK


def cmd_curve(args) -> int:
    hist = _load_hist(args.histogram)
    n = args.n if args.n is not None else imaging.select_n(hist, args.theta)
    payloads = parse_grid(args.grid, model.max_capacity(hist, n, args.theta))
    points = compute_curve(hist, n, args.theta, payloads, args.method, args.jobs, args.max_iter)
    _emit(curve_csv(points), args.out)
    return EXIT_OK


def _read_message(args) -> MessageBits:
    if args.message:
        return MessageBits.from_bytes(Path(args.message).read_bytes())
    if args.random_bits is not None:
        rng = random.Random(args.seed)
        return MessageBits(rng.getrandbits(args.random_bits) if args.random_bits else 0, args.random_bits)
    return MessageBits()


def cmd_embed(args) -> int:
    cover = imaging.load_pgm(args.image)
    message = _read_message(args)
    hist = imaging.abs_error_histogram(cover)
    if args.x == "auto":
        n = args.n if args.n is not None else imaging.select_n(hist, args.theta)
        payload = args.payload if args.payload is not None else float(message.framed_length)
        res = milp.iterate_optimize(ProblemSpec(hist, n, args.theta, payload), max_iter=args.max_iter)
        x = res.x
    else:
        x = _parse_x(args.x)
    stego = imaging.encode(cover, x, message)
    imaging.save_pgm(stego, args.out)
    coding = {"x": list(x), "n": len(x) - 1, "theta": sum(x) if args.x != "auto" else args.theta}
    if args.coding_out:
        Path(args.coding_out).write_text(_dump(coding))
    mse, psnr = imaging.mse_psnr(cover, stego)
    report = {
        "x": list(x),
        "bits_embedded": message.length,
        "capacity_bits": codec.exact_capacity_bits(codec.build_coding_map(x), hist) - codec.HEADER_BITS,
        "mse": mse,
        "psnr_db": psnr if math.isfinite(psnr) else None,
    }
    sys.stdout.write(_dump(report))
    return EXIT_OK


def cmd_extract(args) -> int:
    stego = imaging.load_pgm(args.image)
    if args.coding:
        x = model.check_links(json.loads(Path(args.coding).read_text())["x"])
    elif args.x:
        x = _parse_x(args.x)
    else:
        raise ValueError("extract needs --x or --coding")
    cover, message = imaging.decode(stego, x)
    if args.out:
        imaging.save_pgm(cover, args.out)
    if args.message_out:
        Path(args.message_out).write_bytes(message.to_bytes() if message.length % 8 == 0 else b"")
    mse, psnr = imaging.mse_psnr(cover, stego)
    report = {
        "x": list(x),
        "bits_extracted": message.length,
        "mse": mse,
        "psnr_db": psnr if math.isfinite(psnr) else None,
    }
    sys.stdout.write(_dump(report))
    return EXIT_OK


def cmd_metrics(args) -> int:
    mse, psnr = imaging.mse_psnr(imaging.load_pgm(args.a), imaging.load_pgm(args.b))
    sys.stdout.write(_dump({"mse": mse, "psnr_db": psnr if math.isfinite(psnr) else None}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="revstego", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    h = sub.add_parser("histogram", help="absolute prediction-error histogram of a PGM as CSV")
    h.add_argument("--image", required=True)
    h.add_argument("--out")
    h.set_defaults(func=cmd_histogram)

    def problem_flags(sp, payload=True):
        sp.add_argument("--histogram", required=True)
        sp.add_argument("--n", type=int, help="largest carrier magnitude (default: chosen from the histogram)")
        sp.add_argument("--theta", type=int, required=True)
        if payload:
            sp.add_argument("--payload", type=float, required=True)
        sp.add_argument("--out")

    b = sub.add_parser("brute", help="exhaustive optimum")
    problem_flags(b)
    b.set_defaults(func=cmd_brute)

    o = sub.add_parser("optimize", help="iterative MILP optimum")
    problem_flags(o)
    o.add_argument("--max-iter", type=int, default=milp.MAX_ITER)
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("curve", help="payload-distortion curve as CSV")
    problem_flags(c, payload=False)
    c.add_argument("--grid", required=True, help="start:stop:step in bits or %% of max capacity")
    c.add_argument("--method", choices=["brute", "milp"], default="milp")
    c.add_argument("--max-iter", type=int, default=milp.MAX_ITER)
    c.add_argument("--jobs", type=int, default=1)
    c.set_defaults(func=cmd_curve)

    e = sub.add_parser("embed", help="hide a message in a PGM cover")
    e.add_argument("--image", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--x", required=True, help="comma-separated links, or 'auto'")
    e.add_argument("--theta", type=int, default=2, help="quota for --x auto")
    e.add_argument("--n", type=int)
    e.add_argument("--payload", type=float, help="target bits for --x auto (default: framed message size)")
    e.add_argument("--max-iter", type=int, default=milp.MAX_ITER)
    src = e.add_mutually_exclusive_group()
    src.add_argument("--message", help="file whose bytes are embedded")
    src.add_argument("--random-bits", type=int, help="embed this many seeded random bits")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--coding-out", help="write the coding parameters as JSON")
    e.set_defaults(func=cmd_embed)

    x = sub.add_parser("extract", help="recover cover and message from a stego PGM")
    x.add_argument("--image", required=True)
    x.add_argument("--x")
    x.add_argument("--coding", help="JSON written by embed --coding-out")
    x.add_argument("--out", help="recovered cover PGM")
    x.add_argument("--message-out")
    x.set_defaults(func=cmd_extract)

    m = sub.add_parser("metrics", help="MSE and PSNR between two PGMs")
    m.add_argument("a")
    m.add_argument("b")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("REVSTEGO_LOG", "WARNING").upper(), format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (CapacityExceeded, EmbeddingOverflow, NonEmptyReservedBins) as exc:
        print(f"capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (OSError, PGMFormatError, CorruptStream, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"input: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
