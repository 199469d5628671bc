"""Command-line front end.

Subcommands: analyze, simulate, encode, decode, trace. Defaults can come
from a JSON config file (``--config`` or ``$SELFCORRECT_CONFIG``) whose
keys are the long option names with dashes as underscores; command-line
flags override it.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from .analytic import ScenarioParams, payload_proportions, transfer_cost, xor_burden
from .baseline import run_baseline_transfer
from .campaign import SCHEMA_VERSION, ExperimentConfig, payload_for, run_campaign
from .container import ContainerError, decode_file, encode_file
from .engine import run_transfer
from .hamming import MEDIUM, naive_scan_cost

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNCORRECTABLE = 3
EXIT_ABORTED = 4
EXIT_CORRUPTED = 5
EXIT_BAD_INPUT = 6

CONFIG_ENV = "SELFCORRECT_CONFIG"


def parse_seeds(text) -> list[int]:
    """``"7"``, ``"0-63"``, ``"1,5,9"`` or a mix such as ``"0-3,10"``."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(s) for s in text]
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError(f"no seeds in {text!r}")
    return seeds


def parse_flip(text: str) -> tuple[int, int]:
    try:
        frame, bit = text.split(":")
        return int(frame), int(bit)
    except ValueError:
        raise argparse.ArgumentTypeError(f"flip must be FRAME:BIT, got {text!r}") from None


def probability(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not a probability in [0, 1]")
    return value


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} must be positive")
    return value


def _json_default(obj):
    if isinstance(obj, bytes):
        return obj.hex()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_clean(v) for v in value]
    return value


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _table(rows: list[tuple[str, str]]) -> str:
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    keys = list(rows[0]) if rows else []
    writer = csv.DictWriter(buf, fieldnames=keys, extrasaction="ignore")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: json.dumps(v) if isinstance(v, (dict, list)) else v for k, v in r.items()})
    return buf.getvalue()


# -- analyze ----------------------------------------------------------------

def analyze_report(args) -> dict:
    params = ScenarioParams(
        ber=args.ber,
        transfer_bytes=args.bytes,
        prob_digits=None if args.exact else 3,
        whole_packets=args.whole_packets,
    )
    cost = transfer_cost(params)
    proto_share, base_share = payload_proportions(params)
    return {
        "schema_version": SCHEMA_VERSION,
        "params": {"ber": params.ber, "transfer_bytes": params.transfer_bytes,
                   "prob_digits": params.prob_digits, "whole_packets": params.whole_packets},
        **cost.as_dict(),
        "protocol_payload_proportion": proto_share,
        "baseline_payload_proportion": base_share,
        "xor_ops_per_block": naive_scan_cost(MEDIUM),
        "xor_ops_per_second": xor_burden(args.rate),
        "rate_bytes_per_sec": args.rate,
    }


def cmd_analyze(args) -> int:
    rep = analyze_report(args)
    if args.format == "json":
        _emit(json.dumps(_clean(rep), indent=2) + "\n", args.out)
    elif args.format == "csv":
        flat = {k: v for k, v in rep.items() if k != "params"} | {f"param_{k}": v for k, v in rep["params"].items()}
        _emit(_csv([flat]), args.out)
    else:
        ratio = rep["ratio"]
        rows = [
            ("bit error rate", f"{rep['params']['ber']:g}"),
            ("P(error = 0)", f"{rep['p0']:.3f}"),
            ("P(error = 1)", f"{rep['p1']:.3f}"),
            ("P(error >= 2)", f"{rep['p2plus']:.3f}"),
            ("baseline P(error >= 1)", f"{rep['baseline_p_err']:.3f}"),
            ("protocol cost / packet (B)", f"{rep['protocol_cost_per_packet']:.1f}"),
            ("baseline cost / packet (B)", f"{rep['baseline_cost_per_packet']:.1f}"),
            (f"protocol cost / {rep['params']['transfer_bytes']} B", f"{rep['protocol_total']:.0f}"),
            (f"baseline cost / {rep['params']['transfer_bytes']} B", f"{rep['baseline_total']:.0f}"),
            ("cost ratio", "n/a" if not math.isfinite(ratio) else f"{ratio:.3f} ({ratio:.0%})"),
            ("protocol payload proportion", f"{rep['protocol_payload_proportion']:.1%}"),
            ("baseline payload proportion", f"{rep['baseline_payload_proportion']:.1%}"),
            ("XOR ops per medium block", f"{rep['xor_ops_per_block']}"),
            (f"XOR ops/s at {rep['rate_bytes_per_sec']} B/s", f"{rep['xor_ops_per_second']} ({rep['xor_ops_per_second']:.1e})"),
        ]
        _emit(_table(rows), args.out)
    return EXIT_OK


# -- simulate / trace --------------------------------------------------------

def _experiment(args) -> ExperimentConfig:
    return ExperimentConfig(
        ber=args.ber, loss=args.loss, transfer_bytes=args.bytes, hops=args.hops,
        seeds=parse_seeds(args.seeds), max_retries=args.max_retries, timeout_ticks=args.timeout,
        baseline=args.baseline, noisy=args.noisy, tolerance=args.tolerance, jobs=args.jobs,
    )


def cmd_simulate(args) -> int:
    cfg = _experiment(args)
    rep = run_campaign(cfg).as_dict()
    if args.format == "json":
        _emit(json.dumps(_clean(rep), indent=2, default=_json_default) + "\n", args.out)
    elif args.format == "csv":
        _emit(_csv(rep["rows"]), args.out)
    else:
        pc = rep["poisson_check"]
        rows = [
            ("scheme", "baseline (FCS discard)" if cfg.baseline else "self-correcting"),
            ("seeds", str(len(cfg.seeds))),
            ("mean overhead (B)", f"{rep['mean_overhead']:.0f}"),
            ("stdev (B)", f"{rep['stdev_overhead']:.0f}"),
            ("analytic prediction (B)", f"{rep['analytic_cost']:.0f}"),
            (f"within {cfg.tolerance:.0%}", str(rep["within_tolerance"])),
            ("DATA frames observed", str(pc["frames"])),
        ]
        for k, v in pc["k"].items():
            rows.append((f"P(k={k}) observed / Poisson", f"{v['observed']:.4f} / {v['expected']:.4f} (z={v['z']:+.2f})"))
        rows += [("aborted seeds", str(rep["aborted"])), ("corrupted deliveries", str(rep["corrupted"]))]
        _emit(_table(rows), args.out)
    if rep["corrupted"]:
        return EXIT_CORRUPTED
    if rep["aborted"]:
        return EXIT_ABORTED
    return EXIT_OK


def cmd_trace(args) -> int:
    cfg = _experiment(args)
    seed = cfg.seeds[0]
    lines = []
    run = run_baseline_transfer if cfg.baseline else run_transfer
    report = run(payload_for(seed, cfg.transfer_bytes), cfg.hops, cfg.channels(seed), cfg.engine_params(),
                 trace=lambda ev: lines.append(json.dumps(ev, default=_json_default)))
    lines.append(json.dumps({"event": "summary", "seed": seed, **_clean(report.summary())}))
    _emit("\n".join(lines) + "\n", args.out)
    if report.status == "corrupted":
        return EXIT_CORRUPTED
    return EXIT_ABORTED if report.status == "aborted" else EXIT_OK


# -- encode / decode ---------------------------------------------------------

def cmd_encode(args) -> int:
    data = Path(args.input).read_bytes()
    if not data:
        print("error: input file is empty", file=sys.stderr)
        return EXIT_BAD_INPUT
    Path(args.out).write_bytes(encode_file(data))
    return EXIT_OK


def cmd_decode(args) -> int:
    flips: dict[int, list[int]] = {}
    for frame, bit in args.flip or ():
        flips.setdefault(frame, []).append(bit)
    try:
        data, reports = decode_file(Path(args.input).read_bytes(), flips)
    except ContainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    for r in reports:
        status = "ok" if r.ok else "FAILED"
        detail = r.error or ", ".join(r.outcomes)
        print(f"frame {r.index}: {status} [{detail}]", file=sys.stderr)
    bad = [r.index for r in reports if not r.ok]
    if bad:
        print(f"error: uncorrectable frame(s): {', '.join(map(str, bad))}", file=sys.stderr)
        return EXIT_UNCORRECTABLE
    Path(args.out).write_bytes(data)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _scenario_flags(p: argparse.ArgumentParser, hops: int = 1):
    p.add_argument("--ber", type=probability, default=1e-5, help="bit error probability per bit")
    p.add_argument("--loss", type=probability, default=0.0, help="frame loss probability")
    p.add_argument("--bytes", type=positive_int, default=1 << 20, help="transfer size in bytes")
    p.add_argument("--hops", type=int, default=hops, help="number of relays")
    p.add_argument("--max-retries", type=int, default=16)
    p.add_argument("--timeout", type=positive_int, default=8, help="timeout ticks per hop round trip")
    p.add_argument("--baseline", action="store_true", help="simulate the FCS-discard baseline")
    p.add_argument("--noisy", choices=("first", "all"), default="first",
                   help="apply ber/loss to the first link only, or to every link")
    p.add_argument("--tolerance", type=float, default=0.10)
    p.add_argument("--jobs", type=positive_int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selfcorrect", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help=f"JSON defaults file (default: ${CONFIG_ENV})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="closed-form cost comparison")
    p.add_argument("--ber", type=probability, default=1e-5)
    p.add_argument("--bytes", type=int, default=1 << 20)
    p.add_argument("--rate", type=positive_int, default=1 << 20, help="link rate in bytes/s for XOR burden")
    p.add_argument("--exact", action="store_true", help="do not round probabilities to 3 decimals")
    p.add_argument("--whole-packets", action="store_true", help="round packet counts up")
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="seeded Monte Carlo campaign")
    _scenario_flags(p)
    p.add_argument("--seeds", "--seed", dest="seeds", default="0-63", help="e.g. 0-63 or 1,2,3")
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trace", help="JSONL event trace of one transfer")
    _scenario_flags(p)
    p.add_argument("--seed", "--seeds", dest="seeds", default="0")
    p.add_argument("--out")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("encode", help="shard a file into DATA frames")
    p.add_argument("input")
    p.add_argument("--out", "-o", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="parse framed file, optionally injecting bit flips")
    p.add_argument("input")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--flip", type=parse_flip, action="append", metavar="FRAME:BIT",
                   help="flip wire bit BIT of frame FRAME before decoding (repeatable)")
    p.set_defaults(func=cmd_decode)
    return parser


def load_config(path: str | None) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    pre_parser = argparse.ArgumentParser(add_help=False)
    pre_parser.add_argument("--config")
    pre, _ = pre_parser.parse_known_args(argv)
    try:
        cfg = load_config(pre.config)
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read config: {exc}")
    if cfg:
        for action in parser._subparsers._group_actions:
            for sp in action.choices.values():
                known = {a.dest for a in sp._actions}
                sp.set_defaults(**{k: v for k, v in cfg.items() if k in known})
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
