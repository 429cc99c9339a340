"""Command-line entry point: ``moegps <subcommand> ...``.

Exit status: 0 on success, 1 on invalid input or usage errors, 2 on I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from dataclasses import replace

from . import __version__
from .config import load_json, load_run_config
from .domain import (
    InvalidInputError,
    TokenDistribution,
    WorkloadConfig,
    distribution_from_skewness,
    read_trace,
    sample_trace,
    write_trace,
)
from .duplication import Placement, balance_by_duplication, verify_balance
from .estimation import error_rate, mle_estimate, update_moving_average
from .pipeline import simulate_layer, simulate_prefill
from .predictors import PredictorSpec
from .sweep import SweepRecord, distribution_error_for, recommend, records_to_csv, run_sweep, savings_table

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


# --------------------------------------------------------------------------- #
# Subcommands
# --------------------------------------------------------------------------- #


def cmd_gen_trace(args) -> None:
    if args.probs:
        dist = TokenDistribution([float(x) for x in args.probs.split(",")])
    else:
        if args.experts is None:
            raise InvalidInputError("gen-trace needs --experts (or --probs)")
        dist = distribution_from_skewness(args.experts, args.skew)
    seq_len = args.seq_len or args.tokens
    if args.tokens % seq_len:
        raise InvalidInputError("--tokens must be a multiple of --seq-len")
    workload = WorkloadConfig(args.tokens // seq_len, seq_len, skewness=max(1.0, dist.skewness()))
    trace = sample_trace(dist, workload, args.top_k, args.seed, num_layers=args.layers)
    write_trace(trace, args.out or sys.stdout)


def cmd_trace_stats(args) -> None:
    trace = read_trace(args.trace, args.experts)
    counts = trace.counts()
    stats = {
        "layers": trace.num_layers,
        "tokens": trace.token_count,
        "top_k": trace.top_k,
        "num_experts": trace.num_experts,
        "skewness": trace.skewness(),
        "layer_skewness": trace.layer_skewness().tolist(),
        "counts": counts.tolist(),
    }
    if args.format == "csv":
        rows = [{"layer": i, "skewness": float(s), **{f"expert_{e}": int(c) for e, c in enumerate(counts[i])}}
                for i, s in enumerate(trace.layer_skewness())]
        _emit(_rows_to_csv(rows, list(rows[0])), args.out)
    else:
        _emit(_dump_json(stats), args.out)


def _load_truth(path, num_experts):
    if str(path).endswith(".jsonl"):
        return mle_estimate(read_trace(path, num_experts)).probs
    data = load_json(path)
    return TokenDistribution(data["probs"] if isinstance(data, dict) else data).probs


def cmd_estimate(args) -> None:
    est = None
    E = args.experts
    for path in args.trace:
        trace = read_trace(path, E)
        E = trace.num_experts
        if est is None:
            est = mle_estimate(trace, args.smoothing)
        else:
            est = update_moving_average(est, trace.counts(), args.mode, args.lam)
    out = est.to_json()
    if args.truth:
        out["error_rate"] = error_rate(est, _load_truth(args.truth, E))
    _emit(_dump_json(out), args.out)


def cmd_duplicate(args) -> None:
    trace = read_trace(args.trace, args.experts)
    if not 0 <= args.layer < trace.num_layers:
        raise InvalidInputError(f"layer {args.layer} out of range")
    layer = trace.layers[args.layer]
    if args.placement:
        placement = Placement.from_json(load_json(args.placement))
    else:
        if args.gpus is None:
            raise InvalidInputError("duplicate needs --placement or --gpus")
        caps = None if args.capacity is None else [args.capacity] * args.gpus
        placement = Placement.round_robin(trace.num_experts, args.gpus, caps, args.max_copies)
    result = balance_by_duplication(layer, placement)
    report = verify_balance(result.dispatch, layer, result.placement)
    out = {
        "placement": result.placement.to_json(),
        "dispatch": result.dispatch.to_json(),
        "report": report.to_json(),
        "complete": result.complete,
        "iterations": result.iterations,
        "copies_made": result.copies_made,
    }
    _emit(_dump_json(out), args.out)


def _apply_overrides(cfg, args):
    if getattr(args, "skew", None) is not None:
        cfg = replace(cfg, workload=WorkloadConfig(cfg.workload.batch_size, cfg.workload.seq_len, skewness=args.skew))
    if getattr(args, "strategy", None):
        if args.strategy == "token_to_expert":
            if args.accuracy is None:
                raise InvalidInputError("--strategy token_to_expert needs --accuracy")
            spec = PredictorSpec.token_to_expert(args.accuracy)
        elif args.strategy == "distribution_only":
            spec = PredictorSpec.distribution_only(0.0)  # filled in below
        else:
            spec = PredictorSpec.none()
        cfg = replace(cfg, strategy=spec)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_simulate(args) -> None:
    cfg = _apply_overrides(load_run_config(args.config), args)
    spec = cfg.strategy
    s = cfg.workload.effective_skewness()
    if spec.kind == "distribution_only" and (args.strategy or spec.error_rate is None):
        spec = PredictorSpec.distribution_only(distribution_error_for(s, cfg), spec.error_scenario)
    fn = simulate_prefill if args.prefill else simulate_layer
    b = fn(spec, cfg.model, cfg.workload, cfg.hardware, cfg.calibration.curve, cfg.options)
    rec = SweepRecord(cfg.hardware.name, cfg.hardware.link_bandwidth, s, spec.kind, spec.accuracy, spec.epsilon, b)
    if args.format == "csv":
        _emit(records_to_csv([rec]), args.out)
    else:
        _emit(_dump_json(rec.to_json()), args.out)


def cmd_sweep(args) -> None:
    cfg = _apply_overrides(load_run_config(args.config), args)
    grid = None if args.skew is None else [args.skew]
    records = run_sweep(cfg, skewness=grid, workers=args.workers, scenario=args.scenario)
    if args.savings:
        rows = savings_table(records)
        text = _rows_to_csv(rows, list(rows[0])) if args.format == "csv" else _dump_json(rows)
    elif args.format == "csv":
        text = records_to_csv(records)
    else:
        text = _dump_json([r.to_json() for r in records])
    _emit(text, args.out)


def cmd_recommend(args) -> None:
    cfg = _apply_overrides(load_run_config(args.config), args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rec = recommend(cfg, scenario=args.scenario)
    _emit(_dump_json(rec.to_json()), args.out)


# --------------------------------------------------------------------------- #
# Parser
# --------------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="moegps", description="MoE prefill latency simulator and expert-prediction strategy guide.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt=True, config=False):
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--seed", type=int, default=None)
        if fmt:
            sp.add_argument("--format", choices=("json", "csv"), default="json")
        if config:
            sp.add_argument("--config", required=True, help="run config JSON (path or bundled name)")
            sp.add_argument("--skew", type=float, help="override workload skewness")

    g = sub.add_parser("gen-trace", help="sample a synthetic routing trace (JSON lines)")
    g.add_argument("--experts", type=int)
    g.add_argument("--skew", type=float, default=1.0)
    g.add_argument("--probs", help="comma-separated expert probabilities instead of --skew")
    g.add_argument("--tokens", type=int, default=512)
    g.add_argument("--seq-len", type=int, default=None)
    g.add_argument("--top-k", type=int, default=1)
    g.add_argument("--layers", type=int, default=1)
    common(g, fmt=False)
    g.set_defaults(func=cmd_gen_trace, seed=0)

    t = sub.add_parser("trace-stats", help="skewness and per-expert counts of a trace")
    t.add_argument("--trace", required=True)
    t.add_argument("--experts", type=int)
    common(t)
    t.set_defaults(func=cmd_trace_stats)

    e = sub.add_parser("estimate", help="MLE expert distribution from one or more traces")
    e.add_argument("--trace", required=True, action="append", help="repeat for successive batches")
    e.add_argument("--experts", type=int)
    e.add_argument("--mode", choices=("cumulative", "exponential"), default="cumulative")
    e.add_argument("--lam", type=float)
    e.add_argument("--smoothing", type=float, default=0.0)
    e.add_argument("--truth", help="ground-truth distribution JSON or trace JSONL")
    common(e, fmt=False)
    e.set_defaults(func=cmd_estimate)

    d = sub.add_parser("duplicate", help="balance one trace layer by expert duplication")
    d.add_argument("--trace", required=True)
    d.add_argument("--experts", type=int)
    d.add_argument("--layer", type=int, default=0)
    d.add_argument("--placement", help="placement JSON; default is round-robin over --gpus")
    d.add_argument("--gpus", type=int)
    d.add_argument("--capacity", type=int)
    d.add_argument("--max-copies", type=int)
    common(d, fmt=False)
    d.set_defaults(func=cmd_duplicate)

    s = sub.add_parser("simulate", help="latency breakdown for one strategy")
    common(s, config=True)
    s.add_argument("--strategy", choices=("none", "distribution_only", "token_to_expert"))
    s.add_argument("--accuracy", type=float)
    s.add_argument("--prefill", action="store_true", help="scale to all model layers")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="grid over skewness x accuracy x hardware")
    common(w, config=True)
    w.set_defaults(format="csv")
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--scenario", choices=("optimistic", "typical", "pessimistic"), default="typical")
    w.add_argument("--savings", action="store_true", help="emit per-point savings difference instead")
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("recommend", help="fastest strategy for the configured point")
    common(r, fmt=False, config=True)
    r.add_argument("--scenario", choices=("optimistic", "typical", "pessimistic"), default="typical")
    r.set_defaults(func=cmd_recommend)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except InvalidInputError as exc:
        print(f"moegps: invalid input: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"moegps: I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
