"""Command-line entry point: ``burstgate {run,sweep,sizing,mos,table1}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .engine import loss_summary, run_many, sweep
from .errors import BurstgateError, InvariantViolation, IterationError, ScenarioError
from .queue import bdp_size_bytes, small_buffer_size_bytes, tiny_buffer_size_packets
from .scenario import DEFAULT_MOS_DELAYS_MS, RunConfig, load_scenario, utilization
from .traffic import BURST_TABLE

EXIT_OK = 0
EXIT_USER = 1
EXIT_INTERNAL = 2


class StageError(Exception):
    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"{stage} error: {message}")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}")


def _load(path):
    p = Path(path)
    if not p.is_file():
        raise StageError("io", f"scenario file not found: {path}")
    try:
        return load_scenario(p)
    except ScenarioError as exc:
        raise StageError("validate", f"{path}: {exc}")
    except (json.JSONDecodeError, TypeError, ValueError, BurstgateError) as exc:
        raise StageError("parse", f"{path}: {exc}")


def _write(out: Path, name: str, text: str):
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise StageError("io", f"cannot write {out / name}: {exc}")


def _summary(scenario, results, cfg) -> str:
    per_flow, (am, asd) = loss_summary(results)
    util = [r.measured_utilization for r in results]
    lines = [
        f"iterations: {cfg.iterations}",
        f"master_seed: {cfg.master_seed}",
        f"link_capacity_bps: {scenario.link.capacity_bps:.0f}",
        f"buffer: {scenario.buffer.limit} {scenario.buffer.mode}",
        f"nominal_utilization: {utilization(scenario):.4f}",
        f"measured_utilization: {np.mean(util):.4f} +- {np.std(util, ddof=1) if len(util) > 1 else 0.0:.4f}",
        "",
        f"{'flow_id':<12} {'kind':<9} {'mean_loss':>10} {'std_loss':>10}",
    ]
    kinds = results[0].kinds
    for f, (m, sd) in per_flow.items():
        lines.append(f"{f:<12} {kinds[f]:<9} {m:>10.6f} {sd:>10.6f}")
    lines.append(f"{'aggregate':<12} {'':<9} {am:>10.6f} {asd:>10.6f}")
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    scenario = _load(args.scenario)
    cfg = RunConfig(args.iterations, args.seed, tuple(args.delays))
    results = run_many(scenario, cfg, threads=args.threads,
                       instrumented=args.instrumented, warmup_s=args.warmup_s)
    out = Path(args.out)
    _write(out, "per_iteration.csv", metrics.per_iteration_csv(results))
    _write(out, "summary.txt", _summary(scenario, results, cfg))
    try:
        voip = metrics.voip_flow_ids(results)
    except metrics.NoVoipFlows:
        voip = []
    if voip:
        losses = [100.0 * r.per_flow[f].loss_rate for r in results for f in voip]
    else:
        losses = [100.0 * r.aggregate.loss_rate for r in results]
    _write(out, "loss_histogram.csv",
           metrics.histogram_csv(metrics.histogram(losses, metrics.LOSS_EDGES_PERCENT)))
    if voip:
        calls = metrics.voip_mos_per_iteration(results, scenario.link.network_delay_ms)
        h = metrics.histogram([c.mos for c in calls], metrics.MOS_EDGES)
        _write(out, "mos_histogram.csv", metrics.histogram_csv(h))
        _write(out, "mos_cdf.csv", metrics.cdf_csv(metrics.mos_cdf(results, cfg.mos_delay_sweep_ms)))
    print(f"wrote results for {cfg.iterations} iterations to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = _load(args.scenario)
    if not args.values or any(v <= 0 for v in args.values):
        raise StageError("validate", "--values must be positive numbers")
    param = "buffer_limit" if args.param == "buffer" else "capacity_bps"
    values = [int(v) if param == "buffer_limit" and float(v).is_integer() else v for v in args.values]
    cfg = RunConfig(args.iterations, args.seed)
    try:
        points = sweep(scenario, param, values, cfg, threads=args.threads)
    except ScenarioError as exc:
        raise StageError("validate", str(exc))
    except ValueError as exc:
        raise StageError("validate", str(exc))
    _write(Path(args.out), "sweep.csv", metrics.sweep_csv(points))
    print(f"wrote sweep over {len(values)} values to {Path(args.out) / 'sweep.csv'}")
    return EXIT_OK


def cmd_sizing(args) -> int:
    if args.rule == "tiny":
        print(f"{tiny_buffer_size_packets(args.preferred)} packets")
        return EXIT_OK
    missing = [f for f, v in (("--capacity-bps", args.capacity_bps), ("--rtt-s", args.rtt_s)) if v is None]
    if args.rule == "small" and args.flows is None:
        missing.append("--flows")
    if missing:
        raise StageError("parse", f"rule {args.rule} needs {', '.join(missing)}")
    if args.rule == "bdp":
        size = bdp_size_bytes(args.capacity_bps, args.rtt_s)
    else:
        size = small_buffer_size_bytes(args.capacity_bps, args.rtt_s, args.flows)
    print(f"{size} bytes ({size // 1500} packets @1500B)")
    return EXIT_OK


def cmd_mos(args) -> int:
    if not 0 <= args.loss_percent <= 100:
        raise StageError("validate", "--loss-percent must be in [0, 100]")
    if args.delay_ms < 0:
        raise StageError("validate", "--delay-ms must be >= 0")
    p = metrics.EModelParams(r0=args.r0, is_impairment=args.is_impairment, advantage=args.advantage,
                             ie=args.ie, bpl=args.bpl, codec_delay_ms=0.0)
    r = metrics.r_factor(args.loss_percent, args.delay_ms, p)
    m = metrics.mos_from_r(r)
    print(f"R={r:.2f} MOS={m:.2f} band={metrics.quality_band(m)}")
    return EXIT_OK


def table1_csv() -> str:
    lines = ["resolution,compression_kbytes,packets_per_burst"]
    lines += [f"{e.resolution},{e.compression_kbytes},{e.packets_per_burst}" for e in BURST_TABLE]
    return "\n".join(lines) + "\n"


def cmd_table1(args) -> int:
    text = table1_csv()
    if args.out:
        _write(Path(args.out).parent, Path(args.out).name, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="burstgate", description="Bottleneck buffer loss and VoIP MOS simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True)
        p.add_argument("--iterations", type=int, default=40)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--out", required=True)
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads, 0 = auto (default: $BURSTGATE_THREADS)")

    p = sub.add_parser("run", help="run a scenario repeatedly and write CSV results")
    common(p)
    p.add_argument("--delays", type=_float_list, default=list(DEFAULT_MOS_DELAYS_MS),
                   help="network delays (ms) for the MOS CDF, comma separated")
    p.add_argument("--warmup-s", type=float, default=0.0)
    p.add_argument("--instrumented", action="store_true",
                   help="cross-check against the event-by-event reference and assert invariants")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep buffer size or link capacity")
    common(p)
    p.add_argument("--param", choices=("buffer", "capacity"), required=True)
    p.add_argument("--values", type=_float_list, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sizing", help="buffer sizing rules of thumb")
    p.add_argument("--rule", choices=("bdp", "small", "tiny"), required=True)
    p.add_argument("--capacity-bps", type=float)
    p.add_argument("--rtt-s", type=float)
    p.add_argument("--flows", type=int)
    p.add_argument("--preferred", type=int)
    p.set_defaults(func=cmd_sizing)

    p = sub.add_parser("mos", help="E-model R-factor and MOS for a loss/delay pair")
    p.add_argument("--loss-percent", type=float, required=True)
    p.add_argument("--delay-ms", type=float, required=True)
    d = metrics.DEFAULT_EMODEL
    p.add_argument("--r0", type=float, default=d.r0)
    p.add_argument("--ie", type=float, default=d.ie)
    p.add_argument("--bpl", type=float, default=d.bpl)
    p.add_argument("--is", dest="is_impairment", type=float, default=d.is_impairment)
    p.add_argument("--advantage", type=float, default=d.advantage)
    p.set_defaults(func=cmd_mos)

    p = sub.add_parser("table1", help="print the camera packets-per-burst table as CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_table1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USER
    except IterationError as exc:
        if isinstance(exc.cause, InvariantViolation):
            print(f"internal invariant violation: {exc}", file=sys.stderr)
            return EXIT_INTERNAL
        print(f"run error: {exc}", file=sys.stderr)
        return EXIT_USER
    except InvariantViolation as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (BurstgateError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
