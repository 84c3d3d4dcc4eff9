"""Command line: run, tradeoff, certify, validate.

Exit codes: 0 success, 2 invalid scenario, 3 a step had an infeasible QP,
4 the state left the barrier domain.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .scenarios import (
    SimulationAborted,
    build_world,
    emit_csv,
    emit_svg_plot,
    load_scenario,
    log_digest,
    run_scenario,
    run_tradeoff,
)

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_DOMAIN = 0, 2, 3, 4


def _parse_counts(text):
    try:
        counts = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not counts or min(counts) < 3:
        raise argparse.ArgumentTypeError("sample counts must be integers >= 3")
    return counts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sampled-cbf", description="Sampled-distance barrier safety filter simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write its log")
    run.add_argument("scenario")
    run.add_argument("--out-dir", default="out", help="directory for log.csv / plot.svg (default: out)")
    run.add_argument("--svg", action="store_true", help="also write plot.svg")
    run.add_argument("--oracle-check", action="store_true", help="fail unless oracle clearance >= sqrt(gamma) - 1e-3 at every record")

    trade = sub.add_parser("tradeoff", help="sampling density versus conservatism and filter time")
    trade.add_argument("scenario")
    trade.add_argument("--samples", type=_parse_counts, default=[50, 100, 200, 400])
    trade.add_argument("--out", default=None, help="CSV path for the report")

    cert = sub.add_parser("certify", help="print the sampling error certificate per shape")
    cert.add_argument("scenario")

    val = sub.add_parser("validate", help="check a scenario file and echo it with defaults filled")
    val.add_argument("scenario")
    return parser


def _cmd_validate(args):
    cfg = load_scenario(args.scenario)
    sys.stdout.write(cfg.to_json())
    return EXIT_OK


def _cmd_certify(args):
    cfg = load_scenario(args.scenario)
    world = build_world(cfg)
    print(f"{'shape':<14}{'n':>7}{'rho (m^2)':>16}{'2*rho (m^2)':>16}")
    for p in world.parts:
        print(f"{p.label:<14}{p.n:>7}{p.rho:>16.6g}{p.net_epsilon:>16.6g}")
    c = world.certificate
    print(f"pair epsilon from covering radii: {c.net_bound:.6g}")
    print(f"measured gap over {c.n_probes} probes with clearance <= {c.band:.4g} m: {c.measured_gap:.6g}")
    print(f"triangle-inequality bound: {c.triangle_bound:.6g}")
    print(f"epsilon used by the barrier: {world.barrier.epsilon:.6g}")
    return EXIT_OK


def _cmd_run(args):
    cfg = load_scenario(args.scenario)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    world = build_world(cfg)
    try:
        log = run_scenario(cfg, world)
        code = EXIT_OK
    except SimulationAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        log, code = exc.log, EXIT_DOMAIN
    emit_csv(log, out / "log.csv")
    if args.svg:
        emit_svg_plot(log, out / "plot.svg", world)
    meta = dict(log.metadata, digest=log_digest(log))
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    clearance = float(np.nanmin(log.d_oracle)) if len(log) and np.any(np.isfinite(log.d_oracle)) else math.nan
    print(f"records: {len(log)}  min b: {meta['min_b_all_steps']:.6g}  min oracle clearance: {clearance:.6g} m")
    print(f"modified steps: {meta['modified_steps']}  infeasible steps: {meta['infeasible_steps']}")
    print(f"epsilon: {meta['epsilon']:.6g}  mean filter time: {meta['mean_filter_time'] * 1e6:.1f} us")
    if code:
        return code
    if meta["infeasible_steps"]:
        return EXIT_INFEASIBLE
    if args.oracle_check:
        need = math.sqrt(cfg.barrier["gamma"]) - 1e-3
        if not clearance >= need:
            print(f"oracle check failed: {clearance:.6g} < {need:.6g}", file=sys.stderr)
            return 1
    return EXIT_OK


def _cmd_tradeoff(args):
    cfg = load_scenario(args.scenario)
    report = run_tradeoff(cfg, args.samples)
    print(f"{'n':>6}{'epsilon':>14}{'settled d (m)':>16}{'qp (us)':>10}{'filter (us)':>13}")
    for r in report.rows:
        print(f"{r.n_samples:>6}{r.epsilon:>14.6g}{r.settled_distance:>16.6g}{r.mean_qp_time * 1e6:>10.1f}{r.mean_filter_time * 1e6:>13.1f}")
    if args.out:
        emit_csv(report, args.out)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "tradeoff": _cmd_tradeoff, "certify": _cmd_certify, "validate": _cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ValidationError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
