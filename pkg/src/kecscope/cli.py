"""Command-line front end: generate, analyze, inject, simulate.

Exit codes: 0 success, 2 usage error, 3 target not found / trojan does not
fit the budget, 4 netlist validation failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from . import depgraph, grouping, scoring, sim
from .generator import GenConfig, GroundTruth, generate_accelerator
from .locate import (KeccakNotPresentError, PipelineConfig, SearchBounds,
                     run_pipeline)
from .netlist import NetlistError, anonymize, parse_netlist, validate, write_netlist
from .trojan import HthSpec, insert_hth, overhead_report, reconstruct_secret

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_FOUND = 3
EXIT_INVALID = 4


def _outdir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_netlist(path):
    try:
        netlist = parse_netlist(Path(path).read_text())
    except FileNotFoundError:
        print(f"error: netlist file {path} not found", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    except NetlistError as e:
        print(f"error: {e}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)
    problems = validate(netlist)
    if problems:
        for v in problems[:10]:
            print(f"violation: {v.kind}: {v.detail}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)
    return netlist


def _bounds_to_json(b):
    def enc(v):
        return None if v == math.inf else v
    return {"fif": b.fif, "fic": enc(b.fic), "fof": b.fof, "foc": enc(b.foc)}


def cmd_gen(args):
    cfg = GenConfig(w=args.w, instances=args.instances, shares=args.shares,
                    decoy_ffs=args.decoys, seed=args.seed, loader=args.loader)
    try:
        netlist, truth = generate_accelerator(cfg)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.anonymize_seed is not None:
        netlist, rename = anonymize(netlist, args.anonymize_seed)
        truth = truth.remap(rename)
    out = _outdir(args)
    (out / "design.nl").write_text(write_netlist(netlist))
    (out / "design.truth.json").write_text(truth.to_json())
    if args.anonymize_seed is not None:
        (out / "design.rename.json").write_text(json.dumps(rename, indent=1))
    print(f"wrote {out / 'design.nl'} "
          f"({netlist.cell_count()} cells, {len(netlist.flip_flops())} ffs)")
    if truth.window_collisions:
        print(f"warning: {len(truth.window_collisions)} decoy flip-flops "
              f"inside the state window", file=sys.stderr)
    return EXIT_OK


def cmd_analyze(args):
    netlist = _load_netlist(args.netlist)
    override = None
    if any(v is not None for v in (args.fif, args.fic, args.fof, args.foc)):
        if args.fif is None or args.fof is None:
            print("error: bound overrides need at least --fif and --fof",
                  file=sys.stderr)
            return EXIT_USAGE
        override = SearchBounds(
            args.fif, args.fic if args.fic is not None else math.inf,
            args.fof, args.foc if args.foc is not None else math.inf)
    config = PipelineConfig(lane_width=args.lane_width, instances=args.instances,
                            shares=args.shares, bounds_override=override)
    t0 = time.perf_counter()
    try:
        result, stage_ms = run_pipeline(netlist, config)
    except KeccakNotPresentError as e:
        print(f"not found: {e}", file=sys.stderr)
        return EXIT_NOT_FOUND
    total_ms = (time.perf_counter() - t0) * 1e3

    report = {
        "report_type": "analyze",
        "netlist": str(args.netlist),
        "lane_width": args.lane_width,
        "variant": result.variant,
        "found": result.found(),
        "bounds": _bounds_to_json(result.bounds),
        "expected_state_count": result.expected_state_count,
        "state_candidates": sorted(result.state_candidates),
        "input_candidates": result.input_candidates,
        "winning_group": result.winning_group,
        "stage_ms": {k: round(v, 3) for k, v in stage_ms.items()},
        "total_ms": round(total_ms, 3),
    }
    if args.sidecar:
        truth = GroundTruth.from_json(Path(args.sidecar).read_text())
        st, ins = set(truth.all_state_ffs()), set(truth.all_input_ffs())
        got_st, got_in = set(result.state_candidates), set(result.input_candidates)
        report["truth"] = {
            "state_summary": f"{len(got_st)}/{len(st)}",
            "state_recall": len(st & got_st) / len(st) if st else 1.0,
            "state_precision": len(st & got_st) / len(got_st) if got_st else 0.0,
            "input_recall": len(ins & got_in) / len(ins) if ins else 1.0,
            "input_precision": (len(ins & got_in) / len(got_in)) if got_in else 0.0,
        }
        print(f"state candidates/actual: {report['truth']['state_summary']}")
    out = _outdir(args)
    (out / "report.json").write_text(json.dumps(report, indent=1))
    graph = depgraph.extract_dependencies(netlist)
    (out / "scores.csv").write_text(
        scoring.dump_scores(scoring.compute_zscores(graph)))
    (out / "degrees.csv").write_text(depgraph.dump_degrees(graph))
    (out / "groups.csv").write_text(
        grouping.dump_groups(grouping.group_by_levels(
            grouping.compute_levels(graph))))
    print(f"wrote {out / 'report.json'} (variant {result.variant}, "
          f"{len(result.input_candidates)} input candidates)")
    return EXIT_OK if result.found() else EXIT_NOT_FOUND


def cmd_inject(args):
    netlist = _load_netlist(args.netlist)
    try:
        spec = HthSpec(t=args.t, l=args.l,
                       trigger=int(args.trigger_hex, 16),
                       capture_delay=args.capture_delay,
                       k_offset=args.k_offset)
        spec.validate()
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.result:
        rep = json.loads(Path(args.result).read_text())
        inputs = rep["input_candidates"]
        from .locate import RepqcResult
        result = RepqcResult(frozenset(rep["state_candidates"]), inputs,
                             rep.get("winning_group"), rep.get("variant", "grouped"),
                             args.lane_width, rep.get("expected_state_count", 0))
    else:
        try:
            result, _ = run_pipeline(netlist, PipelineConfig(
                lane_width=args.lane_width, instances=args.instances,
                shares=args.shares))
        except KeccakNotPresentError as e:
            print(f"not found: {e}", file=sys.stderr)
            return EXIT_NOT_FOUND
    if not result.found():
        print("not found: no input register located", file=sys.stderr)
        return EXIT_NOT_FOUND

    from .trojan import InsertionError
    try:
        trojaned, edit = insert_hth(netlist, result, spec,
                                    reset_net=args.reset_net)
    except InsertionError as e:
        print(f"not found: {e}", file=sys.stderr)
        return EXIT_NOT_FOUND
    overhead = overhead_report(netlist, trojaned, budget_pct=args.budget_pct)
    report = {
        "report_type": "inject",
        "netlist": str(args.netlist),
        "trojan": {"t": spec.t, "l": spec.l, "trigger_hex": f"{spec.trigger:x}",
                   "capture_delay": spec.capture_delay,
                   "leak_width": spec.leak_width},
        "audit": {
            "added_cells": len(edit.added_cells),
            "added_nets": len(edit.added_nets),
            "tapped_nets": edit.tapped_nets,
            "removed_cells": len(edit.removed_cells),
            "removed_nets": len(edit.removed_nets),
        },
        "overhead": overhead,
    }
    out = _outdir(args)
    (out / "trojaned.nl").write_text(write_netlist(trojaned))
    (out / "eco_audit.json").write_text(edit.to_json())
    (out / "inject_report.json").write_text(json.dumps(report, indent=1))
    print(f"wrote {out / 'trojaned.nl'} (+{overhead['delta_cells']} cells, "
          f"{overhead['delta_pct']}%)")
    if overhead["fits"] is False:
        print(f"does not fit: {overhead['delta_pct']}% over "
              f"{args.budget_pct}% budget", file=sys.stderr)
        return EXIT_NOT_FOUND
    return EXIT_OK


def cmd_simulate(args):
    netlist = _load_netlist(args.netlist)
    try:
        stimulus = sim.parse_stimulus(Path(args.stimulus).read_text())
        cycles = args.cycles if args.cycles is not None else len(stimulus)
        trace = sim.simulate(netlist, stimulus, cycles)
    except sim.SimulationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    stealth = None
    if args.baseline:
        baseline = _load_netlist(args.baseline)
        try:
            stealth = sim.equivalence_check(baseline, netlist, stimulus, cycles)
        except sim.PortMismatchError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
    secret = None
    recovered = None
    if args.secret_width:
        secret = reconstruct_secret(trace, args.secret_width)
    if args.expect_secret_hex is not None and secret is not None:
        recovered = secret == int(args.expect_secret_hex, 16)
    report = {
        "report_type": "simulate",
        "netlist": str(args.netlist),
        "cycles": cycles,
        "leak_cycles": len(trace.leak_symbols()),
        "recovered_secret_hex": f"{secret:x}" if secret is not None else None,
        "k_recovered": recovered,
        "stealth_equal": stealth,
    }
    out = _outdir(args)
    (out / "trace.csv").write_text(sim.dump_trace(trace))
    (out / "sim_report.json").write_text(json.dumps(report, indent=1))
    print(f"wrote {out / 'trace.csv'} ({cycles} cycles, "
          f"{report['leak_cycles']} leak cycles)")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(
        prog="kecscope",
        description="Locate Keccak cores in blind netlists and insert a "
                    "power side-channel trojan at the recovered input register.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a victim accelerator and sidecar")
    g.add_argument("--w", type=int, default=64)
    g.add_argument("--instances", type=int, default=1)
    g.add_argument("--shares", type=int, default=1)
    g.add_argument("--decoys", type=int, default=0)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--loader", choices=("absorb", "split"), default="absorb")
    g.add_argument("--anonymize-seed", type=int, default=None)
    g.add_argument("--config", help="JSON config, overrides flags")
    g.add_argument("--out-dir", default=".")
    g.set_defaults(fn=cmd_gen)

    a = sub.add_parser("analyze", help="run the localization pipeline")
    a.add_argument("--netlist", required=True)
    a.add_argument("--sidecar")
    a.add_argument("--lane-width", type=int, default=64)
    a.add_argument("--instances", type=int, default=1)
    a.add_argument("--shares", type=int, default=1)
    a.add_argument("--fif", type=int)
    a.add_argument("--fic", type=int)
    a.add_argument("--fof", type=int)
    a.add_argument("--foc", type=int)
    a.add_argument("--config", help="JSON config, overrides flags")
    a.add_argument("--out-dir", default=".")
    a.set_defaults(fn=cmd_analyze)

    i = sub.add_parser("inject", help="insert the trojan at the located register")
    i.add_argument("--netlist", required=True)
    i.add_argument("--result", help="analyze report.json; omitted = analyze inline")
    i.add_argument("--lane-width", type=int, default=64)
    i.add_argument("--instances", type=int, default=1)
    i.add_argument("--shares", type=int, default=1)
    i.add_argument("--t", type=int, default=64)
    i.add_argument("--l", type=int, default=64)
    i.add_argument("--trigger-hex", required=True)
    i.add_argument("--capture-delay", type=int, default=2)
    i.add_argument("--k-offset", type=int, default=0)
    i.add_argument("--budget-pct", type=float, default=None)
    i.add_argument("--reset-net", default=None)
    i.add_argument("--config", help="JSON config, overrides flags")
    i.add_argument("--out-dir", default=".")
    i.set_defaults(fn=cmd_inject)

    s = sub.add_parser("simulate", help="cycle-accurate simulation and verdicts")
    s.add_argument("--netlist", required=True)
    s.add_argument("--stimulus", required=True)
    s.add_argument("--cycles", type=int, default=None)
    s.add_argument("--baseline", help="stealth-compare primary outputs against")
    s.add_argument("--secret-width", type=int, default=None)
    s.add_argument("--expect-secret-hex", default=None)
    s.add_argument("--config", help="JSON config, overrides flags")
    s.add_argument("--out-dir", default=".")
    s.set_defaults(fn=cmd_simulate)
    return ap


def _apply_config(args):
    """Batch workflows drive runs from JSON config files whose entries
    override the corresponding flags."""
    if not getattr(args, "config", None):
        return
    overrides = json.loads(Path(args.config).read_text())
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest) or dest in ("fn", "command", "config"):
            print(f"error: unknown config key {key!r}", file=sys.stderr)
            raise SystemExit(EXIT_USAGE)
        setattr(args, dest, value)


def main(argv=None):
    args = build_parser().parse_args(argv)
    _apply_config(args)
    if args.command == "gen" and args.seed is None:
        print("error: gen needs --seed (or a seed in --config)", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
