"""Command-line driver: accumulate / solve / prune / simulate / report.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 infeasible
target.  Results go to files or standard output; diagnostics go to
standard error.  Flags beat the optional --config JSON file, which beats
the built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import allocator, ema, formats, mewcp, pipeline
from .errors import Infeasible, PruningEngineError
from .model import PruneDecision
from .redundancy import pairwise_redundancy

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INFEASIBLE = 3

DEFAULTS = {
    "metric": "js",
    "scale": "1",
    "alpha": 0.99,
    "max_sparsity": 0.9,
    "solver": "greedy",
    "seed": 42,
    "threads": os.cpu_count() or 1,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; the contract here is exit 1
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cliqueprune", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    acc = sub.add_parser("accumulate", help="fold SIRF feature dumps into SIRM edge matrices")
    acc.add_argument("--dumps", nargs="+", required=True, metavar="FILE",
                     help="SIRF files, applied in the given order per layer")
    acc.add_argument("--state", required=True, metavar="DIR",
                     help="directory of SIRM files to create or update")
    acc.add_argument("--metric", choices=["js", "kl", "dice", "dot"])
    acc.add_argument("--scale", choices=["1", "1/2", "1/4", "2", "pooled-vector"])
    acc.add_argument("--alpha", type=float)
    acc.add_argument("--config")

    solve = sub.add_parser("solve", help="solve one layer's clique problem from a SIRM file")
    solve.add_argument("--input", required=True, metavar="FILE")
    group = solve.add_mutually_exclusive_group(required=True)
    group.add_argument("--keep", type=int, help="clique cardinality to keep")
    group.add_argument("--prune", type=int, help="number of channels to prune")
    solve.add_argument("--solver", choices=["greedy", "exact"])
    solve.add_argument("--output", metavar="FILE", help="mask document path (default: stdout)")
    solve.add_argument("--emit-trace", metavar="FILE",
                       help="also write the full importance trace document")
    solve.add_argument("--config")

    prune = sub.add_parser("prune", help="allocate keep counts across layers and emit masks")
    prune.add_argument("--traces", nargs="+", required=True, metavar="FILE",
                       help="trace documents, one per prunable layer")
    prune.add_argument("--topology", required=True, metavar="FILE")
    prune.add_argument("--target", type=float, required=True,
                       help="cumulative FLOPs-reduction fraction in [0, 1)")
    prune.add_argument("--max-sparsity", type=float, dest="max_sparsity")
    prune.add_argument("--out-dir", required=True, metavar="DIR")
    prune.add_argument("--config")

    sim = sub.add_parser("simulate", help="run the progressive pipeline on a synthetic spec")
    sim.add_argument("--spec", required=True, metavar="FILE")
    sim.add_argument("--plan", required=True, metavar="FILE")
    sim.add_argument("--out-dir", required=True, metavar="DIR")
    sim.add_argument("--seed", type=int,
                     help="override the stream seed from the spec document")
    sim.add_argument("--threads", type=int)
    sim.add_argument("--verbose", action="store_true",
                     help="print per-stage wall-clock to stderr")
    sim.add_argument("--config")

    rep = sub.add_parser("report", help="pretty-print a run report")
    rep.add_argument("--input", required=True, metavar="FILE")
    rep.add_argument("--config")

    return parser


def _load_config(args: argparse.Namespace) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    try:
        config = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise PruningEngineError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise PruningEngineError(f"config {path} must hold a JSON object")
    return config


def _resolve(args: argparse.Namespace, config: dict, key: str):
    """Flag > config file > default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return DEFAULTS.get(key)


def _cmd_accumulate(args) -> int:
    config = _load_config(args)
    metric = _resolve(args, config, "metric")
    scale = _resolve(args, config, "scale")
    alpha = float(_resolve(args, config, "alpha"))
    state_dir = Path(args.state)
    state_dir.mkdir(parents=True, exist_ok=True)
    count = 0
    for dump_path in args.dumps:
        fm = formats.read_feature_dump(Path(dump_path).read_bytes())
        state_path = state_dir / f"{fm.layer_id}.sirm"
        if state_path.exists():
            matrix = formats.read_edge_matrix(state_path.read_bytes())
            if matrix.n != fm.channels:
                raise PruningEngineError(
                    f"layer {fm.layer_id!r}: state has {matrix.n} channels, "
                    f"dump has {fm.channels}"
                )
        else:
            matrix = ema.ema_init(fm.channels, alpha, layer_id=fm.layer_id)
        r = pairwise_redundancy(fm, metric, scale)
        matrix = ema.ema_update(matrix, r)
        state_path.write_bytes(formats.write_edge_matrix(matrix))
        count += 1
    print(f"applied {count} dump(s) into {state_dir}", file=sys.stderr)
    return EXIT_OK


def _cmd_solve(args) -> int:
    config = _load_config(args)
    solver = _resolve(args, config, "solver")
    matrix = formats.read_edge_matrix(Path(args.input).read_bytes())
    if args.keep is not None:
        keep = args.keep
        num_prune = matrix.n - keep
    else:
        num_prune = args.prune
        keep = matrix.n - num_prune
    if solver == "exact":
        solution = mewcp.exact_mewcp(matrix, keep)
    else:
        solution = mewcp.ehgp(matrix, num_prune)
    decision = PruneDecision(
        layer_id=matrix.layer_id,
        channels=matrix.n,
        kept=solution.kept,
        pruned=tuple(sorted(set(range(matrix.n)) - set(solution.kept))),
        removal_trace=solution.removal_trace,
    )
    text = formats.write_mask(decision)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if args.emit_trace:
        trace = mewcp.importance_trace(matrix)
        Path(args.emit_trace).write_text(
            formats.write_trace_doc(matrix.layer_id, matrix.n, trace)
        )
    print(f"objective {solution.objective:.6f} keeping {len(solution.kept)} "
          f"of {matrix.n} channels", file=sys.stderr)
    return EXIT_OK


def _cmd_prune(args) -> int:
    config = _load_config(args)
    max_sparsity = float(_resolve(args, config, "max_sparsity"))
    topology = formats.read_topology(Path(args.topology).read_text())
    traces: dict[str, tuple[tuple[int, float], ...]] = {}
    for path in args.traces:
        layer_id, channels, trace = formats.read_trace_doc(Path(path).read_text())
        layer = topology.layer(layer_id)
        if channels != layer.out_channels:
            raise PruningEngineError(
                f"trace for {layer_id!r} declares {channels} channels, "
                f"topology says {layer.out_channels}"
            )
        # full trace only: one survivor, every other channel ordered
        if len(trace) != channels - 1:
            raise PruningEngineError(
                f"trace for {layer_id!r} must cover {channels - 1} removals, "
                f"got {len(trace)}"
            )
        traces[layer_id] = trace
    keep_counts = allocator.threshold_allocate(
        traces, topology, args.target, max_sparsity
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for layer in topology.layers:
        layer_id = layer.layer_id
        channels = layer.out_channels
        if layer_id in traces:
            trace = traces[layer_id]
            num_prune = channels - keep_counts[layer_id]
            pruned_entries = trace[:num_prune]
            pruned = tuple(sorted(k for k, _ in pruned_entries))
            kept = tuple(sorted(set(range(channels)) - set(pruned)))
            decision = PruneDecision(
                layer_id=layer_id, channels=channels, kept=kept, pruned=pruned,
                removal_trace=tuple(pruned_entries),
            )
        else:
            decision = PruneDecision(
                layer_id=layer_id, channels=channels,
                kept=tuple(range(channels)), pruned=(), removal_trace=(),
            )
        (out_dir / f"{layer_id}.mask.json").write_text(formats.write_mask(decision))
    full = allocator.total_flops(topology)
    achieved = 1.0 - allocator.total_flops(topology, keep_counts) / full
    print(f"achieved reduction {achieved:.4f} (target {args.target})", file=sys.stderr)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = _load_config(args)
    threads = int(_resolve(args, config, "threads"))
    spec = pipeline.read_synthetic_spec(Path(args.spec).read_text())
    seed = args.seed if args.seed is not None else config.get("seed")
    if seed is not None:
        spec = pipeline.SyntheticNetSpec(
            topology=spec.topology, generators=spec.generators,
            seed=int(seed), steps_per_stage=spec.steps_per_stage,
        )
    plan = formats.read_plan(Path(args.plan).read_text())
    report = pipeline.run_pipeline(spec, plan, threads=threads)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(pipeline.write_report(report))
    for decision in report.decisions:
        (out_dir / f"{decision.layer_id}.mask.json").write_text(
            formats.write_mask(decision)
        )
    if args.verbose:
        for stage in report.stages:
            print(f"stage {stage.stage}: target {stage.cumulative_target:.2f} "
                  f"achieved {stage.achieved_reduction:.4f} "
                  f"in {stage.wall_seconds:.3f}s", file=sys.stderr)
    print(f"wrote report and {len(report.decisions)} mask(s) to {out_dir}",
          file=sys.stderr)
    return EXIT_OK


def _cmd_report(args) -> int:
    doc = pipeline.read_report(Path(args.input).read_text())
    for stage in doc["stages"]:
        print(f"stage {stage['stage']}: target {stage['cumulative_target']:.2f} "
              f"achieved {stage['achieved_reduction']:.4f}")
        for layer_id, count in sorted(stage["keep_counts"].items()):
            objective = stage["objectives"].get(layer_id)
            suffix = f"  objective {objective:.6f}" if objective is not None else ""
            print(f"  {layer_id}: keep {count}{suffix}")
    print("final kept channels:")
    for layer_id, kept in sorted(doc["final_keep"].items()):
        print(f"  {layer_id}: {kept}")
    return EXIT_OK


_COMMANDS = {
    "accumulate": _cmd_accumulate,
    "solve": _cmd_solve,
    "prune": _cmd_prune,
    "simulate": _cmd_simulate,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (PruningEngineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
