"""Console scripts bridging torch models and the engine's file formats.

`sirfp-export` writes SIRF dumps from forward hooks; `sirfp-apply` slices
a model according to emitted mask documents.  Exit codes: 0 success,
1 usage error, 2 data/model error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import torch

from cliqueprune.errors import PruningEngineError
from cliqueprune.formats import read_mask

from .errors import AdapterError
from .export import export_features, random_batches
from .models import REGISTRY, build_model
from .surgery import apply_masks, zero_out_equivalence


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _load_model(name: str, checkpoint: str | None, seed: int):
    model = build_model(name, seed=seed)
    if checkpoint:
        state = torch.load(checkpoint, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    model.eval()
    return model


def export_main(argv: list[str] | None = None) -> int:
    parser = _Parser(prog="sirfp-export",
                     description="export batch-averaged SIRF feature dumps")
    parser.add_argument("--model", required=True, choices=sorted(REGISTRY))
    parser.add_argument("--checkpoint", help="optional state_dict to load")
    parser.add_argument("--layers", nargs="+", required=True)
    parser.add_argument("--steps", type=int, default=4)
    parser.add_argument("--batch", type=int, default=2)
    parser.add_argument("--size", type=int, default=16, help="input height/width")
    parser.add_argument("--in-channels", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, metavar="DIR")
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        model = _load_model(args.model, args.checkpoint, args.seed)
        data = random_batches((args.batch, args.in_channels, args.size, args.size),
                              seed=args.seed)
        manifest = export_features(model, args.layers, data, args.steps,
                                   args.out, model_id=args.model)
    except (AdapterError, PruningEngineError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"exported {len(manifest.files)} dump(s) to {manifest.dump_dir}",
          file=sys.stderr)
    return 0


def apply_main(argv: list[str] | None = None) -> int:
    parser = _Parser(prog="sirfp-apply",
                     description="slice model channels per engine mask documents")
    parser.add_argument("--model", required=True, choices=sorted(REGISTRY))
    parser.add_argument("--checkpoint", help="optional state_dict to load")
    parser.add_argument("--masks", nargs="+", required=True, metavar="FILE")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, metavar="FILE",
                        help="where to save the pruned state_dict")
    parser.add_argument("--verify", action="store_true",
                        help="check zero-out-then-prune equivalence first")
    parser.add_argument("--size", type=int, default=16)
    parser.add_argument("--in-channels", type=int, default=3)
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        model = _load_model(args.model, args.checkpoint, args.seed)
        decisions = [read_mask(Path(p).read_text()) for p in args.masks]
        if args.verify:
            example = torch.randn(1, args.in_channels, args.size, args.size,
                                  generator=torch.Generator().manual_seed(args.seed))
            for decision in decisions:
                gap = zero_out_equivalence(model, decision, example)
                print(f"verify {decision.layer_id}: max |diff| = {gap:.2e}",
                      file=sys.stderr)
                if gap > 1e-5:
                    print("error: equivalence check failed", file=sys.stderr)
                    return 2
        pruned = apply_masks(model, decisions)
        torch.save(pruned.state_dict(), args.out)
    except (AdapterError, PruningEngineError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"saved pruned state_dict to {args.out}", file=sys.stderr)
    return 0
