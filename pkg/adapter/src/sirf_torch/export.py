"""Forward-hook feature export in the engine's "SIRF" dump format.

The adapter moves data, not math: activations are batch-averaged and
written through the engine's own serializer, so there is exactly one
implementation of the dump format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import torch
from torch import nn

from cliqueprune.formats import write_feature_dump
from cliqueprune.model import FeatureMapSet

from .errors import NonSpatialActivation, UnknownLayer


@dataclass
class ExportManifest:
    """What was exported where, for downstream accumulation runs."""

    model_id: str
    layer_map: dict[str, str]            # layer name -> layer_id used in dumps
    steps: int
    dump_dir: str
    files: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "format": "export-manifest",
            "version": 1,
            "model_id": self.model_id,
            "layer_map": self.layer_map,
            "steps": self.steps,
            "dump_dir": self.dump_dir,
            "files": self.files,
        }, indent=2, sort_keys=True) + "\n"


def resolve_layers(model: nn.Module, layer_names: Sequence[str]) -> dict[str, nn.Module]:
    modules = dict(model.named_modules())
    resolved = {}
    for name in layer_names:
        if name not in modules:
            raise UnknownLayer(
                f"model has no layer {name!r}; available: "
                f"{sorted(n for n in modules if n)}"
            )
        resolved[name] = modules[name]
    return resolved


def export_features(model: nn.Module, layer_names: Sequence[str],
                    data: Iterable[torch.Tensor], steps: int,
                    dump_dir: str | Path, model_id: str = "model") -> ExportManifest:
    """Run ``steps`` batches and write one dump per (layer, step).

    Hooked activations must be 4-D (batch, channel, height, width); the
    batch axis is mean-reduced before writing.
    """
    dump_path = Path(dump_dir)
    dump_path.mkdir(parents=True, exist_ok=True)
    layers = resolve_layers(model, layer_names)
    captured: dict[str, torch.Tensor] = {}

    def make_hook(name: str):
        def hook(_module, _inputs, output):
            if not isinstance(output, torch.Tensor) or output.dim() != 4:
                shape = tuple(output.shape) if isinstance(output, torch.Tensor) else type(output)
                raise NonSpatialActivation(
                    f"layer {name!r} emitted {shape}, expected (B, C, H, W)"
                )
            captured[name] = output.detach()
        return hook

    handles = [module.register_forward_hook(make_hook(name))
               for name, module in layers.items()]
    manifest = ExportManifest(
        model_id=model_id,
        layer_map={name: name for name in layer_names},
        steps=steps,
        dump_dir=str(dump_path),
    )
    iterator: Iterator[torch.Tensor] = iter(data)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            for step in range(steps):
                batch = next(iterator)
                captured.clear()
                model(batch)
                for name in layer_names:
                    mean_map = captured[name].mean(dim=0).to(torch.float64).cpu().numpy()
                    fm = FeatureMapSet(
                        layer_id=name,
                        channels=mean_map.shape[0],
                        height=mean_map.shape[1],
                        width=mean_map.shape[2],
                        data=mean_map,
                    )
                    out_file = dump_path / f"{name.replace('/', '_')}__step{step:04d}.sirf"
                    out_file.write_bytes(write_feature_dump(fm))
                    manifest.files.append(out_file.name)
    finally:
        for handle in handles:
            handle.remove()
        if was_training:
            model.train()
    (dump_path / "manifest.json").write_text(manifest.to_json())
    return manifest


def random_batches(shape: tuple[int, ...], seed: int = 0) -> Iterator[torch.Tensor]:
    """Seeded toy data iterator for tests and the console scripts."""
    generator = torch.Generator().manual_seed(seed)
    while True:
        yield torch.randn(*shape, generator=generator)
