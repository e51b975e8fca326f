"""Physical channel slicing of torch models from engine mask documents.

Supported model shapes are chains: a pruned convolution's consumer is the
next parametric layer in registration order, with batch-norm and
activations in between handled transparently.  Normalization statistics
are sliced positionally; restoring accuracy after surgery is fine-tuning's
job, not the adapter's.
"""

from __future__ import annotations

import copy
from typing import Mapping, Sequence

import torch
from torch import nn

from cliqueprune.model import PruneDecision

from .errors import ShapeConflict, UnresolvedCoupling

_PARAMETRIC = (nn.Conv2d, nn.Linear)


def _slice_out_channels(module: nn.Module, kept: Sequence[int]) -> None:
    idx = torch.as_tensor(kept, dtype=torch.long)
    if isinstance(module, nn.Conv2d):
        module.weight = nn.Parameter(module.weight.data[idx].clone())
        if module.bias is not None:
            module.bias = nn.Parameter(module.bias.data[idx].clone())
        module.out_channels = len(kept)
    elif isinstance(module, nn.Linear):
        module.weight = nn.Parameter(module.weight.data[idx].clone())
        if module.bias is not None:
            module.bias = nn.Parameter(module.bias.data[idx].clone())
        module.out_features = len(kept)
    else:
        raise ShapeConflict(f"cannot prune outputs of {type(module).__name__}")


def _slice_in_channels(module: nn.Module, kept: Sequence[int],
                       original: int, name: str) -> None:
    idx = torch.as_tensor(kept, dtype=torch.long)
    if isinstance(module, nn.Conv2d):
        if module.groups != 1:
            raise UnresolvedCoupling(f"consumer {name!r} is grouped; not supported")
        if module.in_channels != original:
            raise UnresolvedCoupling(
                f"consumer {name!r} expects {module.in_channels} inputs, "
                f"producer had {original}"
            )
        module.weight = nn.Parameter(module.weight.data[:, idx].clone())
        module.in_channels = len(kept)
    elif isinstance(module, nn.Linear):
        if module.in_features != original:
            raise UnresolvedCoupling(
                f"consumer {name!r} has {module.in_features} input features; "
                f"only 1:1 channel-to-feature layouts can be sliced "
                f"(producer had {original} channels)"
            )
        module.weight = nn.Parameter(module.weight.data[:, idx].clone())
        module.in_features = len(kept)
    else:
        raise UnresolvedCoupling(f"cannot slice inputs of {type(module).__name__}")


def _slice_batchnorm(module: nn.BatchNorm2d, kept: Sequence[int]) -> None:
    idx = torch.as_tensor(kept, dtype=torch.long)
    if module.affine:
        module.weight = nn.Parameter(module.weight.data[idx].clone())
        module.bias = nn.Parameter(module.bias.data[idx].clone())
    if module.track_running_stats:
        module.running_mean = module.running_mean[idx].clone()
        module.running_var = module.running_var[idx].clone()
    module.num_features = len(kept)


def apply_masks(model: nn.Module,
                decisions: Mapping[str, PruneDecision] | Sequence[PruneDecision],
                inplace: bool = False) -> nn.Module:
    """Slice pruned output channels and their downstream consumers.

    Returns the pruned model (a deep copy unless ``inplace``).  Masks that
    keep every channel leave the model untouched.
    """
    if not isinstance(decisions, Mapping):
        decisions = {d.layer_id: d for d in decisions}
    pruned_model = model if inplace else copy.deepcopy(model)
    named = [(name, module) for name, module in pruned_model.named_modules() if name]
    by_name = dict(named)

    for layer_id, decision in decisions.items():
        if layer_id not in by_name:
            raise UnresolvedCoupling(f"mask names unknown layer {layer_id!r}")
        module = by_name[layer_id]
        if not isinstance(module, _PARAMETRIC):
            raise ShapeConflict(
                f"layer {layer_id!r} is {type(module).__name__}, not prunable"
            )
        out_now = module.out_channels if isinstance(module, nn.Conv2d) else module.out_features
        if out_now != decision.channels:
            raise ShapeConflict(
                f"mask for {layer_id!r} declares {decision.channels} channels, "
                f"module has {out_now}"
            )
        kept = list(decision.kept)
        if len(kept) == decision.channels:
            continue
        _slice_out_channels(module, kept)

        # walk to the next parametric layer; batch-norms in between follow
        # the producer's channel space
        position = next(i for i, (n, _) in enumerate(named) if n == layer_id)
        for name, downstream in named[position + 1:]:
            if isinstance(downstream, nn.BatchNorm2d):
                if downstream.num_features != decision.channels:
                    raise UnresolvedCoupling(
                        f"norm layer {name!r} tracks {downstream.num_features} "
                        f"channels, producer had {decision.channels}"
                    )
                _slice_batchnorm(downstream, kept)
            elif isinstance(downstream, _PARAMETRIC):
                _slice_in_channels(downstream, kept, decision.channels, name)
                break
    return pruned_model


def zero_out_equivalence(model: nn.Module, decision: PruneDecision,
                         example_input: torch.Tensor) -> float:
    """Max abs output gap between pruning and zeroing the pruned channels.

    Zeroing a channel's outgoing weights (and bias) silences exactly the
    contribution that slicing removes, so for chain models with
    zero-preserving activations the two paths agree up to float
    reassociation.
    """
    zeroed = copy.deepcopy(model)
    module = dict(zeroed.named_modules())[decision.layer_id]
    pruned_idx = torch.as_tensor(decision.pruned, dtype=torch.long)
    with torch.no_grad():
        module.weight[pruned_idx] = 0.0
        if module.bias is not None:
            module.bias[pruned_idx] = 0.0
    pruned = apply_masks(model, [decision])
    zeroed.eval()
    pruned.eval()
    with torch.no_grad():
        ref = zeroed(example_input)
        out = pruned(example_input)
    if ref.shape != out.shape:
        if ref.dim() < 2:
            raise ShapeConflict("cannot align outputs for comparison")
        ref = ref[:, torch.as_tensor(decision.kept, dtype=torch.long)]
    return float((ref - out).abs().max())
