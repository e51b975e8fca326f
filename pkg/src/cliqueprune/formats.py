"""On-disk formats: "SIRF" feature dumps, "SIRM" edge matrices, JSON documents.

Binary payloads are 32-bit little-endian floats (dumps come from ML
frameworks, where f32 is native); in-memory computation stays float64.
Masks, topologies and traces are JSON so humans and downstream adapters
can both read them.
"""

from __future__ import annotations

import json
import struct
from typing import Any, Sequence

import numpy as np

from .errors import (
    AsymmetryDetected,
    BadMagic,
    LengthMismatch,
    MalformedDocument,
    NonFiniteValue,
    NonZeroDiagonal,
    VersionUnsupported,
)
from .model import (
    EdgeWeightMatrix,
    FeatureMapSet,
    Layer,
    LayerTopology,
    PruneDecision,
    PruningPlan,
)

SIRF_MAGIC = b"SIRF"
SIRM_MAGIC = b"SIRM"
FORMAT_VERSION = 1


def _take(buf: bytes, offset: int, size: int, what: str) -> tuple[bytes, int]:
    if offset + size > len(buf):
        raise LengthMismatch(f"truncated stream while reading {what}")
    return buf[offset:offset + size], offset + size


def _read_header(buf: bytes, magic: bytes) -> tuple[str, int]:
    got, off = _take(buf, 0, 4, "magic")
    if got != magic:
        raise BadMagic(f"expected magic {magic!r}, got {got!r}")
    raw, off = _take(buf, off, 4, "version")
    (version,) = struct.unpack("<I", raw)
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"version {version} unsupported (expected {FORMAT_VERSION})")
    raw, off = _take(buf, off, 4, "name length")
    (name_len,) = struct.unpack("<I", raw)
    raw, off = _take(buf, off, name_len, "layer id")
    return raw.decode("utf-8"), off


def _f32_payload(values: np.ndarray, what: str) -> bytes:
    out = np.ascontiguousarray(values, dtype="<f4")
    if not np.isfinite(out).all():
        raise NonFiniteValue(f"{what}: value overflows float32")
    return out.tobytes()


# ---------------------------------------------------------------------------
# "SIRF" feature dumps
# ---------------------------------------------------------------------------

def write_feature_dump(fm: FeatureMapSet) -> bytes:
    name = fm.layer_id.encode("utf-8")
    head = SIRF_MAGIC + struct.pack("<II", FORMAT_VERSION, len(name)) + name
    head += struct.pack("<III", fm.channels, fm.height, fm.width)
    return head + _f32_payload(fm.data, f"layer {fm.layer_id!r}")


def read_feature_dump(buf: bytes) -> FeatureMapSet:
    layer_id, off = _read_header(buf, SIRF_MAGIC)
    raw, off = _take(buf, off, 12, "dimensions")
    c, h, w = struct.unpack("<III", raw)
    expected = c * h * w * 4
    if len(buf) - off != expected:
        raise LengthMismatch(
            f"layer {layer_id!r}: payload holds {(len(buf) - off) // 4} floats, "
            f"expected {c * h * w}"
        )
    data = np.frombuffer(buf, dtype="<f4", offset=off).astype(np.float64)
    if not np.isfinite(data).all():
        raise NonFiniteValue(f"layer {layer_id!r}: non-finite activation in dump")
    return FeatureMapSet(layer_id=layer_id, channels=c, height=h, width=w, data=data)


# ---------------------------------------------------------------------------
# "SIRM" edge-weight matrices
# ---------------------------------------------------------------------------

def write_edge_matrix(m: EdgeWeightMatrix) -> bytes:
    name = m.layer_id.encode("utf-8")
    head = SIRM_MAGIC + struct.pack("<II", FORMAT_VERSION, len(name)) + name
    head += struct.pack("<IQd", m.n, m.update_count, m.alpha)
    return head + _f32_payload(m.weights, f"layer {m.layer_id!r}")


def read_edge_matrix(buf: bytes) -> EdgeWeightMatrix:
    layer_id, off = _read_header(buf, SIRM_MAGIC)
    raw, off = _take(buf, off, 4 + 8 + 8, "matrix header")
    n, update_count, alpha = struct.unpack("<IQd", raw)
    if len(buf) - off != n * n * 4:
        raise LengthMismatch(
            f"layer {layer_id!r}: payload holds {(len(buf) - off) // 4} floats, "
            f"expected {n * n}"
        )
    w = np.frombuffer(buf, dtype="<f4", offset=off).astype(np.float64).reshape(n, n)
    # full matrix is stored; symmetry and the zero diagonal are validated,
    # not repaired
    if np.abs(w - w.T).max() > 0.0:
        raise AsymmetryDetected(f"layer {layer_id!r}: stored matrix not symmetric")
    if np.abs(np.diagonal(w)).max() > 0.0:
        raise NonZeroDiagonal(f"layer {layer_id!r}: stored diagonal not zero")
    return EdgeWeightMatrix(layer_id=layer_id, weights=w, update_count=update_count, alpha=alpha)


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------

def _dump_json(doc: dict[str, Any]) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load_json(text: str, expected_format: str) -> dict[str, Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != expected_format:
        raise MalformedDocument(f"expected a {expected_format!r} document")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionUnsupported(f"unsupported {expected_format!r} document version")
    return doc


def write_mask(d: PruneDecision) -> str:
    return _dump_json({
        "format": "mask",
        "version": FORMAT_VERSION,
        "layer_id": d.layer_id,
        "channels": d.channels,
        "kept": list(d.kept),
        "pruned": list(d.pruned),
        "removal_trace": [[k, s] for k, s in d.removal_trace],
    })


def read_mask(text: str) -> PruneDecision:
    doc = _load_json(text, "mask")
    try:
        return PruneDecision(
            layer_id=doc["layer_id"],
            channels=int(doc["channels"]),
            kept=tuple(doc["kept"]),
            pruned=tuple(doc["pruned"]),
            removal_trace=tuple((k, s) for k, s in doc["removal_trace"]),
        )
    except KeyError as exc:
        raise MalformedDocument(f"mask document missing field {exc}") from exc


def write_topology(t: LayerTopology) -> str:
    return _dump_json({
        "format": "topology",
        "version": FORMAT_VERSION,
        "layers": [
            {
                "layer_id": l.layer_id,
                "kind": l.kind,
                "in_channels": l.in_channels,
                "out_channels": l.out_channels,
                "kernel_h": l.kernel_h,
                "kernel_w": l.kernel_w,
                "out_h": l.out_h,
                "out_w": l.out_w,
            }
            for l in t.layers
        ],
        "links": [[p, c] for p, c in t.links],
    })


def read_topology(text: str) -> LayerTopology:
    doc = _load_json(text, "topology")
    try:
        layers = tuple(
            Layer(
                layer_id=entry["layer_id"],
                kind=entry["kind"],
                in_channels=int(entry["in_channels"]),
                out_channels=int(entry["out_channels"]),
                kernel_h=int(entry.get("kernel_h", 1)),
                kernel_w=int(entry.get("kernel_w", 1)),
                out_h=int(entry.get("out_h", 1)),
                out_w=int(entry.get("out_w", 1)),
            )
            for entry in doc["layers"]
        )
        links = tuple((p, c) for p, c in doc.get("links", []))
    except KeyError as exc:
        raise MalformedDocument(f"topology document missing field {exc}") from exc
    return LayerTopology(layers=layers, links=links)


def write_plan(plan: PruningPlan) -> str:
    return _dump_json({
        "format": "plan",
        "version": FORMAT_VERSION,
        "t_step": plan.t_step,
        "stage_targets": list(plan.stage_targets),
        "alpha": plan.alpha,
        "max_channel_sparsity": plan.max_channel_sparsity,
        "metric": plan.metric,
        "resolution_scale": plan.resolution_scale,
    })


def read_plan(text: str) -> PruningPlan:
    doc = _load_json(text, "plan")
    try:
        plan = PruningPlan(
            stage_targets=tuple(doc["stage_targets"]),
            alpha=float(doc.get("alpha", 0.99)),
            max_channel_sparsity=float(doc.get("max_channel_sparsity", 0.9)),
            metric=doc.get("metric", "js"),
            resolution_scale=str(doc.get("resolution_scale", "1")),
        )
    except KeyError as exc:
        raise MalformedDocument(f"plan document missing field {exc}") from exc
    if "t_step" in doc and int(doc["t_step"]) != plan.t_step:
        raise MalformedDocument(
            f"plan declares t_step={doc['t_step']} but lists "
            f"{plan.t_step} stage targets"
        )
    return plan


def write_trace_doc(layer_id: str, channels: int,
                    trace: Sequence[tuple[int, float]]) -> str:
    """Importance trace carrier consumed by the allocator CLI."""
    return _dump_json({
        "format": "trace",
        "version": FORMAT_VERSION,
        "layer_id": layer_id,
        "channels": channels,
        "removal_trace": [[int(k), float(s)] for k, s in trace],
    })


def read_trace_doc(text: str) -> tuple[str, int, tuple[tuple[int, float], ...]]:
    doc = _load_json(text, "trace")
    try:
        return (
            doc["layer_id"],
            int(doc["channels"]),
            tuple((int(k), float(s)) for k, s in doc["removal_trace"]),
        )
    except KeyError as exc:
        raise MalformedDocument(f"trace document missing field {exc}") from exc
