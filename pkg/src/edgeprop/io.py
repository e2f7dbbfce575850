"""File formats: binary matrices, dataset bundles, text inputs, checkpoints.

Binary matrix format ("EABGZ1"): the 6 magic bytes ``EABGZ1``, two
little-endian u64 fields (rows, cols), then row-major little-endian float64
payload.  Embeddings and checkpoint weights share this format.

A dataset bundle is a single ``.npz`` file holding the compacted edge list,
attributes, optional labels, and the original string identifier tables, so
``ingest -> load`` round-trips the in-memory graph exactly.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .graph import BipartiteEdgeGraph
from .training import ModelParams, TrainConfig

__all__ = [
    "MATRIX_MAGIC",
    "write_matrix",
    "read_matrix",
    "save_bundle",
    "load_bundle",
    "parse_edge_file",
    "parse_attr_file",
    "parse_label_file",
    "ingest",
    "save_checkpoint",
    "load_checkpoint",
]

MATRIX_MAGIC = b"EABGZ1"


def write_matrix(path: str | Path, matrix: np.ndarray) -> None:
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValidationError("matrix files hold 2-D arrays")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<QQ", matrix.shape[0], matrix.shape[1]))
        fh.write(matrix.astype("<f8").tobytes(order="C"))


def read_matrix(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(MATRIX_MAGIC))
        if magic != MATRIX_MAGIC:
            raise ValidationError(f"{path}: not a matrix file (bad magic {magic!r})")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        payload = fh.read(rows * cols * 8)
    if len(payload) != rows * cols * 8:
        raise ValidationError(f"{path}: truncated matrix payload")
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)


def save_bundle(
    path: str | Path,
    g: BipartiteEdgeGraph,
    u_ids: list[str] | None = None,
    v_ids: list[str] | None = None,
    class_names: list[str] | None = None,
) -> None:
    """Write a dataset bundle as a single npz file."""
    data: dict = {
        "schema_version": np.int64(1),
        "num_u": np.int64(g.num_u),
        "num_v": np.int64(g.num_v),
        "edges": g.edges,
        "attrs": g.attrs,
    }
    if g.labels is not None:
        data["labels"] = g.labels
    if u_ids is not None:
        data["u_ids"] = np.array(u_ids, dtype=str)
    if v_ids is not None:
        data["v_ids"] = np.array(v_ids, dtype=str)
    if class_names is not None:
        data["class_names"] = np.array(class_names, dtype=str)
    np.savez(path, **data)


def load_bundle(path: str | Path) -> tuple[BipartiteEdgeGraph, dict]:
    """Load a bundle; returns the graph and the identifier tables."""
    with np.load(path, allow_pickle=False) as data:
        graph = BipartiteEdgeGraph(
            num_u=int(data["num_u"]),
            num_v=int(data["num_v"]),
            edges=data["edges"],
            attrs=data["attrs"],
            labels=data["labels"] if "labels" in data else None,
        )
        meta = {
            key: data[key].tolist()
            for key in ("u_ids", "v_ids", "class_names")
            if key in data
        }
    return graph, meta


def parse_edge_file(path: str | Path) -> list[tuple[str, str]]:
    """Read a TSV edge list of ``u_id<TAB>v_id`` string pairs."""
    pairs: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValidationError(
                    f"{path}:{lineno}: expected 'u<TAB>v', got {line!r}"
                )
            pairs.append((parts[0], parts[1]))
    if not pairs:
        raise ValidationError(f"{path}: no edges found")
    return pairs


def parse_attr_file(path: str | Path, num_edges: int) -> np.ndarray:
    """Read edge attributes from CSV or from a binary matrix file."""
    with open(path, "rb") as fh:
        is_binary = fh.read(len(MATRIX_MAGIC)) == MATRIX_MAGIC
    if is_binary:
        attrs = read_matrix(path)
    else:
        rows = []
        width = None
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = [float(tok) for tok in line.split(",")]
                except ValueError as exc:
                    raise ValidationError(f"{path}:{lineno}: {exc}") from exc
                if width is None:
                    width = len(row)
                elif len(row) != width:
                    raise ValidationError(
                        f"{path}:{lineno}: expected {width} values, got {len(row)}"
                    )
                rows.append(row)
        attrs = np.array(rows, dtype=np.float64)
    if attrs.shape[0] != num_edges:
        raise ValidationError(
            f"{path}: {attrs.shape[0]} attribute rows for {num_edges} edges"
        )
    return attrs


def parse_label_file(path: str | Path, num_edges: int) -> tuple[np.ndarray, list[str]]:
    """Read per-edge class names, multiple per line separated by semicolons.

    Blank lines mean "unlabeled edge".  The class vocabulary is sorted so the
    column order is independent of file order.
    """
    per_edge: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            names = [tok.strip() for tok in line.rstrip("\n").split(";") if tok.strip()]
            per_edge.append(names)
    if len(per_edge) != num_edges:
        raise ValidationError(
            f"{path}: {len(per_edge)} label rows for {num_edges} edges"
        )
    vocab = sorted({name for names in per_edge for name in names})
    if not vocab:
        raise ValidationError(f"{path}: no labels found")
    col = {name: i for i, name in enumerate(vocab)}
    labels = np.zeros((num_edges, len(vocab)))
    for i, names in enumerate(per_edge):
        for name in names:
            labels[i, col[name]] = 1.0
    return labels, vocab


def ingest(
    edges_path: str | Path,
    attrs_path: str | Path,
    labels_path: str | Path | None,
    out_path: str | Path,
) -> BipartiteEdgeGraph:
    """Parse the three text inputs, validate, compact, and write a bundle."""
    pairs = parse_edge_file(edges_path)
    attrs = parse_attr_file(attrs_path, len(pairs))
    labels, class_names = (None, None)
    if labels_path is not None:
        labels, class_names = parse_label_file(labels_path, len(pairs))
    graph, u_ids, v_ids = BipartiteEdgeGraph.from_raw(pairs, attrs, labels)
    save_bundle(out_path, graph, u_ids=u_ids, v_ids=v_ids, class_names=class_names)
    return graph


def _config_to_dict(config: TrainConfig) -> dict:
    return dataclasses.asdict(config)


def config_from_dict(data: dict) -> TrainConfig:
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return TrainConfig(**data)


def save_checkpoint(
    directory: str | Path,
    params: ModelParams,
    config: TrainConfig,
    history: dict,
) -> None:
    """Write one matrix file per weight plus a JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    shapes = {}
    for name, weight in params.weights.items():
        write_matrix(directory / f"{name}.bin", weight)
        shapes[name] = list(weight.shape)
    manifest = {
        "schema_version": 1,
        "weights": shapes,
        "config": _config_to_dict(config),
        "best_epoch": history.get("best_epoch"),
        "best_val_auc": history.get("best_val_auc"),
        "train_loss": history.get("train_loss", []),
        "val_auc": [
            None if x != x else x for x in history.get("val_auc", [])
        ],
        "label_access": history.get("label_access", {}),
    }
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


def load_checkpoint(directory: str | Path) -> tuple[ModelParams, TrainConfig, dict]:
    directory = Path(directory)
    try:
        with open(directory / "manifest.json", "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise ValidationError(f"{directory}: not a checkpoint (no manifest)") from exc
    weights = {
        name: read_matrix(directory / f"{name}.bin") for name in manifest["weights"]
    }
    for name, shape in manifest["weights"].items():
        if list(weights[name].shape) != shape:
            raise ValidationError(f"checkpoint weight {name} has wrong shape")
    config = config_from_dict(manifest["config"])
    return ModelParams.from_weights(weights), config, manifest
