"""Standalone writer for the embedding-stream dataset format.

Implements the byte layout documented in the engine repository's FORMAT.md
(magic EMBS, version 1). Deliberately self-contained: the exporter talks to
the adaptation engine only through this file format.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"EMBS"
VERSION = 1


class FormatError(ValueError):
    """Header/payload inconsistency detected while writing."""


@dataclass
class DatasetHeader:
    dim: int
    num_classes: int
    prompts_per_class: int
    num_views: int
    labels_present: bool
    class_names: list[str] = field(default_factory=list)
    prompt_texts: list[list[str]] | None = None

    def to_json_bytes(self) -> bytes:
        payload = {
            "dim": self.dim,
            "num_classes": self.num_classes,
            "prompts_per_class": self.prompts_per_class,
            "num_views": self.num_views,
            "labels_present": self.labels_present,
            "class_names": self.class_names,
            "prompt_texts": self.prompt_texts,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def check_unit_norm(vectors: np.ndarray, what: str, tolerance: float = 1e-3) -> None:
    norms = np.linalg.norm(vectors, axis=-1)
    worst = float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0
    if worst > tolerance:
        raise FormatError(f"{what} deviate from unit norm by {worst:.2e} (> {tolerance})")


def write_dataset(
    header: DatasetHeader,
    text_embeddings: np.ndarray,
    records,
    path: str | Path,
) -> int:
    """Write (header, C*K*d text embeddings, records) to `path`.

    `records` yields (sample_id, views (N+1, d), label or None). Returns the
    number of records written; the count is patched into the fixed-width
    header field afterwards.
    """
    text = np.asarray(text_embeddings, dtype=np.float64)
    expected = (header.num_classes, header.prompts_per_class, header.dim)
    if text.shape != expected:
        raise FormatError(f"text embeddings {text.shape} != header {expected}")
    if header.class_names and len(header.class_names) != header.num_classes:
        raise FormatError("class_names length != num_classes")
    check_unit_norm(text, "text embeddings")
    blob = header.to_json_bytes()
    count = 0
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        count_pos = fh.tell()
        fh.write(struct.pack("<Q", 0))
        fh.write(text.astype("<f4").tobytes(order="C"))
        for sample_id, views, label in records:
            views = np.asarray(views, dtype=np.float64)
            if views.shape != (header.num_views + 1, header.dim):
                raise FormatError(
                    f"record {sample_id}: views {views.shape} != ({header.num_views + 1}, {header.dim})"
                )
            check_unit_norm(views, f"record {sample_id} views")
            if label is not None and not header.labels_present:
                raise FormatError("labeled record in an unlabeled dataset")
            fh.write(struct.pack("<q", int(sample_id)))
            fh.write(struct.pack("<i", -1 if label is None else int(label)))
            fh.write(views.astype("<f4").tobytes(order="C"))
            count += 1
        fh.seek(count_pos)
        fh.write(struct.pack("<Q", count))
    return count
