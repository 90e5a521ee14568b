"""Binary embedding-stream dataset format (see FORMAT.md for the byte spec).

Layout, all integers little-endian:

    magic b"EMBS" | u16 version | u32 header_len | header JSON (canonical)
    | u64 record_count | C*K*d float32 text embeddings (row-major)
    | record_count x ( s64 id | s32 label (-1 = unlabeled) | (N+1)*d float32 )

Vectors are stored as float32; the engine computes in float64. On read,
vectors are renormalized to unit norm (with a warning past 1e-3 deviation)
unless `renormalize=False`, which preserves the stored bits exactly and is
what makes write -> read -> write byte-identical.
"""

from __future__ import annotations

import io
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import normalize_rows
from .errors import (
    BadMagic,
    HeaderPayloadMismatch,
    IoError,
    TruncatedPayload,
    UnsupportedVersion,
)
from .pipeline import SampleRecord

logger = logging.getLogger(__name__)

MAGIC = b"EMBS"
VERSION = 1
_NORM_WARN = 1e-3


@dataclass
class DatasetHeader:
    dim: int
    num_classes: int
    prompts_per_class: int
    num_views: int  # N augmented views; records carry N+1 vectors
    labels_present: bool
    class_names: list[str] = field(default_factory=list)
    prompt_texts: list[list[str]] | None = None

    def validate(self) -> "DatasetHeader":
        if self.dim < 1 or self.num_classes < 1 or self.prompts_per_class < 1:
            raise HeaderPayloadMismatch("dim, num_classes, prompts_per_class must be >= 1")
        if self.num_views < 0:
            raise HeaderPayloadMismatch("num_views must be >= 0")
        if self.class_names and len(self.class_names) != self.num_classes:
            raise HeaderPayloadMismatch(
                f"{len(self.class_names)} class names for {self.num_classes} classes"
            )
        if self.prompt_texts is not None:
            if len(self.prompt_texts) != self.num_classes or any(
                len(row) != self.prompts_per_class for row in self.prompt_texts
            ):
                raise HeaderPayloadMismatch("prompt_texts shape must be C x K")
        return self

    def record_nbytes(self) -> int:
        return 8 + 4 + (self.num_views + 1) * self.dim * 4

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

    @classmethod
    def from_json_bytes(cls, blob: bytes) -> "DatasetHeader":
        try:
            raw = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise HeaderPayloadMismatch(f"header JSON unparseable: {exc}") from exc
        try:
            return cls(
                dim=int(raw["dim"]),
                num_classes=int(raw["num_classes"]),
                prompts_per_class=int(raw["prompts_per_class"]),
                num_views=int(raw["num_views"]),
                labels_present=bool(raw["labels_present"]),
                class_names=list(raw.get("class_names") or []),
                prompt_texts=raw.get("prompt_texts"),
            ).validate()
        except KeyError as exc:
            raise HeaderPayloadMismatch(f"header missing field {exc}") from exc


def write_dataset(
    header: DatasetHeader,
    text_embeddings: np.ndarray,
    records,
    path: str | Path,
) -> int:
    """Write the dataset; returns the number of records written.

    `records` may be any iterable of SampleRecord; it is consumed once and
    the record count is patched into the header area afterwards.
    """
    header.validate()
    text = np.asarray(text_embeddings, dtype=np.float64)
    expected = (header.num_classes, header.prompts_per_class, header.dim)
    if text.shape != expected:
        raise HeaderPayloadMismatch(f"text embeddings {text.shape} != header {expected}")
    blob = header.to_json_bytes()
    count = 0
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<H", VERSION))
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            count_pos = fh.tell()
            fh.write(struct.pack("<Q", 0))  # patched after streaming the records
            fh.write(text.astype("<f4").tobytes(order="C"))
            for record in records:
                views = np.asarray(record.views, dtype=np.float64)
                if views.shape != (header.num_views + 1, header.dim):
                    raise HeaderPayloadMismatch(
                        f"record {record.sample_id}: views {views.shape} != "
                        f"({header.num_views + 1}, {header.dim})"
                    )
                label = record.true_label
                if label is None:
                    label = -1
                elif not header.labels_present:
                    raise HeaderPayloadMismatch(
                        "labeled record in a dataset declared labels_present=false"
                    )
                fh.write(struct.pack("<q", record.sample_id))
                fh.write(struct.pack("<i", label))
                fh.write(views.astype("<f4").tobytes(order="C"))
                count += 1
            fh.seek(count_pos)
            fh.write(struct.pack("<Q", count))
    except OSError as exc:
        raise IoError(f"writing {path}: {exc}") from exc
    return count


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedPayload(fh.tell() - len(data), f"while reading {what}")
    return data


def _renorm(block: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(block, axis=-1)
    worst = float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0
    if worst > _NORM_WARN:
        logger.warning("%s deviate from unit norm by up to %.2e; renormalizing", what, worst)
    return normalize_rows(block)


def read_dataset(path: str | Path, renormalize: bool = True):
    """Return (header, text_embeddings (C, K, d) float64, record iterator).

    The iterator streams records in on-disk order without materializing the
    file. With renormalize=False the stored float32 values are returned
    bit-exactly (as float64), enabling byte-identical re-serialization.
    """
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise IoError(f"opening {path}: {exc}") from exc
    try:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise BadMagic(f"expected {MAGIC!r}, found {magic!r}")
        (version,) = struct.unpack("<H", _read_exact(fh, 2, "version"))
        if version != VERSION:
            raise UnsupportedVersion(f"version {version}, reader supports {VERSION}")
        (header_len,) = struct.unpack("<I", _read_exact(fh, 4, "header length"))
        header = DatasetHeader.from_json_bytes(_read_exact(fh, header_len, "header"))
        (count,) = struct.unpack("<Q", _read_exact(fh, 8, "record count"))
        text_bytes = header.num_classes * header.prompts_per_class * header.dim * 4
        text = np.frombuffer(_read_exact(fh, text_bytes, "text embeddings"), dtype="<f4")
        text = text.astype(np.float64).reshape(
            header.num_classes, header.prompts_per_class, header.dim
        )
        if renormalize:
            text = _renorm(text, "text embeddings")

        data_start = fh.tell()
        fh.seek(0, io.SEEK_END)
        actual_tail = fh.tell() - data_start
        expected_tail = count * header.record_nbytes()
        if actual_tail > expected_tail:
            raise HeaderPayloadMismatch(
                f"{actual_tail - expected_tail} trailing bytes beyond {count} records"
            )
        fh.seek(data_start)
    except Exception:
        fh.close()
        raise

    view_floats = (header.num_views + 1) * header.dim

    def records():
        warned = False
        with fh:
            for _ in range(count):
                (sample_id,) = struct.unpack("<q", _read_exact(fh, 8, "record id"))
                (label,) = struct.unpack("<i", _read_exact(fh, 4, "record label"))
                views = np.frombuffer(
                    _read_exact(fh, view_floats * 4, f"record {sample_id} views"), dtype="<f4"
                ).astype(np.float64).reshape(header.num_views + 1, header.dim)
                if renormalize:
                    norms = np.linalg.norm(views, axis=-1)
                    worst = float(np.max(np.abs(norms - 1.0)))
                    if worst > _NORM_WARN and not warned:
                        logger.warning(
                            "record views deviate from unit norm by up to %.2e; renormalizing",
                            worst,
                        )
                        warned = True
                    views = normalize_rows(views)
                yield SampleRecord(
                    sample_id=sample_id,
                    views=views,
                    true_label=None if label < 0 else int(label),
                )

    return header, text, records()
