"""Export pipeline: images + prompt templates -> binary embedding dataset."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .augment import center_view, random_resized_crop_flip
from .encoders import load_encoder
from .writer import DatasetHeader, write_dataset

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}

DEFAULT_TEMPLATES = [
    "a photo of a {}.",
    "a blurry photo of a {}.",
    "a close-up photo of a {}.",
    "a bright photo of a {}.",
    "a dark photo of a {}.",
    "a photo of one {}.",
    "an image of a {}.",
    "a picture of a {}.",
]


class ImageDecodeError(RuntimeError):
    """A listed image could not be decoded (skip-and-log policy)."""


@dataclass
class ExportJob:
    image_root: Path  # directory of class subdirectories, or a flat directory
    output: Path
    n_views: int = 3
    encoder: str = "untrained"
    dim: int = 64  # untrained backend only; real encoders fix their own dim
    image_size: int = 64
    seed: int = 0
    templates: list[str] = field(default_factory=lambda: list(DEFAULT_TEMPLATES))


def discover_images(root: Path) -> tuple[list[tuple[Path, int | None]], list[str]]:
    """(image, label) pairs from a directory tree.

    Subdirectories are class names (sorted); a flat directory yields
    unlabeled images. Listing order is sorted for reproducibility.
    """
    root = Path(root)
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if class_dirs:
        names = [p.name for p in class_dirs]
        pairs = [
            (img, label)
            for label, class_dir in enumerate(class_dirs)
            for img in sorted(class_dir.iterdir())
            if img.suffix.lower() in IMAGE_SUFFIXES
        ]
        return pairs, names
    images = [p for p in sorted(root.iterdir()) if p.suffix.lower() in IMAGE_SUFFIXES]
    return [(img, None) for img in images], []


def export_embeddings(job: ExportJob) -> tuple[DatasetHeader, int]:
    """Encode prompts and images, write the dataset, return (header, count)."""
    backend = load_encoder(job.encoder, dim=job.dim, image_size=job.image_size)
    pairs, class_names = discover_images(Path(job.image_root))
    if not class_names:
        raise ValueError(f"no class subdirectories under {job.image_root}")
    if len(job.templates) < 1:
        raise ValueError("need at least one prompt template")

    prompt_texts = [[template.format(name) for template in job.templates] for name in class_names]
    flat_prompts = [text for row in prompt_texts for text in row]
    text = backend.encode_texts(flat_prompts).reshape(
        len(class_names), len(job.templates), backend.dim
    )

    rng = np.random.default_rng(job.seed)

    def records():
        sample_id = 0
        for path, label in pairs:
            try:
                with Image.open(path) as handle:
                    image = handle.convert("RGB")
            except (OSError, UnidentifiedImageError) as exc:
                logger.warning("skipping %s: %s", path, exc)
                continue
            views = [center_view(image, job.image_size)]
            for _ in range(job.n_views):
                views.append(random_resized_crop_flip(image, rng, out_size=job.image_size))
            yield sample_id, backend.encode_images(views), label
            sample_id += 1

    header = DatasetHeader(
        dim=backend.dim,
        num_classes=len(class_names),
        prompts_per_class=len(job.templates),
        num_views=job.n_views,
        labels_present=True,
        class_names=class_names,
        prompt_texts=prompt_texts,
    )
    count = write_dataset(header, text, records(), job.output)
    return header, count
