"""Image augmentation: random resized crop plus random horizontal flip.

Pure PIL, driven by an explicit numpy Generator so a fixed seed reproduces
the exact augmented views (and therefore the exact output file).
"""

from __future__ import annotations

import numpy as np
from PIL import Image


def random_resized_crop_flip(
    image: Image.Image,
    rng: np.random.Generator,
    out_size: int = 64,
    scale_range: tuple[float, float] = (0.5, 1.0),
) -> Image.Image:
    width, height = image.size
    area = width * height
    target = area * rng.uniform(*scale_range)
    aspect = np.exp(rng.uniform(np.log(3 / 4), np.log(4 / 3)))
    crop_w = int(round(np.sqrt(target * aspect)))
    crop_h = int(round(np.sqrt(target / aspect)))
    crop_w = min(max(crop_w, 1), width)
    crop_h = min(max(crop_h, 1), height)
    left = int(rng.integers(0, width - crop_w + 1))
    top = int(rng.integers(0, height - crop_h + 1))
    out = image.crop((left, top, left + crop_w, top + crop_h)).resize(
        (out_size, out_size), Image.BILINEAR
    )
    if rng.random() < 0.5:
        out = out.transpose(Image.FLIP_LEFT_RIGHT)
    return out


def center_view(image: Image.Image, out_size: int = 64) -> Image.Image:
    """The original (unaugmented) view: aspect-preserving center crop + resize."""
    width, height = image.size
    side = min(width, height)
    left = (width - side) // 2
    top = (height - side) // 2
    return image.crop((left, top, left + side, top + side)).resize(
        (out_size, out_size), Image.BILINEAR
    )
