import numpy as np
import pytest
from PIL import Image

PALETTE = [
    (200, 40, 40), (40, 180, 60), (50, 70, 210), (220, 200, 40),
    (160, 40, 200), (40, 200, 200), (240, 130, 30), (90, 90, 90),
]


def synth_image(rng, class_id, size=96):
    """Class-distinct synthetic image: base color times striped texture."""
    coords = np.linspace(0.0, 1.0, size)
    xx, yy = np.meshgrid(coords, coords)
    freq = 2.0 + 3.0 * class_id
    phase = rng.uniform(0, 2 * np.pi)
    pattern = 0.5 + 0.5 * np.sin(2 * np.pi * freq * (xx + 0.3 * yy) + phase)
    base = np.array(PALETTE[class_id % len(PALETTE)], dtype=np.float64)
    img = base[None, None, :] * (0.55 + 0.45 * pattern[..., None])
    img += rng.normal(0, 12.0, size=img.shape)
    return Image.fromarray(np.clip(img, 0, 255).astype(np.uint8), mode="RGB")


def build_image_tree(root, n_classes, per_class, seed=0, size=96):
    rng = np.random.default_rng(seed)
    for class_id in range(n_classes):
        class_dir = root / f"class_{class_id}"
        class_dir.mkdir(parents=True)
        for i in range(per_class):
            synth_image(rng, class_id, size=size).save(class_dir / f"img_{i:03d}.png")
    return root


@pytest.fixture
def small_image_tree(tmp_path):
    return build_image_tree(tmp_path / "images", n_classes=3, per_class=4, seed=1)
