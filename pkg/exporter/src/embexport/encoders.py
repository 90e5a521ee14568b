"""Encoder backends mapping images and prompt strings into one vector space.

Two backends:

- "untrained": a deterministic random-feature encoder (seeded random
  projections over image patches, hashed character n-grams for text). It has
  no learned image/text alignment whatsoever; it exists so the export
  pipeline and the downstream engine can be exercised end to end on machines
  without model checkpoints. Anything accuracy-like measured with it is
  chance-level by construction.
- "clip": a real vision-language checkpoint via sentence-transformers, when
  the package and weights are available locally.
"""

from __future__ import annotations

import logging

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)


class EncoderLoadError(RuntimeError):
    """Requested encoder backend cannot be constructed in this environment."""


def _normalize_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=-1, keepdims=True)
    if np.any(norms < 1e-12):
        raise ValueError("encoder produced a zero embedding")
    return mat / norms


class UntrainedRandomEncoder:
    """Seeded random-feature encoder; untrained and unaligned by design."""

    def __init__(self, dim: int = 64, image_size: int = 64, weight_seed: int = 1234):
        self.dim = dim
        self.image_size = image_size
        rng = np.random.default_rng(weight_seed)
        patch = 8
        self._patch = patch
        n_feat = 3 * patch * patch
        hidden = 256
        self._w_img1 = rng.normal(0.0, 1.0 / np.sqrt(n_feat), size=(n_feat, hidden))
        self._w_img2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, dim))
        self._vocab = 4096
        self._w_txt = rng.normal(0.0, 1.0, size=(self._vocab, hidden))
        self._w_txt2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, dim))

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        out = np.empty((len(images), self.dim))
        for i, image in enumerate(images):
            arr = np.asarray(
                image.convert("RGB").resize((self.image_size, self.image_size), Image.BILINEAR),
                dtype=np.float64,
            ) / 255.0
            p = self._patch
            steps = self.image_size // p
            patches = (
                arr.reshape(steps, p, steps, p, 3)
                .transpose(0, 2, 1, 3, 4)
                .reshape(steps * steps, p * p * 3)
            )
            hidden = np.tanh(patches @ self._w_img1).mean(axis=0)
            out[i] = hidden @ self._w_img2
        return _normalize_rows(out)

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim))
        for i, text in enumerate(texts):
            cleaned = f"##{text.lower().strip()}##"
            counts = np.zeros(self._vocab)
            for n in (2, 3):
                for start in range(len(cleaned) - n + 1):
                    gram = cleaned[start : start + n]
                    counts[hash(gram) % self._vocab] += 1.0
            if counts.sum() == 0:
                counts[0] = 1.0
            counts = counts / np.linalg.norm(counts)
            out[i] = np.tanh(counts @ self._w_txt) @ self._w_txt2
        return _normalize_rows(out)


class ClipEncoder:
    """Real vision-language checkpoint through sentence-transformers."""

    def __init__(self, model_name: str = "clip-ViT-B-32"):
        try:
            from sentence_transformers import SentenceTransformer

            self._model = SentenceTransformer(model_name)
        except Exception as exc:  # missing package, missing weights, no network
            raise EncoderLoadError(f"cannot load '{model_name}': {exc}") from exc
        self.dim = int(self._model.get_sentence_embedding_dimension() or 512)

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        emb = np.asarray(self._model.encode(images, convert_to_numpy=True), dtype=np.float64)
        self.dim = emb.shape[1]
        return _normalize_rows(emb)

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        emb = np.asarray(self._model.encode(texts, convert_to_numpy=True), dtype=np.float64)
        return _normalize_rows(emb)


def load_encoder(name: str, dim: int = 64, image_size: int = 64, weight_seed: int = 1234):
    if name == "untrained":
        return UntrainedRandomEncoder(dim=dim, image_size=image_size, weight_seed=weight_seed)
    if name.startswith("clip"):
        model = "clip-ViT-B-32" if name == "clip" else name.split(":", 1)[1]
        return ClipEncoder(model)
    raise EncoderLoadError(f"unknown encoder backend '{name}'")
