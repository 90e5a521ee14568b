"""Numeric primitives shared by every stage of the adaptation engine.

All functions operate on plain float64 numpy arrays. Embeddings are 1-D
unit-norm vectors; probability vectors sum to one. Natural logarithms
throughout, so entropies are in nats and the stability-consistency score
1 + log(R*S) is continuous at R*S = 1.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidTemperature,
    NonFiniteInput,
    SingleClass,
    ZeroVector,
)

ZERO_NORM_EPS = 1e-12


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Return v scaled to unit Euclidean norm.

    Raises ZeroVector if the norm is below 1e-12; direction is preserved.
    """
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm < ZERO_NORM_EPS:
        raise ZeroVector(f"norm {norm:.3e} below {ZERO_NORM_EPS}")
    return v / norm


def normalize_rows(mat: np.ndarray) -> np.ndarray:
    """Row-wise l2_normalize for stacked embeddings of any leading shape."""
    mat = np.asarray(mat, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=-1, keepdims=True)
    if np.any(norms < ZERO_NORM_EPS):
        raise ZeroVector("a row has near-zero norm")
    return mat / norms


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two vectors of equal dimension."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"{u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu < ZERO_NORM_EPS or nv < ZERO_NORM_EPS:
        raise ZeroVector("cosine of a zero vector is undefined")
    return float(np.dot(u, v) / (nu * nv))


def softmax_with_temperature(logits: np.ndarray, tau: float) -> np.ndarray:
    """softmax(logits / tau), stabilized by max subtraction.

    tau must be strictly positive; logits must be finite.
    """
    if tau <= 0:
        raise InvalidTemperature(f"tau={tau} must be > 0")
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NonFiniteInput("logits contain NaN/inf")
    scaled = logits / tau
    scaled = scaled - np.max(scaled)
    ex = np.exp(scaled)
    return ex / np.sum(ex)


def shannon_entropy(p: np.ndarray) -> float:
    """-sum(p * ln p) with the 0*ln(0) = 0 convention. Value in [0, ln C]."""
    p = np.asarray(p, dtype=np.float64)
    pos = p > 0.0
    return float(-np.sum(p[pos] * np.log(p[pos])))


def normalized_entropy(p: np.ndarray) -> float:
    """shannon_entropy(p) / ln(C), in [0, 1]. Requires C >= 2."""
    p = np.asarray(p, dtype=np.float64)
    c = p.shape[-1]
    if c < 2:
        raise SingleClass("normalized entropy undefined for C < 2")
    return shannon_entropy(p) / np.log(c)
