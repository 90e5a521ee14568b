"""Adjacent text-embedding construction and the text-subspace projector.

Per class, the K prompt embeddings are ranked by cumulative intra-class
cosine similarity (ascending: semantic outliers first) and folded into M
nested bins; bin m averages the first floor(m*K/M) ranked prompts. The
stacked adjacent embeddings of all classes define, via their top-n right
singular vectors, an orthogonal projector onto the text subspace used to
bridge the image/text modality gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import l2_normalize, normalize_rows
from .errors import DimensionMismatch, InvalidM, RankTooLarge, SvdFailure, TooFewPrompts


def rank_prompts_by_intra_class_similarity(prompts: np.ndarray) -> np.ndarray:
    """Order the K prompt embeddings of one class by ascending sim_i.

    prompts: (K, d), unit-norm rows. sim_i = sum_{j != i} cos(t_i, t_j).
    Ties break by ascending original index. Requires K >= 2.
    """
    prompts = np.asarray(prompts, dtype=np.float64)
    k = prompts.shape[0]
    if k < 2:
        raise TooFewPrompts(f"K={k} < 2")
    unit = normalize_rows(prompts)
    gram = unit @ unit.T
    sims = gram.sum(axis=1) - np.diag(gram)  # exclude self-similarity
    return np.argsort(sims, kind="stable")


def build_adjacent_embeddings(prompts: np.ndarray, m_bins: int) -> np.ndarray:
    """Progressive ascending binning of per-class prompts.

    prompts: (C, K, d). Returns (C, M, d) where row (c, m) is the normalized
    mean of the first Q_m = floor((m+1)*K/M) ranked prompts of class c, so
    bin pools are nested and the last bin averages all K prompts.
    """
    prompts = np.asarray(prompts, dtype=np.float64)
    if prompts.ndim != 3:
        raise DimensionMismatch(f"expected (C, K, d), got {prompts.shape}")
    n_classes, k, d = prompts.shape
    if m_bins < 1 or m_bins > k:
        raise InvalidM(f"M={m_bins} outside [1, K={k}]")
    pool_sizes = [(m * k) // m_bins for m in range(1, m_bins + 1)]
    out = np.empty((n_classes, m_bins, d), dtype=np.float64)
    for c in range(n_classes):
        order = rank_prompts_by_intra_class_similarity(prompts[c])
        ranked = prompts[c][order]
        for m, q in enumerate(pool_sizes):
            out[c, m] = l2_normalize(ranked[:q].mean(axis=0))
    return out


@dataclass(frozen=True)
class SubspaceProjector:
    """Orthogonal projector Phi = V~^T V~ onto the span of the top-n right
    singular vectors of the stacked adjacent embeddings."""

    phi: np.ndarray  # (d, d), symmetric, idempotent
    rank: int

    def project(self, z: np.ndarray) -> np.ndarray:
        """Phi @ z; intentionally not renormalized (used raw in voting)."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.phi.shape[0]:
            raise DimensionMismatch(f"d={z.shape[-1]} vs projector d={self.phi.shape[0]}")
        return z @ self.phi.T


def compute_text_subspace_projection(adjacent: np.ndarray, n: int) -> SubspaceProjector:
    """SVD the (C*M, d) stack of adjacent embeddings and keep rank n.

    Singular values are taken in descending order (LAPACK order; determinate
    index tie-break). Requires 1 <= n <= min(C*M, d).
    """
    adjacent = np.asarray(adjacent, dtype=np.float64)
    if adjacent.ndim == 3:
        stacked = adjacent.reshape(-1, adjacent.shape[-1])
    else:
        stacked = adjacent
    rows, d = stacked.shape
    if n < 1 or n > min(rows, d):
        raise RankTooLarge(f"n={n} outside [1, min(C*M={rows}, d={d})]")
    try:
        _, _, vt = np.linalg.svd(stacked, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(str(exc)) from exc
    v_top = vt[:n]  # (n, d), orthonormal rows
    phi = v_top.T @ v_top
    return SubspaceProjector(phi=phi, rank=n)
