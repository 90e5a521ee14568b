"""Residual evolution of the text state and its three-term training signal.

Each adjacent embedding owns a learnable residual (zero-initialized); the
effective embedding is normalize(base + residual). One decoupled-weight-decay
adaptive step per qualifying sample minimizes

    total = entropy_term + lambda1 * surrogate_term + lambda2 * alignment_term

where the entropy term sharpens the view-averaged classifier distribution,
the surrogate term is a covariance-aware cross entropy over the class
distributions spanned by the adjacent embeddings, and the alignment term
pulls final text embeddings toward their cached visual prototypes. Gradients
are exact and hand-derived (no autodiff), propagated through the
normalization Jacobian (I - t t^T)/||v||. The optimized embeddings then fold
into the global state by a counter-weighted running average.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ZERO_NORM_EPS, normalize_rows, shannon_entropy, softmax_with_temperature
from .errors import DimensionMismatch, NonFinite, NonFiniteGradient, ZeroVector


@dataclass(frozen=True)
class LossWeights:
    tau: float = 0.01
    view_entropy_threshold: float = 0.1  # delta, normalized
    lambda1: float = 0.3
    lambda2: float = 0.02


@dataclass(frozen=True)
class LossBreakdown:
    entropy_term: float
    surrogate_term: float
    alignment_term: float
    lambda1: float
    lambda2: float
    total: float

    @staticmethod
    def combine(ent: float, surr: float, align: float, lambda1: float, lambda2: float) -> "LossBreakdown":
        total = ent + lambda1 * surr + lambda2 * align
        if not np.isfinite(total):
            raise NonFinite(f"loss total is {total}")
        return LossBreakdown(ent, surr, align, lambda1, lambda2, total)


def apply_residuals(base: np.ndarray, residuals: np.ndarray) -> np.ndarray:
    """normalize(base + residual) per embedding; ZeroVector on cancellation."""
    base = np.asarray(base, dtype=np.float64)
    residuals = np.asarray(residuals, dtype=np.float64)
    if base.shape != residuals.shape:
        raise DimensionMismatch(f"{base.shape} vs {residuals.shape}")
    if not residuals.any():  # zero residuals leave the state bit-identical
        return base.copy()
    return normalize_rows(base + residuals)


def classifier_probabilities(
    views: np.ndarray,
    final_embeddings: np.ndarray,
    cache_logit_rows: np.ndarray,
    tau: float,
) -> np.ndarray:
    """Per-view class probabilities from text similarity plus cache affinity.

    views: (V, d); final_embeddings: (C, d); cache_logit_rows: (V, C).
    Row i is softmax((views[i] @ final^T + cache_logit_rows[i]) / tau).
    """
    logits = views @ final_embeddings.T + cache_logit_rows
    return np.stack([softmax_with_temperature(row, tau) for row in logits])


def confident_view_mask(view_probs: np.ndarray, delta: float) -> np.ndarray:
    """Views whose normalized entropy is below delta; falls back to the
    single minimum-entropy view when none qualifies."""
    c = view_probs.shape[1]
    if c < 2:  # degenerate single-class stream: every view is fully confident
        return np.ones(view_probs.shape[0], dtype=bool)
    ents = np.array([shannon_entropy(p) for p in view_probs]) / np.log(c)
    mask = ents < delta
    if not mask.any():
        mask = np.zeros_like(mask)
        mask[int(np.argmin(ents))] = True
    return mask


def view_averaged_probability(view_probs: np.ndarray, delta: float) -> np.ndarray:
    """Mean class distribution over the confident views."""
    mask = confident_view_mask(view_probs, delta)
    return view_probs[mask].mean(axis=0)


def entropy_loss(p_tilde: np.ndarray) -> float:
    """Shannon entropy of the view-averaged distribution."""
    return shannon_entropy(p_tilde)


def surrogate_loss(z: np.ndarray, label: int, evolved: np.ndarray, tau: float) -> float:
    """Covariance-aware cross entropy in its low-rank O(C*M*d) form.

    The denominator of the softmax over classes c carries the quadratic
    penalty z^T W_{c,label} z / (2 tau^2) where W combines the class-pair
    covariances of the adjacent embeddings; in low-rank form that penalty is
    mean_m (z . (e_m^c - e_m^label))^2 / (2 tau^2) with e_m^c the centered
    member embeddings. The label's own penalty vanishes identically.
    """
    z = np.asarray(z, dtype=np.float64)
    evolved = np.asarray(evolved, dtype=np.float64)
    n_members = evolved.shape[1]
    zt = np.einsum("cmd,d->cm", evolved, z)  # z . t[c, m]
    centered = zt - zt.mean(axis=1, keepdims=True)
    gap = centered - centered[label][None, :]
    quad = (gap**2).sum(axis=1) / (2.0 * tau * tau * n_members)
    scores = zt[:, -1] / tau + quad
    shift = scores.max()
    lse = shift + np.log(np.sum(np.exp(scores - shift)))
    value = float(-zt[label, -1] / tau + lse)
    if not np.isfinite(value):
        raise NonFinite("surrogate loss overflowed; check tau")
    return value


def alignment_loss(
    final_embeddings: np.ndarray,
    proto_labels: np.ndarray,
    prototypes: np.ndarray,
) -> float:
    """Symmetric two-way softmax cross entropy between final text embeddings
    and cached visual prototypes, averaged over classes that have one.

    Classes without a prototype are excluded from the average and from both
    softmax denominators. Returns 0 when no prototype exists (term inactive).
    """
    if proto_labels.size == 0:
        return 0.0
    t_act = final_embeddings[proto_labels]  # (P, d)
    sim = t_act @ prototypes.T  # sim[i, j] = t_i . F_j
    diag = np.diag(sim)
    shift_r = sim.max(axis=1)
    lse_rows = shift_r + np.log(np.exp(sim - shift_r[:, None]).sum(axis=1))
    shift_c = sim.max(axis=0)
    lse_cols = shift_c + np.log(np.exp(sim - shift_c[None, :]).sum(axis=0))
    per_class = (lse_rows - diag) + (lse_cols - diag)
    return float(per_class.mean())


@dataclass(frozen=True)
class GradientParts:
    """Per-term and total gradients w.r.t. the residuals, shape (C, M, d)."""

    entropy_term: np.ndarray
    surrogate_term: np.ndarray
    alignment_term: np.ndarray
    total: np.ndarray


def total_loss_and_gradient(
    base: np.ndarray,
    residuals: np.ndarray,
    views: np.ndarray,
    cache_logit_rows: np.ndarray,
    label: int,
    proto_labels: np.ndarray,
    prototypes: np.ndarray,
    weights: LossWeights,
) -> tuple[LossBreakdown, GradientParts]:
    """Total loss and its exact gradient w.r.t. every residual.

    base/residuals: (C, M, d); views: (V, d) with view 0 the original;
    cache_logit_rows: (V, C) cache affinities, constants w.r.t. residuals.
    The surrogate term is evaluated at the original view with the gated
    pseudo-label; the entropy term filters and averages all views; the
    alignment term touches only the final member m = M.
    """
    base = np.asarray(base, dtype=np.float64)
    residuals = np.asarray(residuals, dtype=np.float64)
    views = np.asarray(views, dtype=np.float64)
    n_classes, n_members, _ = base.shape
    tau = weights.tau

    pre_norm = base + residuals
    norms = np.linalg.norm(pre_norm, axis=-1)
    if np.any(norms < ZERO_NORM_EPS):
        raise ZeroVector("residual cancelled an adjacent embedding")
    evolved = pre_norm / norms[..., None]
    final = evolved[:, -1, :]  # (C, d)

    g_ent = np.zeros_like(evolved)
    g_surr = np.zeros_like(evolved)
    g_align = np.zeros_like(evolved)

    # ---- entropy term over filtered views
    view_probs = classifier_probabilities(views, final, cache_logit_rows, tau)
    mask = confident_view_mask(view_probs, weights.view_entropy_threshold)
    sel = np.flatnonzero(mask)
    p_tilde = view_probs[sel].mean(axis=0)
    l_ent = shannon_entropy(p_tilde)

    upstream = np.zeros(n_classes)
    pos = p_tilde > 0.0
    upstream[pos] = -(np.log(p_tilde[pos]) + 1.0) / sel.size  # dL/dp_i, selected views
    probs_sel = view_probs[sel]  # (S, C)
    inner = probs_sel @ upstream  # (S,)
    d_scaled = probs_sel * (upstream[None, :] - inner[:, None])  # softmax backward
    g_ent[:, -1, :] = (d_scaled / tau).T @ views[sel]

    # ---- surrogate term at the original view
    z = views[0]
    zt = np.einsum("cmd,d->cm", evolved, z)
    centered = zt - zt.mean(axis=1, keepdims=True)
    gap = centered - centered[label][None, :]
    quad = (gap**2).sum(axis=1) / (2.0 * tau * tau * n_members)
    scores = zt[:, -1] / tau + quad
    shift = scores.max()
    exp_scores = np.exp(scores - shift)
    pi = exp_scores / exp_scores.sum()
    l_surr = float(-zt[label, -1] / tau + shift + np.log(exp_scores.sum()))
    if not np.isfinite(l_surr):
        raise NonFinite("surrogate loss overflowed; check tau")

    grad_zt = np.zeros((n_classes, n_members))
    grad_zt[:, -1] += pi / tau
    grad_zt[label, -1] -= 1.0 / tau
    d_gap = pi[:, None] * gap / (tau * tau * n_members)  # dL/dgap
    d_centered = d_gap.copy()
    d_centered[label] -= d_gap.sum(axis=0)
    grad_zt += d_centered - d_centered.mean(axis=1, keepdims=True)
    g_surr[:] = grad_zt[..., None] * z[None, None, :]

    # ---- alignment term on final embeddings vs cache prototypes
    if proto_labels.size > 0:
        t_act = final[proto_labels]
        sim = t_act @ prototypes.T
        diag = np.diag(sim)
        row_max = sim.max(axis=1)
        row_exp = np.exp(sim - row_max[:, None])
        row_soft = row_exp / row_exp.sum(axis=1, keepdims=True)
        l_row = row_max + np.log(row_exp.sum(axis=1)) - diag
        col_max = sim.max(axis=0)
        col_exp = np.exp(sim - col_max[None, :])
        col_soft = col_exp / col_exp.sum(axis=0, keepdims=True)
        l_col = col_max + np.log(col_exp.sum(axis=0)) - diag
        l_align = float((l_row + l_col).mean())
        eye = np.eye(proto_labels.size)
        d_sim = (row_soft - eye + col_soft - eye) / proto_labels.size
        g_align[proto_labels, -1, :] = d_sim @ prototypes
    else:
        l_align = 0.0

    breakdown = LossBreakdown.combine(l_ent, l_surr, l_align, weights.lambda1, weights.lambda2)

    # chain each term through the normalization t = v / ||v||; the Jacobian
    # is linear, so per-term chaining sums to the chained total
    def through_norm(g: np.ndarray) -> np.ndarray:
        radial = np.sum(g * evolved, axis=-1, keepdims=True)
        return (g - radial * evolved) / norms[..., None]

    ge = through_norm(g_ent)
    gs = through_norm(g_surr)
    ga = through_norm(g_align)
    total = ge + weights.lambda1 * gs + weights.lambda2 * ga
    if not np.all(np.isfinite(total)):
        raise NonFiniteGradient("gradient contains NaN/inf")
    return breakdown, GradientParts(ge, gs, ga, total)


# ---------------------------------------------------------------------------
# Single-step decoupled-weight-decay optimizer


@dataclass
class ResidualState:
    """Residuals plus adaptive-moment buffers, zeroed at construction."""

    residuals: np.ndarray
    exp_avg: np.ndarray
    exp_avg_sq: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, shape: tuple[int, ...]) -> "ResidualState":
        return cls(
            residuals=np.zeros(shape, dtype=np.float64),
            exp_avg=np.zeros(shape, dtype=np.float64),
            exp_avg_sq=np.zeros(shape, dtype=np.float64),
        )


def optimizer_step(
    state: ResidualState,
    grad: np.ndarray,
    lr: float = 5e-4,
    weight_decay: float = 0.1,
    eps: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
) -> ResidualState:
    """One bias-corrected adaptive-moment step with decoupled weight decay.

    r <- r - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * r)
    """
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradient("optimizer received a non-finite gradient")
    state.step += 1
    state.exp_avg = beta1 * state.exp_avg + (1.0 - beta1) * grad
    state.exp_avg_sq = beta2 * state.exp_avg_sq + (1.0 - beta2) * grad * grad
    m_hat = state.exp_avg / (1.0 - beta1**state.step)
    v_hat = state.exp_avg_sq / (1.0 - beta2**state.step)
    state.residuals = state.residuals - lr * (
        m_hat / (np.sqrt(v_hat) + eps) + weight_decay * state.residuals
    )
    return state


# ---------------------------------------------------------------------------
# Global progressive merge and inference heads


def progressive_merge(current: np.ndarray, optimized: np.ndarray, counter: int) -> np.ndarray:
    """normalize((l-1) * current + optimized) for every embedding.

    counter is the confident-sample counter l >= 1; at l = 1 the previous
    state has weight zero. Raises ZeroVector on pathological cancellation
    (callers must then keep the previous state and not advance l).
    """
    mixed = (counter - 1) * np.asarray(current, dtype=np.float64) + np.asarray(
        optimized, dtype=np.float64
    )
    return normalize_rows(mixed)


def gaussian_inference(z: np.ndarray, evolved: np.ndarray, tau: float) -> np.ndarray:
    """softmax(<z, mu_c> / tau) with mu_c the raw (unnormalized) member mean."""
    mu = np.asarray(evolved, dtype=np.float64).mean(axis=1)  # (C, d)
    return softmax_with_temperature(mu @ np.asarray(z, dtype=np.float64), tau)


def fuse_predictions(
    p_cls: np.ndarray, p_gauss: np.ndarray, eta: float
) -> tuple[int, np.ndarray]:
    """p_final = p_cls + eta * p_gauss (unnormalized score vector).

    Returns (argmax prediction, score vector). Renormalize by (1 + eta)
    before using the scores as confidences.
    """
    p_cls = np.asarray(p_cls, dtype=np.float64)
    p_gauss = np.asarray(p_gauss, dtype=np.float64)
    if p_cls.shape != p_gauss.shape:
        raise DimensionMismatch(f"{p_cls.shape} vs {p_gauss.shape}")
    p_final = p_cls + eta * p_gauss
    return int(np.argmax(p_final)), p_final
