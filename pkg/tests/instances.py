"""Shared random-instance generator for loss/gradient tests.

Instances use clustered geometry (all embeddings near one shared direction)
so that, at the working temperature 0.01, class probabilities are spread
rather than numerically one-hot; that keeps every loss term and its
finite-difference check well conditioned.
"""

import numpy as np

from ttastream.calibration import (
    LossWeights,
    apply_residuals,
    alignment_loss,
    classifier_probabilities,
    entropy_loss,
    surrogate_loss,
    view_averaged_probability,
)
from ttastream.core import normalize_rows


def make_instance(rng, n_classes=3, n_members=3, dim=8, n_views=5, spread=0.25):
    shared = normalize_rows(rng.normal(size=(1, dim)))[0]
    base = normalize_rows(shared[None, None, :] + spread * rng.normal(size=(n_classes, n_members, dim)))
    residuals = 0.05 * rng.normal(size=(n_classes, n_members, dim))
    views = normalize_rows(shared[None, :] + spread * rng.normal(size=(n_views, dim)))
    cache_rows = rng.uniform(0.0, 0.5, size=(n_views, n_classes))
    label = int(rng.integers(n_classes))
    if rng.random() < 0.75:
        count = int(rng.integers(1, n_classes + 1))
        proto_labels = np.sort(rng.choice(n_classes, size=count, replace=False))
        prototypes = normalize_rows(shared[None, :] + spread * rng.normal(size=(count, dim)))
    else:
        proto_labels = np.empty(0, dtype=np.int64)
        prototypes = np.empty((0, dim))
    weights = LossWeights(
        tau=0.01,
        view_entropy_threshold=float(rng.choice([0.2, 0.5, 0.9])),
        lambda1=0.3,
        lambda2=0.02,
    )
    return base, residuals, views, cache_rows, label, proto_labels, prototypes, weights


def term_functions(base, views, cache_rows, label, proto_labels, prototypes, weights):
    """Standalone forward evaluators of each term as functions of the residuals."""

    def f_ent(r):
        evolved = apply_residuals(base, r)
        probs = classifier_probabilities(views, evolved[:, -1, :], cache_rows, weights.tau)
        return entropy_loss(view_averaged_probability(probs, weights.view_entropy_threshold))

    def f_surr(r):
        return surrogate_loss(views[0], label, apply_residuals(base, r), weights.tau)

    def f_align(r):
        return alignment_loss(apply_residuals(base, r)[:, -1, :], proto_labels, prototypes)

    def f_total(r):
        return f_ent(r) + weights.lambda1 * f_surr(r) + weights.lambda2 * f_align(r)

    return f_ent, f_surr, f_align, f_total


def relative_error(a, b):
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / denom)
