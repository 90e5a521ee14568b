"""Committee voting over adjacent text embeddings and entropy reweighting.

The M adjacent embeddings of every class act as a semantic voting committee:
each member m classifies the projected image feature on its own, the vote
spread yields a stability factor S = M / n*, agreement with the original
(unprojected) prediction yields a consistency factor R in {1, gamma}, and
the combined score w = 1 + ln(R*S) multiplies the sample's entropy to set
its cache priority. w == 1 exactly when the committee is unanimous and
agrees with the original prediction; that identity is the reliability gate
used downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyCommittee, InvalidGamma


@dataclass(frozen=True)
class CommitteeVerdict:
    pseudo_labels: tuple[int, ...]  # one per committee member
    majority_label: int  # y*
    majority_count: int  # n*
    original_label: int  # y
    consistency: float  # R, 1 or gamma
    stability: float  # S = M / n*
    score: float  # w = 1 + ln(R*S)


def committee_pseudo_labels(z_proj: np.ndarray, adjacent: np.ndarray) -> np.ndarray:
    """argmax_c <z_proj, t_m^c> for each committee member m.

    adjacent: (C, M, d). Ties break to the lowest class id (argmax order).
    """
    z_proj = np.asarray(z_proj, dtype=np.float64)
    adjacent = np.asarray(adjacent, dtype=np.float64)
    if adjacent.shape[-1] != z_proj.shape[-1]:
        raise DimensionMismatch(f"d={z_proj.shape[-1]} vs adjacent d={adjacent.shape[-1]}")
    scores = np.einsum("cmd,d->mc", adjacent, z_proj)  # (M, C)
    return np.argmax(scores, axis=1)


def majority_vote(labels: np.ndarray, original: int) -> tuple[int, int]:
    """Most frequent committee label and its count.

    Frequency ties prefer the original prediction when it is among the tied
    labels, otherwise the lowest class id.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise EmptyCommittee("no committee labels")
    values, counts = np.unique(labels, return_counts=True)
    top = int(counts.max())
    tied = values[counts == top]
    winner = int(original) if int(original) in tied else int(tied.min())
    return winner, top


def stability_consistency_score(
    majority_label: int,
    majority_count: int,
    committee_size: int,
    original_label: int,
    gamma: float,
) -> tuple[float, float, float]:
    """(R, S, w) with R = 1 if y* == y else gamma, S = M/n*, w = 1 + ln(R*S)."""
    if gamma < 1.0:
        raise InvalidGamma(f"gamma={gamma} < 1")
    if committee_size < 1:
        raise EmptyCommittee("committee size must be >= 1")
    consistency = 1.0 if majority_label == original_label else float(gamma)
    stability = committee_size / majority_count
    score = 1.0 + np.log(consistency * stability)
    return consistency, stability, float(score)


def assess_sample(
    z_proj: np.ndarray,
    adjacent: np.ndarray,
    original_label: int,
    gamma: float,
) -> CommitteeVerdict:
    """Full committee pass: pseudo-labels, majority, and the score w."""
    labels = committee_pseudo_labels(z_proj, adjacent)
    winner, count = majority_vote(labels, original_label)
    consistency, stability, score = stability_consistency_score(
        winner, count, labels.size, original_label, gamma
    )
    return CommitteeVerdict(
        pseudo_labels=tuple(int(v) for v in labels),
        majority_label=winner,
        majority_count=count,
        original_label=int(original_label),
        consistency=consistency,
        stability=stability,
        score=score,
    )


def reweight_entropy(entropy: float, score: float) -> float:
    """H' = w * H. With w >= 1 this never promotes a sample's priority."""
    return score * entropy
