"""Per-sample orchestration of the full adaptation loop and run-level metrics.

For every arriving record the engine, in order: scores the original view
with the committee, reweights its entropy, updates the per-class cache,
(when the reliability gate passes) takes one optimizer step on the residuals
and merges the result into the global text state, and finally fuses the
cache-aware classifier with the evolved-mean head into the prediction.
Processing is strictly sequential and single-pass; identical inputs give
bit-identical outputs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .cache import CacheEntry, InsertionOutcome, ReliabilityCache, cache_logits
from .calibration import (
    LossBreakdown,
    LossWeights,
    ResidualState,
    apply_residuals,
    fuse_predictions,
    gaussian_inference,
    optimizer_step,
    progressive_merge,
    total_loss_and_gradient,
)
from .config import RunConfig
from .consistency import assess_sample, reweight_entropy
from .core import shannon_entropy, softmax_with_temperature
from .errors import DatasetError, NoLabels, ZeroVector
from .textspace import SubspaceProjector, build_adjacent_embeddings, compute_text_subspace_projection

logger = logging.getLogger(__name__)


@dataclass
class SampleRecord:
    """One test instance: original view (index 0) plus N augmented views."""

    sample_id: int
    views: np.ndarray  # (N + 1, d), unit-norm rows
    true_label: int | None = None


@dataclass
class AdaptationState:
    """Mutable engine state threaded through the stream (single owner)."""

    base: np.ndarray  # current global adjacent embeddings (C, M, d)
    counter: int  # confident-sample counter l >= 1
    residual_state: ResidualState
    cache: ReliabilityCache
    projector: SubspaceProjector
    arrival: int = 0

    @property
    def num_classes(self) -> int:
        return self.base.shape[0]


@dataclass
class SampleResult:
    """Everything the prediction log records for one sample."""

    sample_id: int
    true_label: int | None
    original: int  # y
    committee: tuple[int, ...] | None
    majority: int | None  # y*
    score: float  # w
    entropy: float  # H
    reweighted: float  # H'
    cache_event: str
    evicted_arrival: int | None
    merge_accepted: bool
    losses: LossBreakdown | None
    grad_norm: float | None
    prediction: int
    p_final: np.ndarray
    confidence: float  # max of p_final / (1 + eta)
    correct: bool | None
    cache_purity: float | None


@dataclass
class RunMetrics:
    n_records: int
    n_labeled: int
    top1_accuracy: float | None
    ece: float | None
    cache_purity_trace: list[tuple[int, float]] = field(default_factory=list)
    final_cache_purity: float | None = None
    mean_score: float = 0.0
    merge_rate: float = 0.0
    final_cache: dict = field(default_factory=dict)


def initialize_state(prompts: np.ndarray, config: RunConfig) -> AdaptationState:
    """Build the text state and projector from the (C, K, d) prompt stack."""
    prompts = np.asarray(prompts, dtype=np.float64)
    n_classes, _, dim = prompts.shape
    if n_classes < 2:
        raise DatasetError(f"need at least 2 classes, got {n_classes}")
    adjacent = build_adjacent_embeddings(prompts, config.adjacent_count)
    max_rank = min(n_classes * config.adjacent_count, dim)
    rank = min(config.svd_rank, max_rank)
    if rank != config.svd_rank:
        logger.warning("svd_rank %d clamped to %d (stack is %dx%d)",
                       config.svd_rank, rank, n_classes * config.adjacent_count, dim)
    projector = compute_text_subspace_projection(adjacent, rank)
    return AdaptationState(
        base=adjacent,
        counter=1,
        residual_state=ResidualState.zeros(adjacent.shape),
        cache=ReliabilityCache(n_classes, config.cache_size),
        projector=projector,
    )


def adapt_sample(record: SampleRecord, state: AdaptationState, config: RunConfig) -> SampleResult:
    """Process one record through the full loop; mutates `state`."""
    views = np.asarray(record.views, dtype=np.float64)
    if views.ndim != 2 or views.shape[1] != state.base.shape[2]:
        raise DatasetError(
            f"record {record.sample_id}: views shape {views.shape} does not match d={state.base.shape[2]}"
        )
    z = views[0]
    n_classes = state.num_classes
    weights = LossWeights(config.tau, config.delta, config.lambda1, config.lambda2)

    effective = apply_residuals(state.base, state.residual_state.residuals)
    final = effective[:, -1, :]
    text_logits = final @ z
    original = int(np.argmax(text_logits))

    committee: tuple[int, ...] | None = None
    majority: int | None = None
    score = 1.0
    if config.cer_enabled:
        verdict = assess_sample(state.projector.project(z), effective, original, config.gamma)
        committee = verdict.pseudo_labels
        majority = verdict.majority_label
        score = verdict.score

    p_text = softmax_with_temperature(text_logits, config.tau)
    entropy = shannon_entropy(p_text)
    norm_entropy = entropy / math.log(n_classes)
    reweighted = reweight_entropy(entropy, score)

    cache_event = "off"
    evicted_arrival: int | None = None
    if config.cache_enabled:
        outcome, victim = state.cache.insert_or_evict(
            CacheEntry(
                feature=z,
                pseudo_label=original,
                reweighted_entropy=reweighted,
                arrival_index=state.arrival,
                true_label=record.true_label,
            )
        )
        cache_event = outcome.value
        if outcome is InsertionOutcome.REPLACED and victim is not None:
            evicted_arrival = victim.arrival_index
    state.arrival += 1

    merge_accepted = False
    losses: LossBreakdown | None = None
    grad_norm: float | None = None
    if config.ddc_enabled and score == 1.0 and norm_entropy < config.tau_merge:
        if config.cache_enabled:
            proto_labels, prototypes = state.cache.class_prototypes()
        else:
            proto_labels = np.empty(0, dtype=np.int64)
            prototypes = np.empty((0, views.shape[1]))
        rows = np.stack(
            [
                cache_logits(v, proto_labels, prototypes, n_classes, config.alpha, config.beta)
                for v in views
            ]
        )
        try:
            losses, parts = total_loss_and_gradient(
                state.base,
                state.residual_state.residuals,
                views,
                rows,
                original,
                proto_labels,
                prototypes,
                weights,
            )
            grad_norm = float(np.linalg.norm(parts.total))
            optimizer_step(
                state.residual_state,
                parts.total,
                lr=config.lr,
                weight_decay=config.weight_decay,
                eps=config.opt_eps,
                beta1=config.beta1,
                beta2=config.beta2,
            )
            optimized = apply_residuals(state.base, state.residual_state.residuals)
            state.base = progressive_merge(state.base, optimized, state.counter)
            state.counter += 1
            merge_accepted = True
        except ZeroVector as exc:
            logger.warning("sample %d: merge rejected (%s); prediction-only", record.sample_id, exc)
        finally:
            # the merged state absorbs the residual; next sample starts at zero
            state.residual_state = ResidualState.zeros(state.base.shape)

    final = state.base[:, -1, :]
    logits = final @ z
    if config.cache_enabled:
        proto_labels, prototypes = state.cache.class_prototypes()
        logits = logits + cache_logits(
            z, proto_labels, prototypes, n_classes, config.alpha, config.beta
        )
    p_cls = softmax_with_temperature(logits, config.tau)
    p_gauss = gaussian_inference(z, state.base, config.tau)
    prediction, p_final = fuse_predictions(p_cls, p_gauss, config.eta)
    confidence = float(np.max(p_final) / (1.0 + config.eta))
    correct = None if record.true_label is None else prediction == record.true_label
    purity = state.cache.purity() if config.cache_enabled else None

    return SampleResult(
        sample_id=record.sample_id,
        true_label=record.true_label,
        original=original,
        committee=committee,
        majority=majority,
        score=score,
        entropy=entropy,
        reweighted=reweighted,
        cache_event=cache_event,
        evicted_arrival=evicted_arrival,
        merge_accepted=merge_accepted,
        losses=losses,
        grad_norm=grad_norm,
        prediction=prediction,
        p_final=p_final,
        confidence=confidence,
        correct=correct,
        cache_purity=purity,
    )


def expected_calibration_error(confidences, correct, bins: int = 20) -> float:
    """Equal-width-binned ECE = sum_b (n_b / n) * |acc_b - conf_b|.

    Bin b covers [b/bins, (b+1)/bins), the last bin closed at 1.0.
    """
    conf = np.asarray(confidences, dtype=np.float64)
    corr = np.asarray(correct, dtype=np.float64)
    if conf.size == 0:
        raise NoLabels("ECE needs at least one labeled prediction")
    idx = np.minimum((conf * bins).astype(np.int64), bins - 1)
    total = 0.0
    for b in range(bins):
        members = idx == b
        count = int(members.sum())
        if count:
            total += (count / conf.size) * abs(corr[members].mean() - conf[members].mean())
    return float(total)


def run_stream(records, prompts: np.ndarray, config: RunConfig, on_result=None) -> RunMetrics:
    """Single pass over `records` (any iterable of SampleRecord), in order.

    `on_result` is called with each SampleResult as soon as it is complete,
    before the next record is pulled from the iterator.
    """
    config.validate()
    state = initialize_state(prompts, config)
    n_records = 0
    n_labeled = 0
    n_correct = 0
    score_sum = 0.0
    merges = 0
    confidences: list[float] = []
    correctness: list[bool] = []
    purity_trace: list[tuple[int, float]] = []

    for record in records:
        result = adapt_sample(record, state, config)
        n_records += 1
        score_sum += result.score
        merges += int(result.merge_accepted)
        if result.correct is not None:
            n_labeled += 1
            n_correct += int(result.correct)
            confidences.append(result.confidence)
            correctness.append(result.correct)
        if n_records % config.purity_every == 0 and result.cache_purity is not None:
            purity_trace.append((n_records, result.cache_purity))
        if on_result is not None:
            on_result(result)

    accuracy = n_correct / n_labeled if n_labeled else None
    ece = expected_calibration_error(confidences, correctness) if n_labeled else None
    return RunMetrics(
        n_records=n_records,
        n_labeled=n_labeled,
        top1_accuracy=accuracy,
        ece=ece,
        cache_purity_trace=purity_trace,
        final_cache_purity=state.cache.purity() if config.cache_enabled else None,
        mean_score=score_sum / n_records if n_records else 0.0,
        merge_rate=merges / n_records if n_records else 0.0,
        final_cache={str(c): entries for c, entries in state.cache.dump().items()},
    )
