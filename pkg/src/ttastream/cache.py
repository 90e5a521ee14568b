"""Per-class bounded priority store keyed by reweighted entropy.

Each class owns at most `capacity` entries. A full slot admits a newcomer
only if its reweighted entropy is strictly below the slot's current maximum,
in which case that maximum is evicted (ties on the maximum evict the older
arrival, favoring recency). Per-class prototypes are normalized slot means;
their similarity to a query feature enters the classifier logits through
the modulating function alpha * exp(-beta * (1 - sim)).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import l2_normalize
from .errors import InvalidClass


class InsertionOutcome(enum.Enum):
    INSERTED = "inserted"
    REPLACED = "replaced"
    REJECTED = "rejected"


@dataclass(eq=False)  # identity equality: entries hold arrays and live in lists
class CacheEntry:
    feature: np.ndarray  # unit-norm (d,)
    pseudo_label: int
    reweighted_entropy: float
    arrival_index: int
    true_label: int | None = None  # metrics only; None when unlabeled


class ReliabilityCache:
    """C slots of at most `capacity` entries each, max-H'-evicted.

    Single-writer: the stream owner mutates it sequentially; prototypes,
    purity, and dumps are read-only snapshots.
    """

    def __init__(self, num_classes: int, capacity: int):
        if num_classes < 1:
            raise InvalidClass(f"num_classes={num_classes}")
        if capacity < 1:
            raise ValueError(f"capacity={capacity} must be >= 1")
        self.num_classes = num_classes
        self.capacity = capacity
        self.slots: list[list[CacheEntry]] = [[] for _ in range(num_classes)]

    def insert_or_evict(self, entry: CacheEntry) -> tuple[InsertionOutcome, CacheEntry | None]:
        """Apply the admission rule; returns (outcome, evicted entry or None)."""
        label = entry.pseudo_label
        if not 0 <= label < self.num_classes:
            raise InvalidClass(f"pseudo_label={label} outside [0, {self.num_classes})")
        slot = self.slots[label]
        if len(slot) < self.capacity:
            slot.append(entry)
            return InsertionOutcome.INSERTED, None
        max_h = max(e.reweighted_entropy for e in slot)
        if entry.reweighted_entropy < max_h:
            # ties on the maximum evict the older arrival
            victim = min(
                (e for e in slot if e.reweighted_entropy == max_h),
                key=lambda e: e.arrival_index,
            )
            slot.remove(victim)
            slot.append(entry)
            return InsertionOutcome.REPLACED, victim
        return InsertionOutcome.REJECTED, None

    def class_prototypes(self) -> tuple[np.ndarray, np.ndarray]:
        """(labels, prototypes): normalized mean feature of each nonempty slot.

        labels is a sorted int array; prototypes has one row per label.
        """
        labels = [c for c in range(self.num_classes) if self.slots[c]]
        if not labels:
            return np.empty(0, dtype=np.int64), np.empty((0, 0), dtype=np.float64)
        protos = np.stack(
            [l2_normalize(np.mean([e.feature for e in self.slots[c]], axis=0)) for c in labels]
        )
        return np.asarray(labels, dtype=np.int64), protos

    def purity(self) -> float | None:
        """Fraction of stored entries whose pseudo-label matches ground truth.

        None when the cache is empty or no entry carries a true label.
        """
        entries = [e for slot in self.slots for e in slot if e.true_label is not None]
        if not entries:
            return None
        correct = sum(1 for e in entries if e.pseudo_label == e.true_label)
        return correct / len(entries)

    def dump(self) -> dict[int, list[tuple[int, float, bool | None]]]:
        """Per-class (arrival_index, H', correct?) triples for reporting."""
        out: dict[int, list[tuple[int, float, bool | None]]] = {}
        for c, slot in enumerate(self.slots):
            if slot:
                out[c] = [
                    (
                        e.arrival_index,
                        e.reweighted_entropy,
                        None if e.true_label is None else e.pseudo_label == e.true_label,
                    )
                    for e in slot
                ]
        return out

    def __len__(self) -> int:
        return sum(len(slot) for slot in self.slots)


def cache_logits(
    z: np.ndarray,
    proto_labels: np.ndarray,
    prototypes: np.ndarray,
    num_classes: int,
    alpha: float,
    beta: float,
) -> np.ndarray:
    """Per-class cache affinity alpha * exp(-beta * (1 - z . F_c)).

    Classes without a prototype contribute zero. z must be unit-norm.
    """
    out = np.zeros(num_classes, dtype=np.float64)
    if prototypes.size == 0:
        return out
    sims = prototypes @ np.asarray(z, dtype=np.float64)
    out[proto_labels] = alpha * np.exp(-beta * (1.0 - sims))
    return out
