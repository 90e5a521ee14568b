"""Synthetic embedding-stream benchmarks with controllable shift and noise.

Class directions sit on a narrow cone around a shared hub (`class_spread`
controls the cone radius), the way encoder embedding spaces concentrate:
similarities are large, inter-class margins small, and entropies spread over
a usable range instead of collapsing to numerical zero. The text side samples
K jittered prompts per class; the image side rotates every class direction
by a fixed angle inside a random 2-plane (the covariate shift) and scatters
clean samples around the shifted center. A `noise_rate` fraction are
boundary cases: blends of the true class's image cluster with a lure built
from the confusion class's centroid embedding minus its outlier-prompt axis,
so the final prototype claims them with clean-tail confidence while the
committee members do not back them, the controversial-sample signature that
consistency voting catches and plain entropy cannot. Augmented views add
small angular jitter. Everything is a pure function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import l2_normalize, normalize_rows
from .errors import InvalidSpec
from .pipeline import SampleRecord
from .textspace import build_adjacent_embeddings
from .oracles import oracle_suite  # re-exported: tests reach oracles through here

__all__ = ["SyntheticSpec", "generate_benchmark", "oracle_suite"]


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int = 10
    dim: int = 64
    prompts_per_class: int = 8  # K
    adjacent_count: int = 3  # M, only validated against K here
    samples_per_class: int = 200
    n_views: int = 8  # augmented views per record (N)
    shift: float = 0.6  # angular displacement of class centers, radians
    view_jitter: float = 0.1  # sigma_view
    noise_rate: float = 0.1  # rho, fraction of boundary cases
    seed: int = 0
    # dispersion knobs; relative magnitudes against unit directions
    class_spread: float = 0.3  # cone radius of class directions around the hub
    prompt_jitter: float = 0.4
    feature_jitter: float = 1.0
    boundary_low: float = 0.93  # blend range for boundary cases
    boundary_high: float = 0.99
    boundary_feature_jitter: float = 0.1
    contest_strength: float = 0.45  # suppression of the confusion class's outlier axis

    def validate(self) -> "SyntheticSpec":
        if self.n_classes < 2:
            raise InvalidSpec("n_classes must be >= 2")
        if self.dim < 2:
            raise InvalidSpec("dim must be >= 2")
        if self.prompts_per_class < 2:
            raise InvalidSpec("prompts_per_class must be >= 2")
        if self.prompts_per_class < self.adjacent_count:
            raise InvalidSpec(
                f"prompts_per_class={self.prompts_per_class} must be >= adjacent_count={self.adjacent_count}"
            )
        if self.samples_per_class < 1:
            raise InvalidSpec("samples_per_class must be >= 1")
        if self.n_views < 0:
            raise InvalidSpec("n_views must be >= 0")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise InvalidSpec("noise_rate must be in [0, 1]")
        for name in (
            "shift", "view_jitter", "prompt_jitter", "feature_jitter",
            "boundary_feature_jitter", "contest_strength",
        ):
            if getattr(self, name) < 0.0:
                raise InvalidSpec(f"{name} must be >= 0")
        if self.class_spread <= 0.0:
            raise InvalidSpec("class_spread must be > 0")
        if not 0.0 <= self.boundary_low <= self.boundary_high <= 1.0:
            raise InvalidSpec("need 0 <= boundary_low <= boundary_high <= 1")
        return self


def _rotate_in_random_plane(direction: np.ndarray, angle: float, rng: np.random.Generator) -> np.ndarray:
    """Rotate a unit vector by `angle` within the plane it spans with a
    random orthogonal complement direction."""
    if angle == 0.0:
        return direction.copy()
    raw = rng.normal(size=direction.shape[0])
    ortho = raw - (raw @ direction) * direction
    ortho = l2_normalize(ortho)
    return np.cos(angle) * direction + np.sin(angle) * ortho


def generate_benchmark(
    spec: SyntheticSpec, return_noise_flags: bool = False
) -> tuple[np.ndarray, list[SampleRecord]] | tuple[np.ndarray, list[SampleRecord], list[bool]]:
    """Return (prompts (C, K, d), records) for the given spec, byte-stable per seed.

    With return_noise_flags=True a third element marks which records are
    boundary cases (diagnostics only; the engine never sees it).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    c, d, k = spec.n_classes, spec.dim, spec.prompts_per_class
    scale = 1.0 / np.sqrt(d)  # per-coordinate std for ~unit-norm jitter vectors

    hub = normalize_rows(rng.normal(size=(1, d)))[0]
    class_dirs = normalize_rows(
        hub[None, :] + rng.normal(size=(c, d)) * (spec.class_spread * scale)
    )
    prompts = np.empty((c, k, d))
    for ci in range(c):
        jitter = rng.normal(size=(k, d)) * (spec.prompt_jitter * scale)
        prompts[ci] = normalize_rows(class_dirs[ci][None, :] + jitter)

    image_dirs = np.stack(
        [_rotate_in_random_plane(class_dirs[ci], spec.shift, rng) for ci in range(c)]
    )

    # Controversial-sample geometry for the boundary cases. For each class v,
    # `centroid[v]` is its final text prototype and `contested[v]` the
    # direction separating its outlier-prompt bin from that prototype. A
    # boundary case blends the true class's image cluster with the confusion
    # class's *centroid minus contested axis*: the final prototype claims it
    # with clean-tail-level confidence while the outlier committee members do
    # not back it, which is invisible to plain entropy.
    adjacent = build_adjacent_embeddings(prompts, spec.adjacent_count)
    centroid = adjacent[:, -1, :]
    contested = np.zeros((c, d))
    for ci in range(c):
        axis = adjacent[ci, 0] - (adjacent[ci, 0] @ centroid[ci]) * centroid[ci]
        norm = np.linalg.norm(axis)
        if norm > 1e-9:
            contested[ci] = axis / norm

    labels = np.repeat(np.arange(c), spec.samples_per_class)
    rng.shuffle(labels)

    records: list[SampleRecord] = []
    noise_flags: list[bool] = []
    for idx, label in enumerate(labels):
        label = int(label)
        boundary = rng.random() < spec.noise_rate and c >= 2
        if boundary:
            other = int(rng.integers(c - 1))
            if other >= label:
                other += 1
            blend = rng.uniform(spec.boundary_low, spec.boundary_high)
            strength = spec.contest_strength * rng.uniform(0.75, 1.25)
            lure = l2_normalize(centroid[other] - strength * contested[other])
            center = (1.0 - blend) * image_dirs[label] + blend * lure
            noise = rng.normal(size=d) * (spec.boundary_feature_jitter * scale)
        else:
            center = image_dirs[label]
            noise = rng.normal(size=d) * (spec.feature_jitter * scale)
        z0 = l2_normalize(center + noise)
        views = [z0]
        for _ in range(spec.n_views):
            views.append(l2_normalize(z0 + rng.normal(size=d) * (spec.view_jitter * scale)))
        records.append(SampleRecord(sample_id=idx, views=np.stack(views), true_label=label))
        noise_flags.append(boundary)
    if return_noise_flags:
        return prompts, records, noise_flags
    return prompts, records
