#!/usr/bin/env python3
"""Sweep the cache-logit scale (alpha) and sharpness (beta).

These two are dataset-specific; this sweep documents how the synthetic-run
defaults were validated. Usage: python scripts/sweep_cache_scale.py [seed]
"""

import dataclasses
import sys

from ttastream.config import RunConfig
from ttastream.datagen import SyntheticSpec, generate_benchmark
from ttastream.pipeline import run_stream


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
    spec = dataclasses.replace(SyntheticSpec(), seed=seed)
    prompts, records = generate_benchmark(spec)
    zero_shot = run_stream(
        records, prompts,
        RunConfig(svd_rank=24, cer_enabled=False, ddc_enabled=False, cache_enabled=False, eta=0.0),
    )
    print(f"seed={seed}  zero-shot={zero_shot.top1_accuracy:.4f}")
    print(f"{'alpha':>7}{'beta':>7}{'accuracy':>10}{'gain':>8}")
    for alpha in (0.5, 1.0, 2.0, 4.0):
        for beta in (3.0, 5.0, 8.0):
            metrics = run_stream(records, prompts, RunConfig(svd_rank=24, alpha=alpha, beta=beta))
            gain = 100 * (metrics.top1_accuracy - zero_shot.top1_accuracy)
            print(f"{alpha:>7.1f}{beta:>7.1f}{metrics.top1_accuracy:>10.4f}{gain:>+8.2f}")


if __name__ == "__main__":
    main()
