"""Command-line entry point: gen | run | eval | report.

Exit codes: 0 success, 2 configuration or benchmark-spec error, 3 dataset or
log error, 4 runtime failure (non-finite loss). Stdout is human-oriented;
machine-readable artifacts are written only to paths given via flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataset_io, datagen
from .config import load_config
from .errors import ConfigError, DatasetError, InvalidSpec, NoLabels, TtaError
from .pipeline import RunMetrics, SampleResult, expected_calibration_error, run_stream

LOG_FIELDS = [
    "id", "true", "y", "y_star", "w", "H", "H_prime", "cache", "evicted",
    "merge", "pred", "correct", "conf", "purity",
    "L_ent", "L_surr", "L_align", "grad_norm",
]


def _result_to_line(result: SampleResult) -> str:
    row = {
        "id": result.sample_id,
        "true": result.true_label,
        "y": result.original,
        "y_star": result.majority,
        "w": result.score,
        "H": result.entropy,
        "H_prime": result.reweighted,
        "cache": result.cache_event,
        "evicted": result.evicted_arrival,
        "merge": result.merge_accepted,
        "pred": result.prediction,
        "correct": result.correct,
        "conf": result.confidence,
        "purity": result.cache_purity,
        "L_ent": result.losses.entropy_term if result.losses else None,
        "L_surr": result.losses.surrogate_term if result.losses else None,
        "L_align": result.losses.alignment_term if result.losses else None,
        "grad_norm": result.grad_norm,
    }
    return json.dumps(row, sort_keys=True, separators=(",", ":"))


def _metrics_to_json(metrics: RunMetrics, config) -> str:
    doc = {
        "config": config.to_dict(),
        "n_records": metrics.n_records,
        "n_labeled": metrics.n_labeled,
        "top1_accuracy": metrics.top1_accuracy,
        "ece": metrics.ece,
        "mean_score": metrics.mean_score,
        "merge_rate": metrics.merge_rate,
        "cache_purity_trace": [list(pair) for pair in metrics.cache_purity_trace],
        "final_cache_purity": metrics.final_cache_purity,
        "final_cache": metrics.final_cache,
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ttastream",
        description="Streaming test-time adaptation over embedding streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    spec_defaults = datagen.SyntheticSpec()
    gen = sub.add_parser("gen", help="generate a synthetic benchmark dataset")
    gen.add_argument("--classes", type=int, default=spec_defaults.n_classes)
    gen.add_argument("--dim", type=int, default=spec_defaults.dim)
    gen.add_argument("--prompts", type=int, default=spec_defaults.prompts_per_class,
                     help="prompts per class (K)")
    gen.add_argument("--adjacent", type=int, default=spec_defaults.adjacent_count,
                     help="committee size M (K >= M)")
    gen.add_argument("--samples-per-class", type=int, default=spec_defaults.samples_per_class)
    gen.add_argument("--views", type=int, default=spec_defaults.n_views,
                     help="augmented views per record (N)")
    gen.add_argument("--shift", type=float, default=spec_defaults.shift)
    gen.add_argument("--view-jitter", type=float, default=spec_defaults.view_jitter)
    gen.add_argument("--noise-rate", type=float, default=spec_defaults.noise_rate)
    gen.add_argument("--class-spread", type=float, default=spec_defaults.class_spread)
    gen.add_argument("--prompt-jitter", type=float, default=spec_defaults.prompt_jitter)
    gen.add_argument("--feature-jitter", type=float, default=spec_defaults.feature_jitter)
    gen.add_argument("--boundary-low", type=float, default=spec_defaults.boundary_low)
    gen.add_argument("--boundary-high", type=float, default=spec_defaults.boundary_high)
    gen.add_argument("--boundary-jitter", type=float, default=spec_defaults.boundary_feature_jitter)
    gen.add_argument("--contest-strength", type=float, default=spec_defaults.contest_strength)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--output", required=True)

    run = sub.add_parser("run", help="run the adaptation engine over a dataset")
    run.add_argument("dataset")
    run.add_argument("--config", help="JSON config file (file < env < flags)")
    run.add_argument("--seed", type=int)
    run.add_argument("--eta", type=float)
    run.add_argument("--gamma", type=float)
    run.add_argument("--alpha", type=float)
    run.add_argument("--beta", type=float)
    run.add_argument("--cache-size", type=int)
    run.add_argument("--adjacent", type=int, help="committee size M")
    run.add_argument("--svd-rank", type=int, help="retained singular vectors n")
    run.add_argument("--tau", type=float)
    run.add_argument("--disable-cer", action="store_true")
    run.add_argument("--disable-ddc", action="store_true")
    run.add_argument("--disable-cache", action="store_true")
    run.add_argument("-o", "--metrics", help="write run metrics JSON here")
    run.add_argument("--log", help="write the per-sample prediction log (JSONL) here")

    ev = sub.add_parser("eval", help="accuracy/ECE summary of one prediction log")
    ev.add_argument("log")
    ev.add_argument("--bins", type=int, default=20)

    rep = sub.add_parser("report", help="compare one or more prediction logs")
    rep.add_argument("logs", nargs="+")
    rep.add_argument("--csv", help="write per-log cache-purity traces as CSV")
    rep.add_argument("--bins", type=int, default=20)
    rep.add_argument(
        "--cache-dump", action="store_true",
        help="print each log's final cache as (arrival, H', correct?) per class",
    )
    return parser


def _cmd_gen(args) -> int:
    spec = datagen.SyntheticSpec(
        n_classes=args.classes,
        dim=args.dim,
        prompts_per_class=args.prompts,
        adjacent_count=args.adjacent,
        samples_per_class=args.samples_per_class,
        n_views=args.views,
        shift=args.shift,
        view_jitter=args.view_jitter,
        noise_rate=args.noise_rate,
        seed=args.seed,
        class_spread=args.class_spread,
        prompt_jitter=args.prompt_jitter,
        feature_jitter=args.feature_jitter,
        boundary_low=args.boundary_low,
        boundary_high=args.boundary_high,
        boundary_feature_jitter=args.boundary_jitter,
        contest_strength=args.contest_strength,
    )
    prompts, records = datagen.generate_benchmark(spec)
    header = dataset_io.DatasetHeader(
        dim=spec.dim,
        num_classes=spec.n_classes,
        prompts_per_class=spec.prompts_per_class,
        num_views=spec.n_views,
        labels_present=True,
        class_names=[f"class_{i}" for i in range(spec.n_classes)],
    )
    count = dataset_io.write_dataset(header, prompts, records, args.output)
    print(
        f"wrote {args.output}: C={spec.n_classes} d={spec.dim} K={spec.prompts_per_class} "
        f"N={spec.n_views} records={count}"
    )
    return 0


def _cmd_run(args) -> int:
    overrides = {
        "seed": args.seed,
        "eta": args.eta,
        "gamma": args.gamma,
        "alpha": args.alpha,
        "beta": args.beta,
        "cache_size": args.cache_size,
        "adjacent_count": args.adjacent,
        "svd_rank": args.svd_rank,
        "tau": args.tau,
    }
    if args.disable_cer:
        overrides["cer_enabled"] = False
    if args.disable_ddc:
        overrides["ddc_enabled"] = False
    if args.disable_cache:
        overrides["cache_enabled"] = False
    config = load_config(path=args.config, overrides=overrides)

    header, prompts, records = dataset_io.read_dataset(args.dataset)
    if config.adjacent_count > header.prompts_per_class:
        raise ConfigError(
            "adjacent_count",
            f"{config.adjacent_count} exceeds the dataset's prompts_per_class="
            f"{header.prompts_per_class}",
        )
    log_handle = open(args.log, "w") if args.log else None
    try:
        on_result = None
        if log_handle is not None:
            on_result = lambda res: print(_result_to_line(res), file=log_handle)
        metrics = run_stream(records, prompts, config, on_result=on_result)
    finally:
        if log_handle is not None:
            log_handle.close()
    if args.metrics:
        Path(args.metrics).write_text(_metrics_to_json(metrics, config) + "\n")
    acc = "n/a" if metrics.top1_accuracy is None else f"{metrics.top1_accuracy:.4f}"
    ece = "n/a" if metrics.ece is None else f"{metrics.ece:.4f}"
    purity = "n/a" if metrics.final_cache_purity is None else f"{metrics.final_cache_purity:.4f}"
    print(
        f"records={metrics.n_records} accuracy={acc} ece={ece} cache_purity={purity} "
        f"merge_rate={metrics.merge_rate:.4f} mean_w={metrics.mean_score:.4f}"
    )
    return 0


def _read_log(path: str) -> list[dict]:
    rows = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DatasetError(f"{path}:{lineno}: malformed log line ({exc})") from exc
                if "pred" not in row or "id" not in row:
                    raise DatasetError(f"{path}:{lineno}: missing required fields")
                rows.append(row)
    except OSError as exc:
        raise DatasetError(f"cannot read log {path}: {exc}") from exc
    return rows


def _summarize(rows: list[dict], bins: int) -> dict:
    labeled = [r for r in rows if r.get("correct") is not None]
    acc = sum(1 for r in labeled if r["correct"]) / len(labeled) if labeled else None
    ece = None
    if labeled:
        ece = expected_calibration_error(
            [r["conf"] for r in labeled], [bool(r["correct"]) for r in labeled], bins=bins
        )
    purities = [r["purity"] for r in rows if r.get("purity") is not None]
    scores = [r["w"] for r in rows if r.get("w") is not None]
    merges = sum(1 for r in rows if r.get("merge"))
    return {
        "records": len(rows),
        "accuracy": acc,
        "ece": ece,
        "final_purity": purities[-1] if purities else None,
        "mean_w": sum(scores) / len(scores) if scores else None,
        "merge_rate": merges / len(rows) if rows else None,
    }


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _cmd_eval(args) -> int:
    rows = _read_log(args.log)
    summary = _summarize(rows, args.bins)
    for key in ("records", "accuracy", "ece", "final_purity", "mean_w", "merge_rate"):
        print(f"{key:>12}: {_fmt(summary[key])}")
    return 0


def _reconstruct_cache(rows: list[dict]) -> dict[int, list[tuple[int, float, bool | None]]]:
    """Replay the per-line cache events into the final per-class state."""
    slots: dict[int, list[tuple[int, float, bool | None]]] = {}
    for arrival, row in enumerate(rows):
        event = row.get("cache")
        if event not in ("inserted", "replaced"):
            continue
        slot = slots.setdefault(row["y"], [])
        if event == "replaced":
            slot[:] = [entry for entry in slot if entry[0] != row["evicted"]]
        correct = None if row.get("true") is None else row["y"] == row["true"]
        slot.append((arrival, row["H_prime"], correct))
    return dict(sorted(slots.items()))


def _print_cache_dump(name: str, rows: list[dict]) -> None:
    print(f"final cache [{name}]:")
    for class_id, entries in _reconstruct_cache(rows).items():
        cells = " ".join(
            f"({arrival}, {key:.3e}, {'?' if ok is None else 'ok' if ok else 'WRONG'})"
            for arrival, key, ok in entries
        )
        print(f"  class {class_id}: {cells}")


def _cmd_report(args) -> int:
    names = [Path(p).stem for p in args.logs]
    all_rows = [_read_log(p) for p in args.logs]
    summaries = [_summarize(rows, args.bins) for rows in all_rows]
    keys = ["records", "accuracy", "ece", "final_purity", "mean_w", "merge_rate"]
    width = max(len(n) for n in names + ["metric"]) + 2
    header = "metric".ljust(14) + "".join(n.rjust(width) for n in names)
    if len(summaries) == 2:
        header += "delta".rjust(width)
    print(header)
    for key in keys:
        line = key.ljust(14) + "".join(_fmt(s[key]).rjust(width) for s in summaries)
        if len(summaries) == 2:
            a, b = summaries[0][key], summaries[1][key]
            delta = None if a is None or b is None else b - a
            line += _fmt(delta).rjust(width)
        print(line)
    if args.cache_dump:
        for name, rows in zip(names, all_rows):
            _print_cache_dump(name, rows)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("record," + ",".join(f"purity_{n}" for n in names) + "\n")
            length = max(len(rows) for rows in all_rows)
            for i in range(length):
                cells = []
                for rows in all_rows:
                    val = rows[i].get("purity") if i < len(rows) else None
                    cells.append("" if val is None else repr(val))
                fh.write(f"{i}," + ",".join(cells) + "\n")
        print(f"wrote {args.csv}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "report":
            return _cmd_report(args)
        raise AssertionError(f"unknown command {args.command}")
    except (ConfigError, InvalidSpec) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, NoLabels) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except TtaError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
