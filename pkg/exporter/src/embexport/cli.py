"""Command-line entry point for the embedding exporter."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .encoders import EncoderLoadError
from .jobs import DEFAULT_TEMPLATES, ExportJob, export_embeddings


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embexport",
        description="Encode an image directory (class subdirectories) into the "
        "binary embedding-stream dataset format.",
    )
    parser.add_argument("image_root", help="directory with one subdirectory per class")
    parser.add_argument("-o", "--output", required=True)
    parser.add_argument("--views", type=int, default=3, help="augmented views per image (N)")
    parser.add_argument(
        "--encoder", default="untrained",
        help="'untrained' (deterministic random features, no checkpoint needed), "
        "'clip', or 'clip:<model-name>'",
    )
    parser.add_argument("--dim", type=int, default=64, help="embedding dim (untrained backend)")
    parser.add_argument("--size", type=int, default=64, help="view resolution in pixels")
    parser.add_argument("--seed", type=int, default=0, help="augmentation seed")
    parser.add_argument(
        "--templates", help="file with one prompt template per line ('{}' = class name)"
    )
    args = parser.parse_args(argv)

    templates = list(DEFAULT_TEMPLATES)
    if args.templates:
        lines = Path(args.templates).read_text().splitlines()
        templates = [line.strip() for line in lines if line.strip()]

    job = ExportJob(
        image_root=Path(args.image_root),
        output=Path(args.output),
        n_views=args.views,
        encoder=args.encoder,
        dim=args.dim,
        image_size=args.size,
        seed=args.seed,
        templates=templates,
    )
    try:
        header, count = export_embeddings(job)
    except EncoderLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(
        f"wrote {args.output}: C={header.num_classes} d={header.dim} "
        f"K={header.prompts_per_class} N={header.num_views} records={count}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
