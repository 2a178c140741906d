"""Command line for the anchor exporter.

Examples:
    clip-anchor-export --encoder-name ViT-B/16 \
        --prompt-template "This is a photo of a {}" --cifar100 \
        --output-path cifar100_vitb16.json
    clip-anchor-export --write-groups cifar100_groups.json
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cifar100 import CIFAR100_LABELS, supercategory_map
from .export import ExporterError, ExportRequest, export_anchors


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clip-anchor-export",
        description="Export unit-norm text-encoder anchors to anchor-file JSON.",
    )
    parser.add_argument("--encoder-name", default="ViT-B/16",
                        help="Friendly name (ViT-B/32, ViT-B/16, ViT-L/14), "
                             "checkpoint id, or local checkpoint directory.")
    parser.add_argument("--prompt-template", default="This is a photo of a {}",
                        help="Template with exactly one {} placeholder.")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--labels-file",
                       help="Text file with one category name per line.")
    group.add_argument("--cifar100", action="store_true",
                       help="Use the built-in CIFAR-100 category names.")
    parser.add_argument("--output-path", help="Anchor JSON destination.")
    parser.add_argument("--write-groups", metavar="PATH",
                        help="Also (or only) write the CIFAR-100 label-to-"
                             "supercategory map as JSON.")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.write_groups:
            Path(args.write_groups).write_text(
                json.dumps(supercategory_map(), indent=1, sort_keys=True),
                encoding="utf-8",
            )
            print(f"wrote {args.write_groups}")
            if not args.output_path:
                return 0
        if not args.output_path:
            print("error: --output-path is required to export anchors",
                  file=sys.stderr)
            return 1
        if args.cifar100:
            labels = list(CIFAR100_LABELS)
        elif args.labels_file:
            labels = [line.strip() for line in
                      Path(args.labels_file).read_text(encoding="utf-8").splitlines()
                      if line.strip()]
        else:
            print("error: pass --labels-file or --cifar100", file=sys.stderr)
            return 1
        request = ExportRequest(
            encoder_name=args.encoder_name,
            prompt_template=args.prompt_template,
            labels=labels,
            output_path=args.output_path,
        )
        doc = export_anchors(request)
        print(f"wrote {args.output_path}: {len(doc['labels'])} anchors, "
              f"dim {doc['dim']}")
        return 0
    except ExporterError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
