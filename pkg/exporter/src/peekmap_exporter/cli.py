"""Command-line front end for activation export.

Exit codes: 0 success, 1 usage error (bad flags), 2 data error (missing
weights or image, broken checkpoint, capture failure).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .export import ExportError, ExportPlan, export_activations, list_layers, load_model


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this interface reserves 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _layer_list(value: str) -> list[int]:
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"--layers must be comma-separated integers, got {value!r}"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="peekmap-export",
        description="Run a detector on one image and save its activations "
        "as a bundle directory.",
    )
    parser.add_argument("--weights", required=True, help="checkpoint file (.pt)")
    parser.add_argument("--image", help="input image file")
    parser.add_argument("--out", help="bundle directory to create")
    parser.add_argument(
        "--layers",
        type=_layer_list,
        default=None,
        help="comma-separated module indices (default: all)",
    )
    parser.add_argument(
        "--list",
        action="store_true",
        help="print the module table and exit without exporting",
    )
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.list:
            for layer in list_layers(load_model(args.weights)):
                print(f"{layer.index:3d}  {layer.module_type:<18} {layer.name}")
            return 0
        if not args.image or not args.out:
            parser.error("--image and --out are required unless --list is given")
        plan = ExportPlan(
            weights=Path(args.weights),
            image=Path(args.image),
            out=Path(args.out),
            layers=args.layers,
        )
        out = export_activations(plan)
        print(f"wrote bundle to {out}")
        return 0
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except (ExportError, OSError) as exc:
        print(f"peekmap-export: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
