"""Command-line front end.

Exit codes: 0 success, 1 usage error (bad flags), 2 data error (missing
or malformed inputs). Identical inputs and flags produce byte-identical
output files. PEEKMAP_THREADS caps the per-layer worker count (0 or
unset picks the CPU count); the bench subcommand is always sequential.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .bench import BenchError, run_benchmark, write_csv
from .bundle import ActivationBundle, BundleError, load_bundle
from .eigencam import DecompositionError, eigencam_map
from .figures import pr_figure, runtime_chart
from .metrics import (
    COCO_THRESHOLDS,
    MetricsError,
    load_detections,
    load_ground_truth,
    load_image_sizes,
    mean_ap,
    pr_curve,
)
from .peek import Method, SaliencyMap, peek_map
from .render import (
    grid_compare,
    minmax_normalize,
    overlay,
    render_feature_slice,
    resize_bilinear,
    write_png,
)


class CliError(Exception):
    """Bad input data; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this interface reserves 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _alpha(value: str) -> float:
    try:
        alpha = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--alpha must be a number, got {value!r}")
    if not 0.0 <= alpha <= 1.0:
        raise argparse.ArgumentTypeError(f"--alpha must lie in [0, 1], got {value}")
    return alpha


def _positive_int(flag: str):
    def parse(value: str) -> int:
        try:
            number = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be an integer, got {value!r}")
        if number < 1:
            raise argparse.ArgumentTypeError(f"{flag} must be >= 1, got {value}")
        return number

    return parse


def _nonnegative_int(flag: str):
    def parse(value: str) -> int:
        try:
            number = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be an integer, got {value!r}")
        if number < 0:
            raise argparse.ArgumentTypeError(f"{flag} must be >= 0, got {value}")
        return number

    return parse


def _select_layers(spec: str, bundle: ActivationBundle) -> list[int]:
    available = bundle.layer_indices()
    if spec == "all":
        return available
    try:
        indices = [int(piece) for piece in spec.split(",") if piece.strip()]
    except ValueError:
        raise CliError(f"--layers expects 'all' or comma-separated integers, got {spec!r}")
    if not indices:
        raise CliError("--layers selected no layers")
    known = set(available)
    for index in indices:
        if index not in known:
            raise CliError(
                f"layer index {index} not in bundle "
                f"(available: {', '.join(map(str, available))})"
            )
    return indices


def _select_slices(spec: str, depth: int, layer_index: int) -> list[int]:
    if spec == "all":
        return list(range(depth))
    try:
        slices = [int(piece) for piece in spec.split(",") if piece.strip()]
    except ValueError:
        raise CliError(f"--slices expects 'all' or comma-separated integers, got {spec!r}")
    for k in slices:
        if not 0 <= k < depth:
            raise CliError(
                f"slice {k} out of range for layer {layer_index} (depth {depth})"
            )
    return slices


def _worker_count(n_tasks: int) -> int:
    raw = os.environ.get("PEEKMAP_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        raise CliError(f"PEEKMAP_THREADS must be an integer, got {raw!r}")
    if cap < 0:
        raise CliError(f"PEEKMAP_THREADS must be >= 0, got {cap}")
    if cap == 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def _run_parallel(fn, items: list):
    if not items:
        return []
    workers = _worker_count(len(items))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _parse_thresholds(spec: str) -> list[float]:
    if spec == "0.5:0.95":
        return list(COCO_THRESHOLDS)
    try:
        thresholds = [float(piece) for piece in spec.split(",") if piece.strip()]
    except ValueError:
        raise CliError(
            f"--iou expects '0.5:0.95' or comma-separated values, got {spec!r}"
        )
    if not thresholds:
        raise CliError("--iou selected no thresholds")
    return thresholds


# --- subcommand bodies -----------------------------------------------------


def _cmd_saliency(args) -> int:
    compare = args.command == "compare"
    if compare:
        methods = [Method.PEEK, Method.EIGENCAM]
    else:
        methods = [Method(args.command)]
    bundle = load_bundle(args.bundle)
    layers = _select_layers(args.layers, bundle)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    image = bundle.input_image
    height, width = image.shape[:2]
    negate = getattr(args, "negate", False)

    def compute(index: int) -> tuple[int, dict[Method, SaliencyMap]]:
        stack = bundle.stack(index)
        maps = {}
        if Method.PEEK in methods:
            maps[Method.PEEK] = peek_map(stack, negate=negate)
        if Method.EIGENCAM in methods:
            maps[Method.EIGENCAM] = eigencam_map(stack)
        return index, maps

    computed = _run_parallel(compute, layers)

    bounds: dict[Method, tuple[float, float] | None] = {m: None for m in methods}
    if args.global_norm:
        for method in methods:
            values = [maps[method].data for _, maps in computed]
            bounds[method] = (
                min(float(v.min()) for v in values),
                max(float(v.max()) for v in values),
            )

    def blended(saliency: SaliencyMap, method: Method):
        normalized = minmax_normalize(saliency, bounds=bounds[method])
        resized = resize_bilinear(normalized, height, width)
        return overlay(image, resized, args.alpha)

    def render(item: tuple[int, dict[Method, SaliencyMap]]) -> None:
        index, maps = item
        if compare:
            tiles = [blended(maps[m], m) for m in methods]
            grid = grid_compare(tiles, columns=2, labels=[m.value for m in methods])
            write_png(grid, out / f"layer_{index:03d}_compare.png")
        else:
            for method in methods:
                write_png(
                    blended(maps[method], method),
                    out / f"layer_{index:03d}_{method.value}.png",
                )

    _run_parallel(render, computed)
    return 0


def _cmd_features(args) -> int:
    bundle = load_bundle(args.bundle)
    layers = _select_layers(args.layers, bundle)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def render(index: int) -> None:
        stack = bundle.stack(index)
        for k in _select_slices(args.slices, stack.shape[0], index):
            write_png(
                render_feature_slice(stack, k),
                out / f"layer_{index:03d}_feature_{k:03d}.png",
            )

    _run_parallel(render, layers)
    return 0


def _cmd_metrics(args) -> int:
    sizes = load_image_sizes(args.sizes)
    gts = load_ground_truth(args.gt, sizes)
    dets = load_detections(args.det, sizes)
    thresholds = _parse_thresholds(args.iou)
    report = mean_ap(dets, gts, thresholds, conf_threshold=args.conf)

    payload = json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n"
    Path(args.out).write_text(payload, encoding="utf-8")

    print(f"{'class':>8}  " + "  ".join(f"AP@{t:.2f}" for t in thresholds))
    for class_id, by_threshold in sorted(report.per_class_ap.items()):
        row = "  ".join(f"{by_threshold[t]:7.4f}" for t in thresholds)
        print(f"{class_id:>8}  {row}")
    if report.map_50 is not None:
        print(f"mAP@0.5      {report.map_50:.4f}")
    if report.map_50_95 is not None:
        print(f"mAP@0.5:0.95 {report.map_50_95:.4f}")
    print(
        f"P {report.precision:.4f}  R {report.recall:.4f}  "
        f"TP {report.tp}  FP {report.fp}  FN {report.fn}  "
        f"(conf >= {report.conf_threshold})"
    )

    if args.figure:
        lowest = min(thresholds)
        classes = sorted({g.class_id for g in gts})
        curves = {c: pr_curve(dets, gts, c, lowest) for c in classes}
        pr_figure(curves, args.figure)
    return 0


def _cmd_bench(args) -> int:
    bundle = load_bundle(args.bundle)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = run_benchmark(bundle, repeats=args.repeats, warmup=args.warmup)
    write_csv(records, out / "bench.csv")
    if not args.no_chart:
        runtime_chart(records, out / "bench.svg")
    for record in records:
        if record.speedup_vs_other is not None:
            print(
                f"layer {record.layer_index}: peek {record.mean_ns / 1e6:.3f} ms, "
                f"speedup {record.speedup_vs_other:.1f}x"
            )
    return 0


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="peekmap",
        description="Saliency maps and evaluation tools for detector activations.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add_bundle_flags(p, layers_help: str):
        p.add_argument("--bundle", required=True, help="activation bundle directory")
        p.add_argument(
            "--layers",
            default="all",
            help=f"{layers_help} (default: %(default)s)",
        )
        p.add_argument("--out", required=True, help="output directory")

    def add_overlay_flags(p):
        p.add_argument(
            "--alpha",
            type=_alpha,
            default=0.5,
            help="overlay opacity in [0, 1] (default: %(default)s)",
        )
        p.add_argument(
            "--global-norm",
            action="store_true",
            help="normalize selected layers on a shared scale",
        )

    p_peek = sub.add_parser("peek", help="write PEEK overlays per layer")
    add_bundle_flags(p_peek, "'all' or comma-separated layer indices")
    add_overlay_flags(p_peek)
    p_peek.add_argument(
        "--negate", action="store_true", help="flip the sign of the map"
    )

    p_eig = sub.add_parser("eigencam", help="write Eigen-CAM overlays per layer")
    add_bundle_flags(p_eig, "'all' or comma-separated layer indices")
    add_overlay_flags(p_eig)

    p_cmp = sub.add_parser(
        "compare", help="write side-by-side PEEK / Eigen-CAM grids per layer"
    )
    add_bundle_flags(p_cmp, "'all' or comma-separated layer indices")
    add_overlay_flags(p_cmp)
    p_cmp.add_argument(
        "--negate", action="store_true", help="flip the sign of the PEEK half"
    )

    p_feat = sub.add_parser("features", help="dump grayscale feature slices")
    add_bundle_flags(p_feat, "'all' or comma-separated layer indices")
    p_feat.add_argument(
        "--slices",
        default="all",
        help="'all' or comma-separated channel indices (default: %(default)s)",
    )

    p_met = sub.add_parser("metrics", help="score detections against ground truth")
    p_met.add_argument("--gt", required=True, help="ground-truth label directory")
    p_met.add_argument("--det", required=True, help="detection file directory")
    p_met.add_argument("--sizes", required=True, help="image-size sidecar JSON")
    p_met.add_argument(
        "--iou",
        default="0.5:0.95",
        help="'0.5:0.95' or comma-separated IoU thresholds (default: %(default)s)",
    )
    p_met.add_argument(
        "--conf",
        type=_alpha,
        default=0.25,
        help="confidence threshold for the P/R operating point (default: %(default)s)",
    )
    p_met.add_argument("--out", required=True, help="report JSON path")
    p_met.add_argument("--figure", help="optional PR-curve figure path")

    p_bench = sub.add_parser("bench", help="time both methods per layer")
    p_bench.add_argument("--bundle", required=True, help="activation bundle directory")
    p_bench.add_argument("--out", required=True, help="output directory")
    p_bench.add_argument(
        "--repeats",
        type=_positive_int("--repeats"),
        default=10,
        help="timed runs per method (default: %(default)s)",
    )
    p_bench.add_argument(
        "--warmup",
        type=_nonnegative_int("--warmup"),
        default=2,
        help="untimed runs before timing (default: %(default)s)",
    )
    p_bench.add_argument(
        "--no-chart", action="store_true", help="skip the SVG runtime chart"
    )
    return parser


_HANDLERS = {
    "peek": _cmd_saliency,
    "eigencam": _cmd_saliency,
    "compare": _cmd_saliency,
    "features": _cmd_features,
    "metrics": _cmd_metrics,
    "bench": _cmd_bench,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except (
        BundleError,
        MetricsError,
        BenchError,
        DecompositionError,
        CliError,
        OSError,
    ) as exc:
        print(f"peekmap: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
