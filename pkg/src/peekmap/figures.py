"""Matplotlib figures accompanying the delimited outputs.

SVG output is made reproducible: element ids are salted with a fixed
string and the creation date is stripped, so identical inputs yield
byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import BenchRecord
from .metrics import PRCurve
from .peek import Method

_SVG_RC = {"svg.hashsalt": "peekmap"}


def _save(fig, path: Path) -> None:
    kwargs = {}
    if path.suffix.lower() == ".svg":
        kwargs["metadata"] = {"Date": None}
    fig.savefig(path, **kwargs)
    plt.close(fig)


def runtime_chart(records: list[BenchRecord], path: str | Path) -> None:
    """Grouped bar chart of per-layer mean runtimes, log ms scale."""
    path = Path(path)
    by_method: dict[Method, dict[int, BenchRecord]] = {
        Method.PEEK: {},
        Method.EIGENCAM: {},
    }
    for rec in records:
        by_method[rec.method][rec.layer_index] = rec
    layers = sorted(by_method[Method.PEEK] | by_method[Method.EIGENCAM])

    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(max(6.0, 0.45 * len(layers) + 2), 4.0))
        x = np.arange(len(layers), dtype=np.float64)
        width = 0.4
        for offset, (method, label) in (
            (-width / 2, (Method.PEEK, "PEEK")),
            (width / 2, (Method.EIGENCAM, "Eigen-CAM")),
        ):
            means = [
                by_method[method][idx].mean_ns / 1e6
                for idx in layers
                if idx in by_method[method]
            ]
            stds = [
                by_method[method][idx].std_ns / 1e6
                for idx in layers
                if idx in by_method[method]
            ]
            xs = [
                x[i] + offset
                for i, idx in enumerate(layers)
                if idx in by_method[method]
            ]
            ax.bar(xs, means, width, yerr=stds, label=label, capsize=2)
        if layers:
            ax.set_yscale("log")
        ax.set_xticks(x)
        ax.set_xticklabels([str(idx) for idx in layers])
        ax.set_xlabel("layer index")
        ax.set_ylabel("mean runtime (ms)")
        ax.set_title("PEEK vs. Eigen-CAM runtime per layer")
        ax.legend()
        fig.tight_layout()
        _save(fig, path)


def pr_figure(curves: dict[int, PRCurve], path: str | Path) -> None:
    """Precision-recall curve per class on a single pair of axes."""
    path = Path(path)
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(5.0, 5.0))
        for class_id in sorted(curves):
            curve = curves[class_id]
            if curve.points:
                recalls = [r for r, _ in curve.points]
                precisions = [p for _, p in curve.points]
            else:
                recalls, precisions = [], []
            ax.plot(
                recalls, precisions, marker=".", label=f"class {class_id}"
            )
        ax.set_xlim(0.0, 1.0)
        ax.set_ylim(0.0, 1.05)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_title("precision-recall")
        if curves:
            ax.legend()
        fig.tight_layout()
        _save(fig, path)
