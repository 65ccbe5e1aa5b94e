"""Runtime comparison of the two saliency methods.

Timing covers the map computation only: bundle I/O, normalization and
rendering stay outside the timed region. Each timed run's output is
checksummed, which both stops a clever runtime from skipping the work
and doubles as a determinism check across repeats. Timed sections are
pinned to one BLAS thread so measurements stay comparable on loaded
machines.
"""

from __future__ import annotations

import csv
import hashlib
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .bundle import ActivationBundle, FeatureStack
from .eigencam import eigencam_map
from .peek import Method, peek_map


class BenchError(Exception):
    """Benchmark precondition violated or a timed method failed."""


CSV_COLUMNS = (
    "layer_index",
    "layer_name",
    "d",
    "l",
    "w",
    "method",
    "repeats",
    "mean_ns",
    "std_ns",
    "speedup",
)


@dataclass(frozen=True)
class BenchRecord:
    layer_index: int
    layer_name: str
    shape: tuple[int, int, int]
    method: Method
    repeats: int
    mean_ns: float
    std_ns: float
    # eigencam mean / peek mean; only PEEK rows carry it
    speedup_vs_other: float | None = None

    def __post_init__(self):
        if self.repeats < 1:
            raise BenchError(f"repeats must be >= 1, got {self.repeats}")
        if not self.mean_ns > 0:
            raise BenchError(f"mean_ns must be positive, got {self.mean_ns}")


_RUNNERS = {
    Method.PEEK: peek_map,
    Method.EIGENCAM: eigencam_map,
}


def time_method(
    method: Method,
    stack: FeatureStack,
    repeats: int = 10,
    warmup: int = 2,
    layer_name: str = "",
) -> BenchRecord:
    """Time one method on one stack over ``repeats`` runs."""
    if repeats < 1:
        raise BenchError(f"repeats must be >= 1, got {repeats}")
    if warmup < 0:
        raise BenchError(f"warmup must be >= 0, got {warmup}")
    run = _RUNNERS[Method(method)]

    durations = np.empty(repeats, dtype=np.float64)
    checksums = set()
    try:
        with threadpool_limits(limits=1):
            for _ in range(warmup):
                run(stack)
            for i in range(repeats):
                start = time.perf_counter_ns()
                result = run(stack)
                durations[i] = time.perf_counter_ns() - start
                checksums.add(hashlib.sha256(result.data.tobytes()).hexdigest())
    except BenchError:
        raise
    except Exception as exc:
        raise BenchError(
            f"{Method(method).value} failed on layer "
            f"{stack.layer_index}: {exc}"
        ) from exc

    if len(checksums) != 1:
        raise BenchError(
            f"{Method(method).value} was not deterministic on layer "
            f"{stack.layer_index}: {len(checksums)} distinct outputs"
        )
    return BenchRecord(
        layer_index=stack.layer_index,
        layer_name=layer_name,
        shape=stack.shape,
        method=Method(method),
        repeats=repeats,
        mean_ns=float(durations.mean()),
        std_ns=float(durations.std()),
    )


def run_benchmark(
    bundle: ActivationBundle, repeats: int = 10, warmup: int = 2
) -> list[BenchRecord]:
    """Two records per layer, ordered by layer index then method name."""
    records = []
    for record, stack in zip(bundle.layers, bundle.stacks):
        eig = time_method(
            Method.EIGENCAM, stack, repeats, warmup, layer_name=record.name
        )
        peek = time_method(
            Method.PEEK, stack, repeats, warmup, layer_name=record.name
        )
        peek = BenchRecord(
            layer_index=peek.layer_index,
            layer_name=peek.layer_name,
            shape=peek.shape,
            method=peek.method,
            repeats=peek.repeats,
            mean_ns=peek.mean_ns,
            std_ns=peek.std_ns,
            speedup_vs_other=eig.mean_ns / peek.mean_ns,
        )
        records.extend([eig, peek])
    records.sort(key=lambda r: (r.layer_index, r.method.value))
    return records


def write_csv(records: list[BenchRecord], path: str | Path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for rec in records:
                d, l, w = rec.shape
                speedup = (
                    f"{rec.speedup_vs_other:.3f}"
                    if rec.speedup_vs_other is not None
                    else ""
                )
                writer.writerow(
                    [
                        rec.layer_index,
                        rec.layer_name,
                        d,
                        l,
                        w,
                        rec.method.value,
                        rec.repeats,
                        f"{rec.mean_ns:.1f}",
                        f"{rec.std_ns:.1f}",
                        speedup,
                    ]
                )
    except OSError as exc:
        raise BenchError(f"cannot write CSV to {path}: {exc}") from exc
