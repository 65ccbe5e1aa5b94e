"""Detection scoring: IoU, greedy matching, PR curves, AP and mAP.

Matching is the de facto evaluation standard: detections are visited in
confidence-descending order (ties by input order) and each may claim at
most one unmatched same-class ground truth, the one with the highest IoU,
provided that IoU reaches the threshold. AP integrates the PR curve on
the 101-point grid {0.00, 0.01, ..., 1.00} using the running-max
precision envelope. Classes that never appear in the ground truth are
excluded from class means.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

COCO_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
_RECALL_GRID = np.arange(101) / 100.0


class MetricsError(Exception):
    """Invalid detection/ground-truth data or an undefined metric."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in continuous pixel coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise MetricsError(
                f"degenerate box ({self.x_min}, {self.y_min}, "
                f"{self.x_max}, {self.y_max})"
            )

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class Detection:
    image_id: str
    class_id: int
    confidence: float
    box: Box

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise MetricsError(
                f"confidence {self.confidence} outside [0, 1] "
                f"(image {self.image_id!r})"
            )


@dataclass(frozen=True)
class GroundTruthBox:
    image_id: str
    class_id: int
    box: Box


@dataclass
class PRCurve:
    """One (recall, precision) point per detection, confidence-descending."""

    points: list[tuple[float, float]]
    flags: list[bool]
    n_gt: int


@dataclass
class EvalReport:
    """Per-class APs, threshold mAPs and operating-point counts."""

    iou_thresholds: list[float]
    per_class_ap: dict[int, dict[float, float]]
    map_per_threshold: dict[float, float]
    map_50: float | None
    map_50_95: float | None
    conf_threshold: float
    precision: float
    recall: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "iou_thresholds": list(self.iou_thresholds),
            "per_class_ap": {
                str(cls): {f"{thr:.2f}": ap for thr, ap in by_thr.items()}
                for cls, by_thr in self.per_class_ap.items()
            },
            "map_per_threshold": {
                f"{thr:.2f}": v for thr, v in self.map_per_threshold.items()
            },
            "map_50": self.map_50,
            "map_50_95": self.map_50_95,
            "conf_threshold": self.conf_threshold,
            "precision": self.precision,
            "recall": self.recall,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


def iou(a: Box, b: Box) -> float:
    """Intersection area over union area; 0 for disjoint boxes."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def match_detections(
    dets: list[Detection],
    gts: list[GroundTruthBox],
    iou_threshold: float,
) -> list[bool]:
    """Greedy single-image matching; returns a TP flag per detection.

    Flags are aligned with the input detection order. Each ground truth
    box is claimed at most once.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise MetricsError(f"IoU threshold {iou_threshold} outside (0, 1]")
    image_ids = {d.image_id for d in dets} | {g.image_id for g in gts}
    if len(image_ids) > 1:
        raise MetricsError(
            f"match_detections expects one image, got {sorted(image_ids)}"
        )

    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    flags = [False] * len(dets)
    claimed = [False] * len(gts)
    for i in order:
        det = dets[i]
        best_iou = 0.0
        best_gt = -1
        for j, gt in enumerate(gts):
            if claimed[j] or gt.class_id != det.class_id:
                continue
            overlap = iou(det.box, gt.box)
            if overlap > best_iou:
                best_iou = overlap
                best_gt = j
        if best_gt >= 0 and best_iou >= iou_threshold:
            flags[i] = True
            claimed[best_gt] = True
    return flags


def precision_recall(flags: list[bool], n_gt: int) -> tuple[float, float]:
    """P = TP/(TP+FP), R = TP/n_gt; both 0 when their denominator is 0."""
    if n_gt < 0:
        raise MetricsError("ground-truth count must be >= 0")
    tp = sum(flags)
    precision = tp / len(flags) if flags else 0.0
    recall = tp / n_gt if n_gt > 0 else 0.0
    return precision, recall


def _group_by_image(items):
    groups: dict[str, list] = {}
    for item in items:
        groups.setdefault(item.image_id, []).append(item)
    return groups


def pr_curve(
    dets: list[Detection],
    gts: list[GroundTruthBox],
    class_id: int,
    iou_threshold: float,
) -> PRCurve:
    """Pooled-across-images PR curve for one class."""
    class_dets = [d for d in dets if d.class_id == class_id]
    class_gts = [g for g in gts if g.class_id == class_id]
    gt_groups = _group_by_image(class_gts)

    det_groups: dict[str, list[int]] = {}
    for i, det in enumerate(class_dets):
        det_groups.setdefault(det.image_id, []).append(i)
    flag_of = [False] * len(class_dets)
    for image_id, indices in det_groups.items():
        flags = match_detections(
            [class_dets[i] for i in indices],
            gt_groups.get(image_id, []),
            iou_threshold,
        )
        for i, flag in zip(indices, flags):
            flag_of[i] = flag

    # stable sort keeps pooled ties in input order
    scored = [(det.confidence, flag_of[i]) for i, det in enumerate(class_dets)]
    scored.sort(key=lambda pair: -pair[0])

    n_gt = len(class_gts)
    points: list[tuple[float, float]] = []
    flags_sorted: list[bool] = []
    tp = 0
    for rank, (_, flag) in enumerate(scored, start=1):
        tp += flag
        flags_sorted.append(flag)
        precision = tp / rank
        recall = tp / n_gt if n_gt > 0 else 0.0
        points.append((recall, precision))
    return PRCurve(points=points, flags=flags_sorted, n_gt=n_gt)


def average_precision(curve: PRCurve) -> float:
    """101-point interpolated area under the precision envelope."""
    if not curve.points:
        return 0.0
    recalls = np.array([r for r, _ in curve.points])
    precisions = np.array([p for _, p in curve.points])
    # precision envelope: best precision among points at recall >= r
    envelope = np.maximum.accumulate(precisions[::-1])[::-1]
    # points arrive recall-nondecreasing; first index with recall >= grid r
    idx = np.searchsorted(recalls, _RECALL_GRID, side="left")
    valid = idx < len(recalls)
    sampled = np.where(valid, envelope[np.minimum(idx, len(recalls) - 1)], 0.0)
    return float(sampled.mean())


def _class_ids(gts: list[GroundTruthBox]) -> list[int]:
    return sorted({g.class_id for g in gts})


def mean_ap(
    dets: list[Detection],
    gts: list[GroundTruthBox],
    thresholds: list[float],
    conf_threshold: float = 0.25,
) -> EvalReport:
    """Evaluate detections at each IoU threshold.

    The report also carries precision/recall and TP/FP/FN counts at
    ``conf_threshold``, matched at the lowest IoU threshold given.
    """
    if not thresholds:
        raise MetricsError("at least one IoU threshold is required")
    for thr in thresholds:
        if not 0.0 < thr <= 1.0:
            raise MetricsError(f"IoU threshold {thr} outside (0, 1]")
    if not gts:
        raise MetricsError("mAP is undefined without any ground truth")

    classes = _class_ids(gts)
    per_class_ap: dict[int, dict[float, float]] = {c: {} for c in classes}
    map_per_threshold: dict[float, float] = {}
    for thr in thresholds:
        for cls in classes:
            per_class_ap[cls][thr] = average_precision(
                pr_curve(dets, gts, cls, thr)
            )
        map_per_threshold[thr] = float(
            np.mean([per_class_ap[c][thr] for c in classes])
        )

    def lookup(target: float) -> float | None:
        for thr, value in map_per_threshold.items():
            if abs(thr - target) < 1e-9:
                return value
        return None

    map_50 = lookup(0.5)
    coco = [lookup(t) for t in COCO_THRESHOLDS]
    map_50_95 = float(np.mean(coco)) if all(v is not None for v in coco) else None

    base_thr = min(thresholds)
    confident = [d for d in dets if d.confidence >= conf_threshold]
    tp = 0
    for image_id, image_gts in _group_by_image(gts).items():
        image_dets = [d for d in confident if d.image_id == image_id]
        tp += sum(match_detections(image_dets, image_gts, base_thr))
    fp = len(confident) - tp
    fn = len(gts) - tp
    precision = tp / len(confident) if confident else 0.0
    recall = tp / len(gts)

    return EvalReport(
        iou_thresholds=list(thresholds),
        per_class_ap=per_class_ap,
        map_per_threshold=map_per_threshold,
        map_50=map_50,
        map_50_95=map_50_95,
        conf_threshold=conf_threshold,
        precision=precision,
        recall=recall,
        tp=tp,
        fp=fp,
        fn=fn,
    )


# --- file loaders (YOLO label convention) ---------------------------------


def load_image_sizes(path: str | Path) -> dict[str, tuple[int, int]]:
    """Sidecar JSON mapping image_id -> [height, width]."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MetricsError(f"cannot read image sizes from {path}: {exc}") from exc
    sizes = {}
    for image_id, dims in raw.items():
        if not isinstance(dims, (list, tuple)) or len(dims) != 2:
            raise MetricsError(f"{path.name}: bad size entry for {image_id!r}")
        sizes[str(image_id)] = (int(dims[0]), int(dims[1]))
    return sizes


def _denormalize(
    xc: float, yc: float, bw: float, bh: float, size: tuple[int, int]
) -> Box:
    h, w = size
    return Box(
        x_min=(xc - bw / 2.0) * w,
        y_min=(yc - bh / 2.0) * h,
        x_max=(xc + bw / 2.0) * w,
        y_max=(yc + bh / 2.0) * h,
    )


def _parse_label_file(path: Path, n_fields: int):
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        raise MetricsError(f"cannot read labels from {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != n_fields:
            raise MetricsError(
                f"{path.name}:{lineno}: expected {n_fields} fields, "
                f"got {len(parts)}"
            )
        try:
            yield [float(p) for p in parts]
        except ValueError as exc:
            raise MetricsError(
                f"{path.name}:{lineno}: non-numeric field"
            ) from exc


def _image_size(
    image_id: str, sizes: dict[str, tuple[int, int]], path: Path
) -> tuple[int, int]:
    if image_id not in sizes:
        raise MetricsError(
            f"no image size for {image_id!r} (from {path.name}) in sidecar"
        )
    return sizes[image_id]


def load_ground_truth(
    directory: str | Path, sizes: dict[str, tuple[int, int]]
) -> list[GroundTruthBox]:
    """Read per-image label files: ``class_id x_center y_center w h``."""
    boxes = []
    for path in sorted(Path(directory).glob("*.txt")):
        image_id = path.stem
        size = _image_size(image_id, sizes, path)
        for cls, xc, yc, bw, bh in _parse_label_file(path, 5):
            boxes.append(
                GroundTruthBox(
                    image_id=image_id,
                    class_id=int(cls),
                    box=_denormalize(xc, yc, bw, bh, size),
                )
            )
    return boxes


def load_detections(
    directory: str | Path, sizes: dict[str, tuple[int, int]]
) -> list[Detection]:
    """Read per-image files: ``class_id confidence x_center y_center w h``."""
    dets = []
    for path in sorted(Path(directory).glob("*.txt")):
        image_id = path.stem
        size = _image_size(image_id, sizes, path)
        for cls, conf, xc, yc, bw, bh in _parse_label_file(path, 6):
            dets.append(
                Detection(
                    image_id=image_id,
                    class_id=int(cls),
                    confidence=conf,
                    box=_denormalize(xc, yc, bw, bh, size),
                )
            )
    return dets
