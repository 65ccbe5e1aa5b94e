"""Saliency maps for CNN detector activations, plus evaluation tools.

The core measure scores each spatial location of a convolutional feature
stack by an entropy-style sum over its depth column, after shifting each
feature map to be non-negative. A singular-vector projection baseline,
a renderer, detection metrics and a benchmark harness round out the
package; the ``peekmap`` command drives them from bundle directories.
"""

from .bench import BenchError, BenchRecord, run_benchmark, time_method, write_csv
from .bundle import (
    ActivationBundle,
    BundleError,
    FeatureStack,
    LayerRecord,
    load_bundle,
    read_tensor,
    save_bundle,
    write_tensor,
)
from .eigencam import DecompositionError, eigencam_map, first_principal_direction
from .figures import pr_figure, runtime_chart
from .metrics import (
    Box,
    COCO_THRESHOLDS,
    Detection,
    EvalReport,
    GroundTruthBox,
    MetricsError,
    PRCurve,
    average_precision,
    iou,
    load_detections,
    load_ground_truth,
    load_image_sizes,
    match_detections,
    mean_ap,
    pr_curve,
    precision_recall,
)
from .peek import Method, SaliencyMap, entropy_kernel, peek_map, positivize
from .render import (
    colormap,
    grid_compare,
    minmax_normalize,
    overlay,
    render_feature_slice,
    resize_bilinear,
    write_png,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationBundle",
    "BenchError",
    "BenchRecord",
    "Box",
    "BundleError",
    "COCO_THRESHOLDS",
    "DecompositionError",
    "Detection",
    "EvalReport",
    "FeatureStack",
    "GroundTruthBox",
    "LayerRecord",
    "Method",
    "MetricsError",
    "PRCurve",
    "SaliencyMap",
    "average_precision",
    "colormap",
    "eigencam_map",
    "entropy_kernel",
    "first_principal_direction",
    "grid_compare",
    "iou",
    "load_bundle",
    "load_detections",
    "load_ground_truth",
    "load_image_sizes",
    "match_detections",
    "mean_ap",
    "minmax_normalize",
    "overlay",
    "peek_map",
    "positivize",
    "pr_curve",
    "pr_figure",
    "precision_recall",
    "read_tensor",
    "render_feature_slice",
    "resize_bilinear",
    "run_benchmark",
    "runtime_chart",
    "save_bundle",
    "time_method",
    "write_csv",
    "write_png",
    "write_tensor",
]
