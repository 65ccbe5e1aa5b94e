"""Per-pixel entropy maps over feature stacks.

Each feature map (depth slice) is first shifted to the nonnegative range
by the absolute value of its own spatial minimum. The map value at
spatial location (i, j) is then the depth-wise sum of x * ln(x) over the
shifted values, with the continuity convention 0 * ln(0) = 0.

Note the shift is literally |min| and is applied even when a slice's
minimum is already positive, in which case the slice minimum doubles
rather than landing at zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .bundle import FeatureStack


class Method(str, enum.Enum):
    """Saliency method tag carried by a SaliencyMap."""

    PEEK = "peek"
    EIGENCAM = "eigencam"


@dataclass(frozen=True)
class SaliencyMap:
    """2-D scalar field over the spatial locations of one layer."""

    data: np.ndarray
    layer_index: int
    method: Method

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ValueError(f"saliency map must be 2-D, got {self.data.ndim}-D")
        if not np.isfinite(self.data).all():
            raise ValueError(
                f"saliency map for layer {self.layer_index} contains "
                "non-finite values"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


def entropy_kernel(x: float) -> float:
    """-x * ln(x) for x >= 0, with the continuity convention g(0) = 0."""
    if x < 0:
        raise ValueError(f"entropy kernel undefined for negative input {x}")
    if x == 0:
        return 0.0
    return -x * math.log(x)


def positivize(stack: FeatureStack) -> FeatureStack:
    """Shift every depth slice by the absolute value of its spatial minimum."""
    data = stack.data
    shift = np.abs(data.min(axis=(1, 2), keepdims=True))
    return FeatureStack(data=data + shift, layer_index=stack.layer_index)


def peek_map(stack: FeatureStack, negate: bool = False) -> SaliencyMap:
    """Depth-wise sum of x * ln(x) over the positivized stack.

    Follows the defining formula literally, so the result is the negative
    of a slice-wise entropy sum; pass ``negate=True`` to view the sign
    flipped. Accumulation runs in float64, storage is float32. Deep
    stacks are processed in fixed-size depth chunks so the float64
    intermediates stay cache-resident; the chunking depends only on the
    spatial shape, keeping results reproducible.
    """
    data = stack.data
    d, l, w = data.shape
    shifts = np.abs(data.min(axis=(1, 2), keepdims=True))
    # ~2 MB of float64 per chunk
    step = max(1, (1 << 21) // (l * w * 8))
    total = np.zeros((l, w), dtype=np.float64)
    for k in range(0, d, step):
        # same float32 shift positivize() applies, then 64-bit math
        pos = (data[k : k + step] + shifts[k : k + step]).astype(np.float64)
        safe = np.where(pos > 0.0, pos, 1.0)
        total += (pos * np.log(safe)).sum(axis=0)
    if negate:
        total = -total
    return SaliencyMap(
        data=total.astype(np.float32),
        layer_index=stack.layer_index,
        method=Method.PEEK,
    )
