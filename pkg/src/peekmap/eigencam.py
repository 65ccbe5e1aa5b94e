"""Eigen-CAM baseline: projection onto the first principal direction.

The stack is flattened to an (l*w) x d matrix M with one row per spatial
location and one column per channel, without mean-centering. The saliency
map is M projected onto the right singular vector belonging to the
largest singular value. Sign is canonicalized so the projection sums to a
nonnegative value; no rectification is applied.
"""

from __future__ import annotations

import numpy as np

from .bundle import FeatureStack
from .peek import Method, SaliencyMap


class DecompositionError(Exception):
    """The singular value decomposition failed to converge."""


def _activation_matrix(stack: FeatureStack) -> np.ndarray:
    d = stack.data.shape[0]
    # (l*w) x d, row-major over spatial locations
    return stack.data.reshape(d, -1).T.astype(np.float64)


def first_principal_direction(stack: FeatureStack) -> np.ndarray:
    """Unit right singular vector of the activation matrix, length d.

    A zero stack has no principal direction; the first standard basis
    vector is returned by convention (the projection is zero either way).
    """
    d = stack.data.shape[0]
    matrix = _activation_matrix(stack)
    if not matrix.any():
        direction = np.zeros(d)
        direction[0] = 1.0
        return direction
    try:
        _, _, vt = np.linalg.svd(matrix, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(
            f"SVD did not converge for layer {stack.layer_index}"
        ) from exc
    direction = vt[0]
    if (matrix @ direction).sum() < 0.0:
        direction = -direction
    return direction


def eigencam_map(stack: FeatureStack) -> SaliencyMap:
    """Project every spatial location onto the first principal direction."""
    _, l, w = stack.data.shape
    direction = first_principal_direction(stack)
    projection = _activation_matrix(stack) @ direction
    return SaliencyMap(
        data=projection.reshape(l, w).astype(np.float32),
        layer_index=stack.layer_index,
        method=Method.EIGENCAM,
    )
