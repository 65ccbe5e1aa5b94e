"""Heatmap overlays and comparison grids for saliency maps.

All byte outputs round half-up so renders are bit-reproducible. RGB
images are (h, w, 3) uint8 arrays; PNGs are written 8-bit RGB without
interlacing.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .bundle import FeatureStack
from .peek import SaliencyMap

RGBImage = np.ndarray

GUTTER_PX = 4

# piecewise-linear colormap stops: blue -> cyan -> green -> yellow -> red
_STOP_T = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
_STOP_R = np.array([0.0, 0.0, 0.0, 255.0, 255.0])
_STOP_G = np.array([0.0, 255.0, 255.0, 255.0, 0.0])
_STOP_B = np.array([255.0, 255.0, 0.0, 0.0, 0.0])


def _round_half_up_bytes(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5).astype(np.uint8)


def _check_image(image: RGBImage) -> None:
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValueError("image must be an (h, w, 3) uint8 array")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise ValueError("image dimensions must be >= 1")


def _normalize_array(values: np.ndarray) -> np.ndarray:
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return np.zeros_like(values, dtype=np.float32)
    out = (values.astype(np.float64) - lo) / (hi - lo)
    return out.astype(np.float32)


def minmax_normalize(
    saliency: SaliencyMap, bounds: tuple[float, float] | None = None
) -> SaliencyMap:
    """Affinely map values into [0, 1]; a constant map becomes all zeros.

    ``bounds`` overrides the map's own (min, max), for normalizing several
    layers on a shared scale. Values outside the bounds are clipped.
    """
    if bounds is None:
        data = _normalize_array(saliency.data)
    else:
        lo, hi = bounds
        if hi == lo:
            data = np.zeros_like(saliency.data, dtype=np.float32)
        else:
            scaled = (saliency.data.astype(np.float64) - lo) / (hi - lo)
            data = np.clip(scaled, 0.0, 1.0).astype(np.float32)
    return SaliencyMap(
        data=data, layer_index=saliency.layer_index, method=saliency.method
    )


def _colormap_array(t: np.ndarray) -> np.ndarray:
    if t.min() < 0.0 or t.max() > 1.0:
        raise ValueError("colormap input must lie in [0, 1]")
    channels = [
        _round_half_up_bytes(np.interp(t, _STOP_T, stop))
        for stop in (_STOP_R, _STOP_G, _STOP_B)
    ]
    return np.stack(channels, axis=-1)


def colormap(t: float) -> tuple[int, int, int]:
    """Map t in [0, 1] to an (r, g, b) byte triple."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"colormap input {t} outside [0, 1]")
    rgb = _colormap_array(np.array([t]))[0]
    return int(rgb[0]), int(rgb[1]), int(rgb[2])


def resize_bilinear(saliency: SaliencyMap, out_h: int, out_w: int) -> SaliencyMap:
    """Bilinear resize with half-pixel centers, clamped at the borders."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be >= 1")
    src = saliency.data.astype(np.float64)
    in_h, in_w = src.shape

    def axis_coords(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        scale = n_in / n_out
        coords = (np.arange(n_out) + 0.5) * scale - 0.5
        coords = np.clip(coords, 0.0, n_in - 1)
        low = np.floor(coords).astype(np.intp)
        frac = coords - low
        high = np.minimum(low + 1, n_in - 1)
        return low, high, frac

    y0, y1, fy = axis_coords(out_h, in_h)
    x0, x1, fx = axis_coords(out_w, in_w)
    fy = fy[:, None]
    fx = fx[None, :]
    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bottom = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    out = top * (1 - fy) + bottom * fy
    return SaliencyMap(
        data=out.astype(np.float32),
        layer_index=saliency.layer_index,
        method=saliency.method,
    )


def overlay(image: RGBImage, map01: SaliencyMap, alpha: float) -> RGBImage:
    """Blend a colormapped [0, 1] saliency map onto an image.

    out = round(alpha * colormap(map01) + (1 - alpha) * image), half-up.
    """
    _check_image(image)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha {alpha} outside [0, 1]")
    if map01.data.shape != image.shape[:2]:
        raise ValueError(
            f"saliency map shape {map01.data.shape} does not match image "
            f"dimensions {image.shape[:2]}"
        )
    heat = _colormap_array(map01.data).astype(np.float64)
    blend = alpha * heat + (1.0 - alpha) * image.astype(np.float64)
    return _round_half_up_bytes(blend)


def render_feature_slice(stack: FeatureStack, k: int) -> RGBImage:
    """Grayscale rendering of min-max-normalized feature map k."""
    d = stack.data.shape[0]
    if not 0 <= k < d:
        raise IndexError(f"channel {k} out of range for depth {d}")
    gray = _round_half_up_bytes(_normalize_array(stack.data[k]) * 255.0)
    return np.repeat(gray[:, :, None], 3, axis=2)


def grid_compare(
    images: list[RGBImage],
    columns: int,
    labels: list[str] | None = None,
) -> RGBImage:
    """Tile images row-major with 4-px black gutters; optional tile labels."""
    if not images:
        raise ValueError("no images to tile")
    if columns < 1:
        raise ValueError("columns must be >= 1")
    for img in images:
        _check_image(img)
    h, w = images[0].shape[:2]
    if any(img.shape != images[0].shape for img in images):
        raise ValueError("grid images must all share the same dimensions")
    if labels is not None and len(labels) != len(images):
        raise ValueError("labels length must match image count")

    cols = min(columns, len(images))
    rows = (len(images) + cols - 1) // cols
    canvas = np.zeros(
        (rows * h + (rows - 1) * GUTTER_PX, cols * w + (cols - 1) * GUTTER_PX, 3),
        dtype=np.uint8,
    )
    for idx, img in enumerate(images):
        r, c = divmod(idx, cols)
        y = r * (h + GUTTER_PX)
        x = c * (w + GUTTER_PX)
        canvas[y : y + h, x : x + w] = img

    if labels:
        try:
            font = ImageFont.load_default()
        except OSError:
            return canvas  # no font support: deterministic unlabeled grid
        pil = Image.fromarray(canvas, "RGB")
        draw = ImageDraw.Draw(pil)
        for idx, label in enumerate(labels):
            r, c = divmod(idx, cols)
            x = c * (w + GUTTER_PX) + 2
            y = r * (h + GUTTER_PX) + 1
            draw.text((x, y), label, fill=(255, 255, 255), font=font)
        canvas = np.asarray(pil, dtype=np.uint8)
    return canvas


def write_png(image: RGBImage, path: str | Path) -> None:
    _check_image(image)
    Image.fromarray(image, "RGB").save(Path(path), format="PNG")
