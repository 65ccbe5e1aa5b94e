"""Normalization, colormap, resize, overlay and grid composition."""

import numpy as np
import pytest
from PIL import Image

from peekmap import (
    FeatureStack,
    Method,
    SaliencyMap,
    colormap,
    grid_compare,
    minmax_normalize,
    overlay,
    render_feature_slice,
    resize_bilinear,
    write_png,
)


def map_of(values):
    return SaliencyMap(
        data=np.asarray(values, dtype=np.float32),
        layer_index=0,
        method=Method.PEEK,
    )


class TestMinmaxNormalize:
    def test_affine_example(self):
        result = minmax_normalize(map_of([[0.0, 2.0], [4.0, 8.0]]))
        expected = np.array([[0.0, 0.25], [0.5, 1.0]], dtype=np.float32)
        assert np.array_equal(result.data, expected)

    def test_constant_map_becomes_zeros(self):
        result = minmax_normalize(map_of([[3.0, 3.0], [3.0, 3.0]]))
        assert np.array_equal(result.data, np.zeros((2, 2), dtype=np.float32))

    def test_unit_range_unchanged(self):
        values = [[0.0, 0.5], [0.75, 1.0]]
        result = minmax_normalize(map_of(values))
        assert np.array_equal(result.data, np.asarray(values, dtype=np.float32))

    def test_idempotent(self):
        rng = np.random.default_rng(51)
        saliency = map_of(rng.normal(size=(6, 6)) * 10.0)
        once = minmax_normalize(saliency)
        twice = minmax_normalize(once)
        np.testing.assert_allclose(twice.data, once.data, atol=1e-6)

    def test_explicit_bounds_clip(self):
        result = minmax_normalize(map_of([[-1.0, 0.5], [1.0, 2.0]]), bounds=(0.0, 1.0))
        expected = np.array([[0.0, 0.5], [1.0, 1.0]], dtype=np.float32)
        assert np.array_equal(result.data, expected)


class TestColormap:
    def test_stops(self):
        assert colormap(0.0) == (0, 0, 255)
        assert colormap(0.25) == (0, 255, 255)
        assert colormap(0.5) == (0, 255, 0)
        assert colormap(0.75) == (255, 255, 0)
        assert colormap(1.0) == (255, 0, 0)

    def test_interpolated_point(self):
        # halfway between (0,0,255) and (0,255,255): g = 127.5 rounds up
        assert colormap(0.125) == (0, 128, 255)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            colormap(-0.01)
        with pytest.raises(ValueError):
            colormap(1.01)


class TestResizeBilinear:
    def test_one_pixel_broadcasts(self):
        result = resize_bilinear(map_of([[7.5]]), 3, 4)
        assert np.array_equal(
            result.data, np.full((3, 4), 7.5, dtype=np.float32)
        )

    def test_half_pixel_hand_example(self):
        result = resize_bilinear(map_of([[0.0, 1.0], [0.0, 1.0]]), 2, 4)
        expected = np.array(
            [[0.0, 0.25, 0.75, 1.0], [0.0, 0.25, 0.75, 1.0]],
            dtype=np.float32,
        )
        np.testing.assert_allclose(result.data, expected, atol=1e-7)

    def test_identity_resize(self):
        rng = np.random.default_rng(52)
        saliency = map_of(rng.normal(size=(5, 7)))
        result = resize_bilinear(saliency, 5, 7)
        np.testing.assert_allclose(result.data, saliency.data, atol=1e-6)

    def test_output_within_input_bounds(self):
        rng = np.random.default_rng(53)
        saliency = map_of(rng.normal(size=(4, 4)) * 100.0)
        result = resize_bilinear(saliency, 13, 9)
        assert result.data.min() >= saliency.data.min() - 1e-4
        assert result.data.max() <= saliency.data.max() + 1e-4

    def test_rejects_empty_output(self):
        with pytest.raises(ValueError):
            resize_bilinear(map_of([[1.0]]), 0, 4)


class TestOverlay:
    def test_alpha_zero_is_identity(self):
        rng = np.random.default_rng(54)
        image = rng.integers(0, 256, size=(3, 3, 3), dtype=np.uint8)
        map01 = map_of(rng.random(size=(3, 3)))
        assert np.array_equal(overlay(image, map01, 0.0), image)

    def test_alpha_one_is_pure_colormap(self):
        image = np.zeros((1, 2, 3), dtype=np.uint8)
        map01 = map_of([[0.0, 0.5]])
        result = overlay(image, map01, 1.0)
        assert tuple(result[0, 0]) == (0, 0, 255)
        assert tuple(result[0, 1]) == (0, 255, 0)

    def test_blend_arithmetic_half_up(self):
        image = np.full((1, 1, 3), 100, dtype=np.uint8)
        result = overlay(image, map_of([[0.0]]), 0.5)
        # 0.5*(0,0,255) + 0.5*(100,100,100) = (50, 50, 177.5) -> 178
        assert tuple(result[0, 0]) == (50, 50, 178)

    def test_dimension_mismatch(self):
        image = np.zeros((2, 2, 3), dtype=np.uint8)
        with pytest.raises(ValueError, match="match"):
            overlay(image, map_of([[0.0]]), 0.5)

    def test_alpha_out_of_range(self):
        image = np.zeros((1, 1, 3), dtype=np.uint8)
        with pytest.raises(ValueError, match="alpha"):
            overlay(image, map_of([[0.0]]), 1.5)


class TestRenderFeatureSlice:
    def test_constant_slice_is_black(self):
        stack = FeatureStack(data=np.full((2, 3, 3), 4.0, dtype=np.float32))
        assert np.array_equal(
            render_feature_slice(stack, 0), np.zeros((3, 3, 3), dtype=np.uint8)
        )

    def test_binary_slice_black_and_white(self):
        stack = FeatureStack(
            data=np.array([[[0.0, 1.0]]], dtype=np.float32)
        )
        result = render_feature_slice(stack, 0)
        assert tuple(result[0, 0]) == (0, 0, 0)
        assert tuple(result[0, 1]) == (255, 255, 255)

    def test_index_out_of_range(self):
        stack = FeatureStack(data=np.zeros((2, 2, 2), dtype=np.float32))
        with pytest.raises(IndexError):
            render_feature_slice(stack, 2)


class TestGridCompare:
    def test_two_by_two_layout(self):
        images = [
            np.full((5, 4, 3), v, dtype=np.uint8) for v in (10, 20, 30, 40)
        ]
        grid = grid_compare(images, columns=2)
        assert grid.shape == (2 * 5 + 4, 2 * 4 + 4, 3)
        assert (grid[:5, :4] == 10).all()
        assert (grid[5:9, :] == 0).all()  # gutter row
        assert (grid[9:, 8:] == 40).all()

    def test_single_image_unchanged_dims(self):
        image = np.full((6, 6, 3), 7, dtype=np.uint8)
        grid = grid_compare([image], columns=3)
        assert grid.shape == image.shape
        assert np.array_equal(grid, image)

    def test_mixed_dimensions_rejected(self):
        images = [
            np.zeros((4, 4, 3), dtype=np.uint8),
            np.zeros((4, 5, 3), dtype=np.uint8),
        ]
        with pytest.raises(ValueError, match="dimensions"):
            grid_compare(images, columns=2)

    def test_labels_deterministic(self):
        rng = np.random.default_rng(55)
        images = [
            rng.integers(0, 256, size=(16, 24, 3), dtype=np.uint8)
            for _ in range(2)
        ]
        a = grid_compare(images, columns=2, labels=["left", "right"])
        b = grid_compare(images, columns=2, labels=["left", "right"])
        assert np.array_equal(a, b)

    def test_label_count_must_match(self):
        images = [np.zeros((4, 4, 3), dtype=np.uint8)] * 2
        with pytest.raises(ValueError, match="labels"):
            grid_compare(images, columns=2, labels=["only one"])


class TestWritePng:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(56)
        image = rng.integers(0, 256, size=(8, 9, 3), dtype=np.uint8)
        path = tmp_path / "img.png"
        write_png(image, path)
        with Image.open(path) as im:
            assert im.mode == "RGB"
            loaded = np.asarray(im)
        assert np.array_equal(loaded, image)
