from __future__ import annotations

import numpy as np
import pytest

from peekmap import ActivationBundle, FeatureStack, LayerRecord, save_bundle

_ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_log():
    def record(line: str) -> None:
        _ACCEPTANCE_LINES.append(line)

    return record


def random_stack(rng, d, l, w, layer_index=0, scale=1.0) -> FeatureStack:
    data = (rng.normal(size=(d, l, w)) * scale).astype(np.float32)
    return FeatureStack(data=data, layer_index=layer_index)


def build_bundle(rng, shapes, model_name="fixture") -> ActivationBundle:
    layers, stacks = [], []
    for index, (d, l, w) in enumerate(shapes):
        layers.append(
            LayerRecord(
                index=index,
                name=f"model.{index}",
                shape=(d, l, w),
                module_type="Conv",
                file=f"layer_{index:03d}.npy",
            )
        )
        stacks.append(random_stack(rng, d, l, w, layer_index=index))
    image = rng.integers(0, 256, size=(48, 48, 3), dtype=np.uint8)
    return ActivationBundle(
        model_name=model_name,
        input_image=image,
        input_size=(48, 48),
        layers=layers,
        stacks=stacks,
    )


@pytest.fixture
def fixture_bundle():
    rng = np.random.default_rng(2024)
    return build_bundle(rng, [(6, 12, 12), (12, 6, 6), (4, 3, 3)])


@pytest.fixture
def bundle_dir(tmp_path, fixture_bundle):
    path = tmp_path / "bundle"
    save_bundle(fixture_bundle, path)
    return path
