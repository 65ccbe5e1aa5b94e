"""Capture per-module activations from a detector and write a bundle.

The bundle directory (manifest.json + input.png + layer_XXX.npy) is the
interchange format the analysis package reads; this module produces it
without importing that package. One image, one forward pass, inference
mode with deterministic algorithms enforced: exporting the same image
twice yields byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

MANIFEST_VERSION = 1


class ExportError(Exception):
    """Model loading, capture, or bundle writing failed."""


@dataclass(frozen=True)
class LayerDescriptor:
    index: int
    name: str
    module_type: str


@dataclass
class ExportPlan:
    weights: Path
    image: Path
    out: Path
    # None selects every top-level module
    layers: list[int] | None = None

    def __post_init__(self):
        self.weights = Path(self.weights)
        self.image = Path(self.image)
        self.out = Path(self.out)


def load_model(weights: str | Path) -> torch.nn.Module:
    """Load a checkpoint: either a pickled module or a dict holding one.

    Detector checkpoints commonly store ``{"model": module, ...}``; both
    that layout and a bare module are accepted.
    """
    weights = Path(weights)
    if not weights.is_file():
        raise ExportError(f"weights file {weights} does not exist")
    try:
        payload = torch.load(weights, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise ExportError(f"cannot load weights from {weights}: {exc}") from exc
    if isinstance(payload, dict):
        payload = payload.get("model")
    if not isinstance(payload, torch.nn.Module):
        raise ExportError(
            f"{weights} does not contain a torch module "
            "(expected a module or a dict with a 'model' entry)"
        )
    return payload.float().eval()


def _module_sequence(model: torch.nn.Module) -> list[tuple[str, torch.nn.Module]]:
    # unwrap single-child containers (DetectionModel -> Sequential et al.)
    current = model
    while True:
        children = list(current.named_children())
        if len(children) == 1 and list(children[0][1].children()):
            current = children[0][1]
            continue
        return children if children else [("0", current)]


def list_layers(model: torch.nn.Module) -> list[LayerDescriptor]:
    """Top-level modules in forward order: (index, name, module_type)."""
    return [
        LayerDescriptor(index=i, name=name, module_type=type(module).__name__)
        for i, (name, module) in enumerate(_module_sequence(model))
    ]


def _load_image(path: Path) -> tuple[np.ndarray, torch.Tensor]:
    with Image.open(path) as im:
        rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    tensor = torch.from_numpy(rgb.astype(np.float32) / 255.0)
    return rgb, tensor.permute(2, 0, 1).unsqueeze(0)


def _primary_output(raw) -> torch.Tensor | None:
    if isinstance(raw, (tuple, list)) and raw:
        raw = raw[0]
    return raw if isinstance(raw, torch.Tensor) else None


def export_activations(plan: ExportPlan) -> Path:
    """Run one forward pass with capture hooks and write the bundle.

    Modules whose output is not a single-image 3-D feature stack are
    skipped and listed in the manifest under "skipped".
    """
    if not plan.image.is_file():
        raise ExportError(f"image file {plan.image} does not exist")
    model = load_model(plan.weights)
    modules = _module_sequence(model)

    if plan.layers is None:
        selected = list(range(len(modules)))
    else:
        for index in plan.layers:
            if not 0 <= index < len(modules):
                raise ExportError(
                    f"layer index {index} out of range "
                    f"(model has {len(modules)} top-level modules)"
                )
        selected = sorted(set(plan.layers))

    rgb, batch = _load_image(plan.image)
    captured: dict[int, torch.Tensor | None] = {}
    hooks = []
    for index in selected:
        module = modules[index][1]

        def grab(_module, _inputs, output, index=index):
            captured[index] = _primary_output(output)

        hooks.append(module.register_forward_hook(grab))

    previous = torch.are_deterministic_algorithms_enabled()
    try:
        torch.use_deterministic_algorithms(True)
        with torch.inference_mode():
            model(batch)
    except RuntimeError as exc:
        raise ExportError(f"forward pass failed: {exc}") from exc
    finally:
        torch.use_deterministic_algorithms(previous)
        for hook in hooks:
            hook.remove()

    try:
        plan.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create output directory {plan.out}: {exc}") from exc

    entries = []
    skipped = []
    for index in selected:
        name, module = modules[index]
        tensor = captured.get(index)
        if tensor is None or tensor.ndim != 4 or tensor.shape[0] != 1:
            got = "no tensor" if tensor is None else f"shape {tuple(tensor.shape)}"
            skipped.append(
                {
                    "index": index,
                    "name": name,
                    "reason": f"output is not a single-image feature stack ({got})",
                }
            )
            continue
        stack = np.ascontiguousarray(
            tensor.squeeze(0).detach().cpu().numpy(), dtype=np.float32
        )
        if not np.isfinite(stack).all():
            raise ExportError(f"module {index} ({name!r}) produced non-finite values")
        file_name = f"layer_{index:03d}.npy"
        np.save(plan.out / file_name, stack)
        entries.append(
            {
                "index": index,
                "name": name,
                "file": file_name,
                "shape": [int(s) for s in stack.shape],
                "dtype": "f32",
                "module_type": type(module).__name__,
            }
        )

    Image.fromarray(rgb, "RGB").save(plan.out / "input.png", format="PNG")
    manifest = {
        "version": MANIFEST_VERSION,
        "model_name": plan.weights.stem,
        "input_image": "input.png",
        "input_size": [int(rgb.shape[0]), int(rgb.shape[1])],
        "layers": entries,
        "skipped": skipped,
    }
    (plan.out / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    return plan.out
