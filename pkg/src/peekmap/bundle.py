"""Activation bundle I/O: manifest + per-layer tensors + input image.

A bundle is a directory holding ``manifest.json``, ``input.png`` (8-bit RGB)
and one ``layer_XXX.npy`` per captured layer. Tensors are NPY v1.0,
C-order, little-endian float32, channel-first (depth, height, width).
Loaded bundles are immutable and safe to share across threads.
"""

from __future__ import annotations

import ast
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

NPY_MAGIC = b"\x93NUMPY"
MANIFEST_NAME = "manifest.json"
INPUT_IMAGE_NAME = "input.png"
TENSOR_DTYPE = "f32"


class BundleError(Exception):
    """A bundle or tensor file violates the interchange format."""


@dataclass(frozen=True)
class FeatureStack:
    """All feature maps of one layer, shape (depth, height, width), float32."""

    data: np.ndarray
    layer_index: int = 0

    def __post_init__(self):
        if self.data.ndim != 3:
            raise BundleError(
                f"feature stack must be 3-D, got rank {self.data.ndim}"
            )
        if self.data.dtype != np.float32:
            raise BundleError(
                f"feature stack must be float32, got {self.data.dtype}"
            )
        if not np.isfinite(self.data).all():
            raise BundleError(
                f"feature stack for layer {self.layer_index} contains "
                "non-finite values (NaN or Inf)"
            )

    @property
    def shape(self) -> tuple[int, int, int]:
        d, l, w = self.data.shape
        return d, l, w

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureStack):
            return NotImplemented
        return self.layer_index == other.layer_index and np.array_equal(
            self.data, other.data
        )


@dataclass(frozen=True)
class LayerRecord:
    """Manifest entry describing one captured layer."""

    index: int
    name: str
    shape: tuple[int, int, int]
    module_type: str = ""
    # storage detail; save_bundle canonicalizes it, so it carries no identity
    file: str = field(default="", compare=False)

    def __post_init__(self):
        if len(self.shape) != 3 or any(s < 1 for s in self.shape):
            raise BundleError(
                f"layer {self.index} ({self.name!r}): shape {self.shape} "
                "must be three positive integers"
            )


@dataclass
class ActivationBundle:
    """One model run: input image plus per-layer activation stacks.

    ``layers`` and ``stacks`` are parallel lists sorted by layer index.
    """

    model_name: str
    input_image: np.ndarray
    input_size: tuple[int, int]
    layers: list[LayerRecord] = field(default_factory=list)
    stacks: list[FeatureStack] = field(default_factory=list)

    def validate(self) -> None:
        img = self.input_image
        if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
            raise BundleError("input image must be an (h, w, 3) uint8 array")
        if tuple(img.shape[:2]) != tuple(self.input_size):
            raise BundleError(
                f"input_size {tuple(self.input_size)} does not match image "
                f"dimensions {img.shape[:2]}"
            )
        if len(self.layers) != len(self.stacks):
            raise BundleError("layers and stacks lists are out of sync")
        seen: set[int] = set()
        prev = None
        for rec, stack in zip(self.layers, self.stacks):
            if rec.index in seen:
                raise BundleError(f"duplicate layer index {rec.index}")
            seen.add(rec.index)
            if prev is not None and rec.index <= prev:
                raise BundleError(
                    f"layer indices not strictly increasing at {rec.index}"
                )
            prev = rec.index
            if rec.index != stack.layer_index:
                raise BundleError(
                    f"layer {rec.index}: stack carries index {stack.layer_index}"
                )
            if tuple(rec.shape) != stack.data.shape:
                raise BundleError(
                    f"layer {rec.index} ({rec.name!r}): declared shape "
                    f"{tuple(rec.shape)} != tensor shape {stack.data.shape}"
                )

    def layer_indices(self) -> list[int]:
        return [rec.index for rec in self.layers]

    def stack(self, layer_index: int) -> FeatureStack:
        for rec, stk in zip(self.layers, self.stacks):
            if rec.index == layer_index:
                return stk
        raise KeyError(f"layer index {layer_index} not in bundle")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ActivationBundle):
            return NotImplemented
        return (
            self.model_name == other.model_name
            and tuple(self.input_size) == tuple(other.input_size)
            and np.array_equal(self.input_image, other.input_image)
            and self.layers == other.layers
            and self.stacks == other.stacks
        )


def _tensor_file_name(index: int) -> str:
    return f"layer_{index:03d}.npy"


def read_tensor(path: str | Path, layer_index: int = 0) -> FeatureStack:
    """Read one NPY v1.0 float32 3-D tensor file.

    Rejects anything that is not exactly the interchange format: wrong
    magic, any version other than 1.0, Fortran order, wrong rank or dtype.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(6)
        if magic != NPY_MAGIC:
            raise BundleError(f"{path.name}: bad magic bytes {magic!r}")
        version = fh.read(2)
        if version != b"\x01\x00":
            major = version[0] if len(version) > 0 else "?"
            minor = version[1] if len(version) > 1 else "?"
            raise BundleError(
                f"{path.name}: unsupported NPY version {major}.{minor}, "
                "expected 1.0"
            )
        raw_len = fh.read(2)
        if len(raw_len) != 2:
            raise BundleError(f"{path.name}: truncated header length field")
        (header_len,) = struct.unpack("<H", raw_len)
        header_bytes = fh.read(header_len)
        if len(header_bytes) != header_len:
            raise BundleError(f"{path.name}: truncated header")
        try:
            header = ast.literal_eval(header_bytes.decode("latin1").strip())
        except (ValueError, SyntaxError) as exc:
            raise BundleError(f"{path.name}: malformed header dict") from exc
        if not isinstance(header, dict):
            raise BundleError(f"{path.name}: malformed header dict")

        descr = header.get("descr")
        if descr != "<f4":
            raise BundleError(
                f"{path.name}: dtype {descr!r} unsupported, expected "
                "little-endian float32 ('<f4')"
            )
        if header.get("fortran_order"):
            raise BundleError(
                f"{path.name}: fortran_order flag set, tensors must be C-order"
            )
        shape = header.get("shape")
        if not isinstance(shape, tuple) or len(shape) != 3:
            rank = len(shape) if isinstance(shape, tuple) else "?"
            raise BundleError(
                f"{path.name}: tensor rank {rank} unsupported, expected 3-D"
            )
        if any(not isinstance(s, int) or s < 1 for s in shape):
            raise BundleError(f"{path.name}: invalid shape {shape}")

        count = shape[0] * shape[1] * shape[2]
        payload = fh.read(count * 4)
        if len(payload) != count * 4 or fh.read(1):
            raise BundleError(
                f"{path.name}: payload size does not match header shape "
                f"{shape} ({count} floats expected)"
            )
    data = np.frombuffer(payload, dtype="<f4").reshape(shape)
    data.flags.writeable = False
    return FeatureStack(data=data, layer_index=layer_index)


def write_tensor(path: str | Path, stack: FeatureStack) -> None:
    """Write a FeatureStack as NPY v1.0 (C-order, little-endian float32)."""
    data = np.ascontiguousarray(stack.data, dtype="<f4")
    header = (
        "{'descr': '<f4', 'fortran_order': False, "
        f"'shape': {tuple(int(s) for s in data.shape)}, }}"
    )
    # pad so magic+version+len+header is a multiple of 64, newline-terminated
    base = len(NPY_MAGIC) + 2 + 2
    pad = 64 - (base + len(header) + 1) % 64
    header = header + " " * (pad % 64) + "\n"
    with open(path, "wb") as fh:
        fh.write(NPY_MAGIC)
        fh.write(b"\x01\x00")
        fh.write(struct.pack("<H", len(header)))
        fh.write(header.encode("latin1"))
        fh.write(data.tobytes())


def load_bundle(path: str | Path) -> ActivationBundle:
    """Load and validate a bundle directory.

    Layer entries may appear in any order in the manifest; the returned
    bundle is always sorted by layer index. Unknown manifest keys are
    ignored.
    """
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise BundleError(f"missing {MANIFEST_NAME} in {root}")
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise BundleError(f"{MANIFEST_NAME}: invalid JSON ({exc})") from exc

    version = manifest.get("version")
    if version != 1:
        raise BundleError(f"{MANIFEST_NAME}: unsupported version {version!r}")
    for key in ("model_name", "input_image", "input_size", "layers"):
        if key not in manifest:
            raise BundleError(f"{MANIFEST_NAME}: missing field {key!r}")

    image_path = root / manifest["input_image"]
    if not image_path.is_file():
        raise BundleError(f"missing input image {manifest['input_image']!r}")
    with Image.open(image_path) as im:
        image = np.asarray(im.convert("RGB"), dtype=np.uint8)
    image.flags.writeable = False

    input_size = manifest["input_size"]
    if (
        not isinstance(input_size, (list, tuple))
        or len(input_size) != 2
        or tuple(input_size) != image.shape[:2]
    ):
        raise BundleError(
            f"{MANIFEST_NAME}: input_size {input_size} does not match image "
            f"dimensions {image.shape[:2]}"
        )

    entries = sorted(manifest["layers"], key=lambda e: e.get("index", -1))
    layers: list[LayerRecord] = []
    stacks: list[FeatureStack] = []
    for entry in entries:
        for key in ("index", "name", "file", "shape", "dtype"):
            if key not in entry:
                raise BundleError(
                    f"{MANIFEST_NAME}: layer entry missing field {key!r}"
                )
        if entry["dtype"] != TENSOR_DTYPE:
            raise BundleError(
                f"layer {entry['index']}: dtype {entry['dtype']!r} "
                f"unsupported, expected {TENSOR_DTYPE!r}"
            )
        tensor_path = root / entry["file"]
        if (
            not tensor_path.is_file()
            or root.resolve() not in tensor_path.resolve().parents
        ):
            raise BundleError(
                f"layer {entry['index']}: tensor file {entry['file']!r} "
                "not found inside bundle directory"
            )
        record = LayerRecord(
            index=int(entry["index"]),
            name=str(entry["name"]),
            shape=tuple(int(s) for s in entry["shape"]),
            module_type=str(entry.get("module_type", "")),
            file=str(entry["file"]),
        )
        stack = read_tensor(tensor_path, layer_index=record.index)
        if stack.data.shape != record.shape:
            raise BundleError(
                f"layer {record.index} ({record.name!r}): manifest shape "
                f"{record.shape} != tensor shape {stack.data.shape} "
                f"in {record.file!r}"
            )
        layers.append(record)
        stacks.append(stack)

    bundle = ActivationBundle(
        model_name=str(manifest["model_name"]),
        input_image=image,
        input_size=tuple(image.shape[:2]),
        layers=layers,
        stacks=stacks,
    )
    bundle.validate()
    return bundle


def save_bundle(bundle: ActivationBundle, path: str | Path) -> None:
    """Write a bundle directory; round-trips bit-exactly through load_bundle.

    Tensor filenames are canonicalized to ``layer_XXX.npy`` regardless of
    any ``file`` value already present on the records.
    """
    bundle.validate()
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise BundleError(f"cannot create bundle directory {root}: {exc}") from exc

    entries = []
    try:
        for rec, stack in zip(bundle.layers, bundle.stacks):
            fname = _tensor_file_name(rec.index)
            write_tensor(root / fname, stack)
            entries.append(
                {
                    "index": rec.index,
                    "name": rec.name,
                    "file": fname,
                    "shape": list(rec.shape),
                    "dtype": TENSOR_DTYPE,
                    "module_type": rec.module_type,
                }
            )
        Image.fromarray(bundle.input_image, "RGB").save(
            root / INPUT_IMAGE_NAME, format="PNG"
        )
        manifest = {
            "version": 1,
            "model_name": bundle.model_name,
            "input_image": INPUT_IMAGE_NAME,
            "input_size": list(bundle.input_size),
            "layers": entries,
        }
        (root / MANIFEST_NAME).write_text(
            json.dumps(manifest, indent=2) + "\n", "utf-8"
        )
    except OSError as exc:
        raise BundleError(f"cannot write bundle to {root}: {exc}") from exc
