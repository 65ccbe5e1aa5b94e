"""Export per-layer detector activations to the bundle directory format."""

from .export import (
    ExportError,
    ExportPlan,
    LayerDescriptor,
    export_activations,
    list_layers,
    load_model,
)

__all__ = [
    "ExportError",
    "ExportPlan",
    "LayerDescriptor",
    "export_activations",
    "list_layers",
    "load_model",
]

__version__ = "0.1.0"
