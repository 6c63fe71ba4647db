from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, parameter
from ..checkpoint import load_checkpoint, save_checkpoint, validate_shapes
from .config import ModelConfig, Vocab  # noqa: F401
from .nn import expected_shapes, init_params  # noqa: F401
from .pointer import NoCandidates, PointerModel  # noqa: F401
from .recursive import MissingAncestry, RecursiveModel  # noqa: F401
from .vanilla import VanillaModel  # noqa: F401

MODEL_CLASSES = {
    "vanilla": VanillaModel,
    "pointer": PointerModel,
    "recursive": RecursiveModel,
}

AnyModel = VanillaModel | PointerModel | RecursiveModel


def build_model(cfg: ModelConfig, params: dict[str, Tensor] | None = None,
                dtype=np.float32) -> AnyModel:
    return MODEL_CLASSES[cfg.variant](cfg, params=params, dtype=dtype)


def save_model(path, model: AnyModel, extra: dict | None = None) -> None:
    tensors = {name: t.data.astype(np.float32) for name, t in model.params.items()}
    save_checkpoint(path, tensors, config=model.cfg.to_json(), extra=extra)


def load_model(path, dtype=np.float32) -> tuple[AnyModel, dict]:
    """Load and shape-check a checkpoint; returns (model, extra)."""
    tensors, config, extra = load_checkpoint(path)
    cfg = ModelConfig.from_json(config)
    model_tensors = {k: v for k, v in tensors.items() if not k.startswith("opt.")}
    validate_shapes(model_tensors, expected_shapes(cfg))
    params = {name: parameter(arr, dtype=dtype) for name, arr in model_tensors.items()}
    return build_model(cfg, params=params, dtype=dtype), extra
