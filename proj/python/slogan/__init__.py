"""Gaussian-mixture-prior GAN with Stein latent optimization.

Thin wrapper over the compiled ``_core`` module: configs and reports are
exchanged as Python dicts, arrays as NumPy arrays.
"""

import json
from typing import Optional, Union

from ._core import (
    ConfigError,
    NumericError,
    ShapeMismatch,
    SloganError,
    ari,
    frechet_distance,
    nmi,
    synthetic_8gauss,
    verify_gradients,
)
from ._core import Model as _Model
from ._core import run_config_schema as _run_config_schema
from ._core import validate_config as _validate_config

__all__ = [
    "ConfigError",
    "Model",
    "NumericError",
    "ShapeMismatch",
    "SloganError",
    "ari",
    "frechet_distance",
    "nmi",
    "run_config_schema",
    "synthetic_8gauss",
    "train",
    "validate_config",
    "verify_gradients",
]

Model = _Model


def _as_text(config: Union[dict, str]) -> str:
    return config if isinstance(config, str) else json.dumps(config)


def run_config_schema() -> dict:
    """The RunConfig JSON schema used by ``slogan train``."""
    return json.loads(_run_config_schema())


def validate_config(config: Union[dict, str]) -> list:
    """Schema violations as ``"pointer: message"`` strings; empty when valid."""
    lines = _validate_config(_as_text(config)).splitlines()
    if lines and lines[0] == "invalid run config:":
        lines = lines[1:]
    return [line.strip() for line in lines if line.strip()]


def train(config: Union[dict, str], steps: Optional[int] = None) -> Model:
    """Trains in memory from a RunConfig; ``steps`` overrides ``train.steps``."""
    return Model.train_config(_as_text(config), steps)


def evaluate(model: Model, x, labels, seed: int = 0, n_gen: int = 2000) -> dict:
    """ARI, NMI, FID, ICFID and pi of ``model`` on labelled data."""
    return json.loads(model.evaluate(x, list(labels), seed, n_gen))


__all__.append("evaluate")
