"""Ionic cell models behind one uniform reaction interface."""

from .base import (
    CellModel,
    CellState,
    RateSplit,
    eval_reaction,
    find_equilibrium,
    jacobian_batch,
    numerical_jacobian,
    rate_split,
)
from .br import BRModel
from .ms import MSModel
from .tnnp import TNNPModel

MODEL_CLASSES = {"ms": MSModel, "br": BRModel, "tnnp": TNNPModel}


def get_model(name: str, **overrides) -> CellModel:
    """Instantiate a model by id with optional parameter overrides."""
    key = name.lower()
    if key not in MODEL_CLASSES:
        raise KeyError(f"unknown model {name!r}; expected one of {sorted(MODEL_CLASSES)}")
    return MODEL_CLASSES[key](**overrides)


__all__ = [
    "CellModel", "CellState", "RateSplit", "BRModel", "MSModel", "TNNPModel",
    "eval_reaction", "rate_split", "numerical_jacobian", "jacobian_batch",
    "find_equilibrium", "get_model", "MODEL_CLASSES",
]
