"""Model layer: expression trees, model specs, documents and reference models."""

from .builtins import (
    BUILTIN_NAMES,
    DOCUMENTS,
    STOMMEL_SAMPLES,
    builtin,
    linear2_sensitivity,
    riot_closed_form,
)
from .expr import Expr, compile_ld, compile_real, parse_expr, to_sexpr, vector_function
from .model import (
    InputSignal,
    ModelSpec,
    eval_ld,
    eval_real,
    model_to_document,
    parse_model,
    serialize_model,
)

__all__ = [
    "BUILTIN_NAMES",
    "DOCUMENTS",
    "STOMMEL_SAMPLES",
    "Expr",
    "InputSignal",
    "ModelSpec",
    "builtin",
    "compile_ld",
    "compile_real",
    "eval_ld",
    "eval_real",
    "linear2_sensitivity",
    "model_to_document",
    "parse_expr",
    "parse_model",
    "riot_closed_form",
    "serialize_model",
    "to_sexpr",
    "vector_function",
]
