from .expr import (
    FUNCTIONS,
    BinOp,
    Call,
    Expr,
    Neg,
    Num,
    Var,
    eval_array,
    eval_jet,
    eval_scalar,
    free_variables,
    is_zero,
    parse_expr,
    to_source,
)
from .jets import JetScalar, JetVector

__all__ = [
    "FUNCTIONS",
    "BinOp",
    "Call",
    "Expr",
    "Neg",
    "Num",
    "Var",
    "JetScalar",
    "JetVector",
    "eval_array",
    "eval_jet",
    "eval_scalar",
    "free_variables",
    "is_zero",
    "parse_expr",
    "to_source",
]
