"""Performative policy gradient toolkit (C++ core)."""

from ._core import (
    ExpFamilyEnv,
    exact_value,
    exact_gradient,
    induce,
    softmax,
    run_spec,
    verify,
    loan_equilibrium,
    loan_optima,
    csv_header,
)

__all__ = [
    "ExpFamilyEnv",
    "exact_value",
    "exact_gradient",
    "induce",
    "softmax",
    "run_spec",
    "verify",
    "loan_equilibrium",
    "loan_optima",
    "csv_header",
]
