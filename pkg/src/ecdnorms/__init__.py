"""Energy-constrained operator and diamond norms on truncated Hilbert spaces."""

from .enorm import NormResult, enorm, enorm_brute, family_norm, max_linear_objective
from .errors import DomainError, InternalError, InvalidInputError, UnsupportedError
from .operators import DiscreteOperator, energy, make_discrete, operator_family, sqrtg_bound_estimate
from .semigroups import (
    SemigroupSpec,
    commutator_generator,
    exp_semigroup_at,
    gaussian_channel_at,
    gaussian_generator,
    gkls_generator,
    taylor_polynomial,
    unitary_channel_at,
)
from .superop import EcdEstimate, Superoperator, ecd_brute, ecd_lower

__all__ = [
    "DiscreteOperator",
    "DomainError",
    "EcdEstimate",
    "InternalError",
    "InvalidInputError",
    "NormResult",
    "SemigroupSpec",
    "Superoperator",
    "UnsupportedError",
    "commutator_generator",
    "ecd_brute",
    "ecd_lower",
    "energy",
    "enorm",
    "enorm_brute",
    "exp_semigroup_at",
    "family_norm",
    "gaussian_channel_at",
    "gaussian_generator",
    "gkls_generator",
    "make_discrete",
    "max_linear_objective",
    "operator_family",
    "sqrtg_bound_estimate",
    "taylor_polynomial",
    "unitary_channel_at",
]
