"""Numerical substrate: autodiff, integration, linear algebra, seeded RNG."""
from .autodiff import (Dual, NonFiniteError, Var, backward, central_difference,
                       directional_derivative, grad, value_and_grad)
from .numerics import (ConditioningError, DivergenceError, least_squares,
                       median_pairwise_sq_distance, pairwise_sq_distances,
                       rk4_integrate, rk4_step)
from .rng import Rng

__all__ = [
    "ConditioningError", "DivergenceError", "Dual", "NonFiniteError", "Rng",
    "Var", "backward", "central_difference", "directional_derivative", "grad",
    "least_squares", "median_pairwise_sq_distance", "pairwise_sq_distances",
    "rk4_integrate", "rk4_step", "value_and_grad",
]
