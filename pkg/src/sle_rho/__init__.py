"""Numerics for SLE(kappa; rho): CFT weights, Loewner flows, strip observables
and level-2 Verma-module checks."""

from .cft import SleParams, central_charge, kac_weight
from .errors import SleError

__version__ = "0.1.0"

__all__ = ["SleParams", "SleError", "central_charge", "kac_weight", "__version__"]
