"""Entropy production of a bosonic mode coupled to squeezed thermal baths."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConditioningError,
    DegeneracyError,
    EntrofluxError,
    InputError,
    IntegrationError,
    PhysicalityError,
    RecurrenceError,
    SemanticsError,
    TruncationError,
)
from .gaussian import BathSpec, GaussianState, gaussian_entropy, mutual_information  # noqa: E402
from .moments import Moments, chi_alpha, evolve_moments, heat_current, spohn_rate_gaussian, thermal_epr  # noqa: E402

__all__ = [
    "BathSpec",
    "ConditioningError",
    "DegeneracyError",
    "EntrofluxError",
    "GaussianState",
    "InputError",
    "IntegrationError",
    "Moments",
    "PhysicalityError",
    "RecurrenceError",
    "SemanticsError",
    "TruncationError",
    "chi_alpha",
    "evolve_moments",
    "gaussian_entropy",
    "heat_current",
    "mutual_information",
    "spohn_rate_gaussian",
    "thermal_epr",
]
