"""Mirror-mediated cooling: analytic formulas and a multimode SDE simulator."""

from .core import (
    DerivedParams,
    ParameterError,
    PhysicalParams,
    SIReference,
    derive,
    make_params,
    temperature_from_si,
    temperature_to_si,
    time_from_si,
    time_to_si,
)

__version__ = "0.1.0"
