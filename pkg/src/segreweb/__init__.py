"""Chern connections of 3-webs, heavenly systems, ODE invariants and Poisson pencils."""

from .expr import ParseError, parse, to_string
from .heavenly import HeavenlySpec, ThetaSpec
from .ode import OdeSpec
from .web import WebSpec

__all__ = ["HeavenlySpec", "OdeSpec", "ParseError", "ThetaSpec", "WebSpec", "parse", "to_string"]
__version__ = "0.1.0"
