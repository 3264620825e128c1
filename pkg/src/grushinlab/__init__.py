"""Numerical laboratory for the Grushin heat equation with nonlinear memory."""

from .grushin import BiRadialGrid, Field, GrushinDims, ThetaParams
from .memsolver import GridSpec, InitialData, Outcome, SimConfig, run
from .odereduce import OdeConfig, OdeOutcome, run_ode
from .testfn import critical_exponents

__all__ = [
    "BiRadialGrid",
    "Field",
    "GridSpec",
    "GrushinDims",
    "InitialData",
    "OdeConfig",
    "OdeOutcome",
    "Outcome",
    "SimConfig",
    "ThetaParams",
    "critical_exponents",
    "run",
    "run_ode",
]

__version__ = "0.1.0"
