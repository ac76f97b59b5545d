"""Curve extraction in images by minimal flows with prescribed divergence."""
from .diracs import SINK, SOURCE, DiracMass, dirac_field
from .endpoints import BilevelConfig, run_bilevel
from .energies import Energy, EnergySpec, primal_energy
from .estimators import CurveExtractor, GeodesicExtractor
from .exceptions import ConvergenceError, CurvexError, IncompatibleDataError, NumericalError, TraceError
from .grid import Grid
from .pdhg import SolverConfig, solve
from .rototrans import solve_lifted
from .spectral import project_divergence, solve_poisson
from .tracing import Curve, trace_curves

__version__ = "0.1.0"

__all__ = [
    "BilevelConfig", "ConvergenceError", "Curve", "CurveExtractor", "CurvexError", "DiracMass",
    "Energy", "EnergySpec", "GeodesicExtractor", "Grid", "IncompatibleDataError", "NumericalError",
    "SINK", "SOURCE", "SolverConfig", "TraceError", "dirac_field", "primal_energy",
    "project_divergence", "run_bilevel", "solve", "solve_lifted", "solve_poisson", "trace_curves",
]
