"""Convective Cahn-Hilliard flow with dynamic boundary conditions on a periodic strip."""

from .exceptions import ChdynError, ConfigError, DomainError, NumericalFailure, PreconditionError
from .mesh import (
    DiscreteOperators,
    FunctionPair,
    StripMesh,
    assemble_operators,
    build_strip_mesh,
    generalized_mean,
    inner_a,
    inner_h,
)
from .potentials import YosidaParams, make_graph, make_split
from .scenario import Scenario, build_scenario, initial_profile
from .spectral import EigenBasis, eigendecompose
from .velocity import shear_field, stream_function_field

__version__ = "0.1.0"
