"""Rigidity of infinitesimal momentum maps on spectrally discretized Poisson surfaces."""

from .backends import SphereBackend, TorusBackend, make_backend
from .ce_complex import ComplexContext, build_context, build_scalar_context
from .engine import EngineConfig, IterationReport, MorphismState, run_classical, run_rigidity, sci_drive
from .fields import OneForm, ScalarField, TwoForm, VectorField
from .liealg import LieAlgebra, LieBialgebra, abelian, so3
from .momentum import MomentumMap1, ScalarMomentumMap
from .poisson import FlowOperator, PoissonStructure, flow_operator, koszul_bracket

__version__ = "0.1.0"

__all__ = [
    "ComplexContext",
    "EngineConfig",
    "FlowOperator",
    "IterationReport",
    "LieAlgebra",
    "LieBialgebra",
    "MomentumMap1",
    "MorphismState",
    "OneForm",
    "PoissonStructure",
    "ScalarField",
    "ScalarMomentumMap",
    "SphereBackend",
    "TorusBackend",
    "TwoForm",
    "VectorField",
    "abelian",
    "build_context",
    "build_scalar_context",
    "flow_operator",
    "koszul_bracket",
    "make_backend",
    "run_classical",
    "run_rigidity",
    "sci_drive",
    "so3",
]
