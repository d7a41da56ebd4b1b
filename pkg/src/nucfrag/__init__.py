"""Exact stochastic simulation of nucleation-fragmentation polymerization.

The hot loops in ``nucfrag.kernels`` are compiled with numba; set
``NUCFRAG_PURE_NUMPY=1`` before import to run them as plain Python/numpy.
"""
from ._jit import BACKEND
from .errors import (
    ConfigurationError,
    InsufficientData,
    InvalidComposition,
    InvalidTransition,
    NucfragError,
    PrecisionError,
    UndefinedStatistic,
    UnsupportedConfiguration,
)
from .fragmentation import Composition, FragmentationSpec
from .model import DerivedScales, ModelParams, ScalingFunction, SystemState, derived_scales, k_c, psi, rho_bar
from .simulator import InitialCondition, ObserverSet, SimulationMode, StopRule, TrajectoryRecord, run

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Composition",
    "ConfigurationError",
    "DerivedScales",
    "FragmentationSpec",
    "InitialCondition",
    "InsufficientData",
    "InvalidComposition",
    "InvalidTransition",
    "ModelParams",
    "NucfragError",
    "ObserverSet",
    "PrecisionError",
    "ScalingFunction",
    "SimulationMode",
    "StopRule",
    "SystemState",
    "TrajectoryRecord",
    "UndefinedStatistic",
    "UnsupportedConfiguration",
    "derived_scales",
    "k_c",
    "psi",
    "rho_bar",
    "run",
]
