"""Simulation toolkit for GHZ-based anonymous notification and QuANet switch bypass."""
from .errors import InvalidArgument, NumericalError, ScenarioConfigError
from .rng import RngStream
from .qsim import NOISELESS, Circuit, DensityState, Instruction, NoiseParams
from .shares import AngleShareSet, generate_shares, reconstruct
from .protocol import SessionConfig, SessionResult, run_session

__version__ = "0.1.0"

__all__ = [
    "AngleShareSet",
    "Circuit",
    "DensityState",
    "Instruction",
    "InvalidArgument",
    "NOISELESS",
    "NoiseParams",
    "NumericalError",
    "RngStream",
    "ScenarioConfigError",
    "SessionConfig",
    "SessionResult",
    "generate_shares",
    "reconstruct",
    "run_session",
    "__version__",
]
