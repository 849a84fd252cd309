"""Exact reduced dynamics of qubits in a leaky coupled-cavity network."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    ConfigError,
    Lorentzian,
    Markovian,
    ModelConfig,
    make_isotropic_config,
    validate_config,
)
from .qsd import IntegrationError, IntegratorSettings  # noqa: E402
from .propagator import Trajectory, evolve, initial_state  # noqa: E402
from .oracle import compare_trajectories, oracle_trajectory  # noqa: E402
from .measures import coherence, concurrence, dressed_populations, time_average  # noqa: E402
from .effective import build_cavity_transform, effective_model, verify_transform  # noqa: E402

__all__ = [
    "ConfigError",
    "IntegrationError",
    "IntegratorSettings",
    "Lorentzian",
    "Markovian",
    "ModelConfig",
    "Trajectory",
    "build_cavity_transform",
    "coherence",
    "compare_trajectories",
    "concurrence",
    "dressed_populations",
    "effective_model",
    "evolve",
    "initial_state",
    "make_isotropic_config",
    "oracle_trajectory",
    "time_average",
    "validate_config",
    "verify_transform",
]
