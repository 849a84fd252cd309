"""Named parameter sets used by validation, in units of Gamma = 1.

The Markovian-branch measures do not depend on omega, so those presets use
omega = 0 (the resonant frame). Non-Markovian presets use omega = 5.
"""
from __future__ import annotations

from dataclasses import dataclass

from .model import Lorentzian, Markovian, ModelConfig, make_isotropic_config


@dataclass(frozen=True)
class Preset:
    name: str
    cfg: ModelConfig
    state: str
    t_final: float
    dt: float
    tol: float


# (Omega_a, Omega) for the three coherence curves and the four concurrence curves
COHERENCE_PAIRS = {"black": (2.0, 0.5), "blue": (2.0, 2.0), "red": (0.5, 2.0)}
BELL_PAIRS = ((0.5, 0.2), (0.5, 1.0), (0.2, 0.2), (0.2, 1.0))


def one_qubit_presets() -> list[Preset]:
    out = []
    for label, (oa, om) in COHERENCE_PAIRS.items():
        cfg = make_isotropic_config(1, 3, 0.0, oa, om, Markovian(1.0))
        out.append(Preset(f"coherence-{label}", cfg, "plus", 200.0, 1e-3, 1e-3))
    for gam in (0.1, 0.5, 1.0):
        cfg = make_isotropic_config(1, 3, 5.0, 0.1, 0.2, Lorentzian(1.0, gam))
        out.append(Preset(f"coherence-gamma{gam:g}", cfg, "plus", 200.0, 1e-3, 1e-3))
    return out


def two_qubit_presets() -> list[Preset]:
    out = []
    for oa, om in BELL_PAIRS:
        cfg = make_isotropic_config(2, 3, 0.0, oa, om, Markovian(1.0))
        out.append(Preset(f"bell-Oa{oa:g}-O{om:g}", cfg, "bell_plus", 50.0, 5e-3, 5e-3))
    for gam in (0.1, 1.0, 10.0):
        cfg = make_isotropic_config(2, 3, 5.0, 0.1, 0.5, Lorentzian(1.0, gam))
        out.append(Preset(f"generation-gamma{gam:g}", cfg, "eg", 50.0, 5e-3, 5e-3))
    return out


def all_presets() -> list[Preset]:
    return one_qubit_presets() + two_qubit_presets()
