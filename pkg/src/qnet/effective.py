"""Unitary mode transforms that expose the single leaky collective cavity mode."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelConfig


@dataclass(frozen=True)
class CavityTransform:
    """Real orthogonal U with a_n = sum_j U[n, j] a~_j."""

    N: int
    U: np.ndarray


def build_cavity_transform(N: int) -> CavityTransform:
    """Canonical transform for N >= 2 cavities.

    Column 1 is the uniform mode. For N >= 3, column 2 puts equal weight on the
    first two cavities and balances it over the rest, column 3 is the
    antisymmetric pair (-1, 1, 0, ...)/sqrt2, and columns 4..N are a Helmert
    completion over cavities 3..N. N = 2 is [[1, -1], [1, 1]]/sqrt2.
    """
    if N < 2:
        raise ValueError("cavity transform needs N >= 2")
    U = np.zeros((N, N))
    U[:, 0] = 1 / np.sqrt(N)
    if N == 2:
        U[:, 1] = [-1 / np.sqrt(2), 1 / np.sqrt(2)]
        return CavityTransform(N, U)
    a = np.sqrt((N - 2) / (2 * N))
    U[:2, 1] = a
    U[2:, 1] = -2 * a / (N - 2)
    U[0, 2], U[1, 2] = -1 / np.sqrt(2), 1 / np.sqrt(2)
    for j in range(1, N - 2):
        v = np.zeros(N)
        v[2 : 2 + j] = -1.0
        v[2 + j] = j
        U[:, 2 + j] = v / np.linalg.norm(v)
    return CavityTransform(N, U)


def qubit_transform(M: int) -> np.ndarray:
    """sigma_-^(m) = sum_i V[m, i] sigma~_-^(i); for two qubits column 2 is the antisymmetric Qubit-A."""
    if M == 1:
        return np.eye(1)
    return build_cavity_transform(2).U


@dataclass
class EffectiveModel:
    transform: CavityTransform
    qubit_transform: np.ndarray
    tilde_freqs: np.ndarray
    qubit_mode_couplings: np.ndarray
    reservoir_coupling_vector: np.ndarray
    flags: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        def c(z):
            return [[complex(x).real, complex(x).imag] for x in z]

        return {
            "U": self.transform.U.tolist(),
            "U_qubits": np.asarray(self.qubit_transform).tolist(),
            "tilde_freqs": np.asarray(self.tilde_freqs).tolist(),
            "qubit_mode_couplings": np.real(self.qubit_mode_couplings).tolist(),
            "reservoir_coupling_vector": np.asarray(self.reservoir_coupling_vector).tolist(),
            "flags": list(self.flags),
        }


def effective_model(cfg: ModelConfig) -> EffectiveModel:
    """Tilde frequencies, tilde qubit-mode couplings and the reservoir vector (sqrt N, 0, ...)."""
    if not cfg.is_isotropic():
        raise ValueError("effective model needs an isotropic config (common w, real common Omega and Omega_a)")
    N, M = cfg.N, cfg.M
    if N < 2:
        raise ValueError("effective model needs N >= 2")
    tr = build_cavity_transform(N)
    V = qubit_transform(M)
    w = cfg.cavity_freq[0]
    Om = cfg.cavity_coupling[0, 1].real
    freqs = np.full(N, w - Om)
    freqs[0] = w + (N - 1) * Om
    oa = cfg.qubit_cavity_coupling[0].real
    # Omega_a sum_m sigma_+^m a_m  ->  sum_{ij} [Omega_a sum_m V_mi U_mj] sigma~_+^i a~_j
    table = oa * V.T @ tr.U[:M, :]
    rv = np.zeros(N)
    rv[0] = np.sqrt(N)
    return EffectiveModel(tr, V, freqs, table, rv)


@dataclass
class VerificationReport:
    unitarity: float
    diagonalization: float
    spectrum: float
    reservoir_vector: float
    qubit_algebra: float

    @property
    def max_residual(self) -> float:
        return max(self.unitarity, self.diagonalization, self.spectrum, self.reservoir_vector, self.qubit_algebra)

    def as_dict(self) -> dict:
        return {
            "unitarity": self.unitarity,
            "diagonalization": self.diagonalization,
            "spectrum": self.spectrum,
            "reservoir_vector": self.reservoir_vector,
            "qubit_algebra": self.qubit_algebra,
            "max_residual": self.max_residual,
        }


def verify_transform(cfg: ModelConfig, em: EffectiveModel) -> VerificationReport:
    """Residuals of the transform against its defining properties."""
    U = em.transform.U
    N = U.shape[0]
    W = cfg.cavity_coupling.copy()
    np.fill_diagonal(W, 0.0)
    Hcc = np.diag(cfg.cavity_freq) + W
    D = U.conj().T @ Hcc @ U
    unit = float(np.max(np.abs(U.conj().T @ U - np.eye(N))))
    diag = float(np.max(np.abs(D - np.diag(np.diag(D)))))
    spec = float(np.max(np.abs(np.diag(D) - em.tilde_freqs)))
    # the reservoir couples to sum_n a_n = sum_j (sum_n U_nj) a~_j
    resv = float(np.max(np.abs(U.sum(axis=0) - em.reservoir_coupling_vector)))
    V = np.asarray(em.qubit_transform)
    # single-excitation sector: tilde lowering operators act as V^T on the amplitude vector;
    # orthogonality of V is the anticommutator {s~_i, s~_j^+} = delta_ij there
    alg = float(np.max(np.abs(V.T @ V - np.eye(V.shape[0]))))
    return VerificationReport(unit, diag, spec, resv, alg)
