"""Reduced qubit density matrix co-integrated with the coefficient engine."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .model import ModelConfig
from .qsd import (
    CoefficientSeries,
    IntegratorSettings,
    OneQubitCoefficients,
    TwoQubitCoefficientGrid,
    _one_qubit_run,
)

# single-qubit basis order (|e>, |g>); two qubits use the product order ee, eg, ge, gg
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]])
_I2 = np.eye(2, dtype=complex)


def qubit_op(op: np.ndarray, m: int, M: int) -> np.ndarray:
    """Embed a single-qubit operator on qubit ``m`` (0-based) of ``M``."""
    out = np.ones((1, 1), dtype=complex)
    for k in range(M):
        out = np.kron(out, op if k == m else _I2)
    return out


def ansatz_basis(M: int) -> list[np.ndarray]:
    """Operators multiplying the coefficient components.

    M=1: [sigma_-]. M=2: [sigma_-^1, sigma_z^1 sigma_-^2, sigma_z^2 sigma_-^1, sigma_-^2].
    """
    return [b.copy() for b in _basis_stack(M)]


@lru_cache(maxsize=None)
def _basis_stack(M: int) -> np.ndarray:
    if M == 1:
        out = SIGMA_MINUS[None].copy()
    else:
        sm1, sm2 = qubit_op(SIGMA_MINUS, 0, 2), qubit_op(SIGMA_MINUS, 1, 2)
        sz1, sz2 = qubit_op(SIGMA_Z, 0, 2), qubit_op(SIGMA_Z, 1, 2)
        out = np.array([sm1, sz1 @ sm2, sz2 @ sm1, sm2])
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _raising(M: int) -> np.ndarray:
    out = np.array([qubit_op(SIGMA_PLUS, m, M) for m in range(M)])
    out.setflags(write=False)
    return out


def qubit_hamiltonian(cfg: ModelConfig) -> np.ndarray:
    M = cfg.M
    return sum(0.5 * cfg.qubit_freq[m] * qubit_op(SIGMA_Z, m, M) for m in range(M))


def o_bar(F_xm, M: int) -> np.ndarray:
    """Assemble the memory operator for one cavity from its coefficient(s)."""
    return np.tensordot(np.atleast_1d(F_xm), _basis_stack(M), axes=1)


def _coeff_array(coeffs) -> np.ndarray:
    if isinstance(coeffs, OneQubitCoefficients):
        return np.asarray(coeffs.F_x)
    return np.asarray(coeffs)


def master_rhs(rho: np.ndarray, coeffs, cfg: ModelConfig) -> np.ndarray:
    """-i[H_q, rho] + sum_m (Omega_am [Obar_m rho, sigma_+^m] + h.c.).

    ``coeffs`` is a OneQubitCoefficients, or the cavity quadratures F_x with
    shape (N,) for one qubit and (N, 4) for two.
    """
    M = cfg.M
    d = 2**M
    rho = np.asarray(rho)
    if rho.shape != (d, d):
        raise ValueError(f"dimension mismatch: rho {rho.shape} for M={M}")
    return _master_rhs(rho, _coeff_array(coeffs), cfg, qubit_hamiltonian(cfg))


def _master_rhs(rho, F_x, cfg, H):
    M = cfg.M
    out = -1j * (H @ rho - rho @ H)
    sps = _raising(M)
    for m in range(M):
        sp = sps[m]
        O_rho = o_bar(F_x[m], M) @ rho
        X = cfg.qubit_cavity_coupling[m] * (O_rho @ sp - sp @ O_rho)
        out += X + X.conj().T
    return out


def check_excitation_support(rho: np.ndarray, M: int, tol: float = 1e-12) -> None:
    """Reject two-qubit states with any |ee> population or coherence."""
    if M == 2 and (np.max(np.abs(rho[0, :])) > tol or np.max(np.abs(rho[:, 0])) > tol):
        raise ValueError("initial state has |ee> support; only <=1 excitation is allowed")


def mixes_sectors(rho: np.ndarray, M: int, tol: float = 1e-12) -> bool:
    """True when rho has coherences between the ground and one-excitation sectors (M=2)."""
    return M == 2 and np.max(np.abs(rho[3, 1:3])) > tol


@dataclass
class Trajectory:
    """Sampled states; ``times`` are in the config's time unit (Gamma*t when Gamma = 1)."""

    times: np.ndarray
    states: np.ndarray
    engine: str = "qsd"
    Gamma: float = 1.0
    coefficients: CoefficientSeries | None = None
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=complex)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def trace_err(self) -> np.ndarray:
        return np.abs(np.trace(self.states, axis1=1, axis2=2) - 1.0)

    @property
    def herm_err(self) -> np.ndarray:
        return np.max(np.abs(self.states - np.conj(np.swapaxes(self.states, 1, 2))), axis=(1, 2))

    @property
    def min_eig(self) -> np.ndarray:
        herm = 0.5 * (self.states + np.conj(np.swapaxes(self.states, 1, 2)))
        return np.linalg.eigvalsh(herm)[:, 0]

    def diagnostics(self) -> dict:
        return {
            "max_trace_err": float(self.trace_err.max()),
            "max_herm_err": float(self.herm_err.max()),
            "min_eigenvalue": float(self.min_eig.min()),
        }


def _resolve_settings(settings, dt):
    if settings is None:
        settings = IntegratorSettings(dt=dt if dt is not None else 1e-3)
    return settings


def evolve(
    cfg: ModelConfig,
    rho0: np.ndarray,
    t_final: float,
    settings: IntegratorSettings | None = None,
) -> Trajectory:
    """Co-integrate coefficients and rho with shared RK4 stages.

    No trace renormalisation or positivity projection is applied.
    """
    settings = _resolve_settings(settings, None)
    M = cfg.M
    rho0 = np.array(rho0, dtype=complex)
    d = 2**M
    if rho0.shape != (d, d):
        raise ValueError(f"dimension mismatch: rho0 {rho0.shape} for M={M}")
    check_excitation_support(rho0, M)
    flags = []
    if mixes_sectors(rho0, M):
        flags.append("unverified: initial state mixes 0- and 1-excitation sectors")

    if M == 1:
        series, states = _one_qubit_run(cfg, settings, t_final, rho0)
        return Trajectory(series.times, states, "qsd", cfg.Gamma, series, flags)

    grid = TwoQubitCoefficientGrid(cfg, settings, t_final)
    times, states, fx, fy = [], [], [], []

    H = qubit_hamiltonian(cfg)

    def rhs(tau, y, F):
        return _master_rhs(y, F, cfg, H)

    def record(g, y):
        times.append(g.t)
        states.append(y.copy())
        fx.append(g.F_x().copy())
        fy.append(g.F_y().copy())

    grid.march(passenger=rho0, passenger_rhs=rhs, on_sample=record)
    series = CoefficientSeries(np.array(times), np.array(fx), np.array(fy))
    return Trajectory(np.array(times), np.array(states), "qsd", cfg.Gamma, series, flags)


# -- initial states -------------------------------------------------------------

_KETS = {
    1: {
        "e": [1, 0],
        "g": [0, 1],
        "plus": [1, 1],
        "minus": [1, -1],
    },
    2: {
        "eg": [0, 1, 0, 0],
        "ge": [0, 0, 1, 0],
        "gg": [0, 0, 0, 1],
        "bell_plus": [0, 1, 1, 0],
        "bell_minus": [0, 1, -1, 0],
    },
}


def ket(name: str, M: int) -> np.ndarray:
    try:
        v = np.array(_KETS[M][name], dtype=complex)
    except KeyError:
        raise ValueError(f"unknown state {name!r} for M={M}") from None
    return v / np.linalg.norm(v)


def initial_state(name: str, M: int) -> np.ndarray:
    """Named pure state as a density matrix ('plus', 'e', 'g'; 'bell_plus', 'eg', ...)."""
    v = ket(name, M)
    return np.outer(v, v.conj())


# -- CSV -----------------------------------------------------------------------


def _basis_labels(M: int) -> list[str]:
    return ["e", "g"] if M == 1 else ["ee", "eg", "ge", "gg"]


def trajectory_columns(M: int) -> list[str]:
    lab = _basis_labels(M)
    re = [f"rho_re_{a}_{b}" for a in lab for b in lab]
    im = [f"rho_im_{a}_{b}" for a in lab for b in lab]
    return ["Gamma_t"] + re + im + ["trace_err"]


def write_trajectory_csv(traj: Trajectory, path, extra: dict | None = None, sample_every: int = 1):
    """Rows: Gamma_t, Re/Im of rho entries (row-major), trace_err, then ``extra`` columns."""
    M = 1 if traj.dim == 2 else 2
    extra = extra or {}
    header = trajectory_columns(M) + list(extra)
    terr = traj.trace_err
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(0, len(traj.times), sample_every):
            rho = traj.states[i].ravel()
            row = [traj.Gamma * traj.times[i], *rho.real, *rho.imag, terr[i]]
            row += [extra[k][i] for k in extra]
            w.writerow([repr(float(v)) for v in row])


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    n_re = sum(1 for h in header if h.startswith("rho_re_"))
    d = int(round(np.sqrt(n_re)))
    re = body[:, 1 : 1 + n_re]
    im = body[:, 1 + n_re : 1 + 2 * n_re]
    states = (re + 1j * im).reshape(-1, d, d)
    return Trajectory(body[:, 0], states, engine="csv")
