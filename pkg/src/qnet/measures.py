"""Coherence and entanglement measures of reduced qubit states."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

CLAMP = -1e-8
_SYY = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
_S2 = 1 / np.sqrt(2)
# dressed single-excitation states in the basis ee, eg, ge, gg
E_A = np.array([0, _S2, -_S2, 0], dtype=complex)
E_B = np.array([0, _S2, _S2, 0], dtype=complex)


class PositivityError(ValueError):
    """Eigenvalue below the clamp threshold."""


def _clamped(w: np.ndarray) -> np.ndarray:
    if w.min() < CLAMP:
        raise PositivityError(f"eigenvalue {w.min():.3e} below {CLAMP:g}")
    return np.clip(w, 0.0, None)


def entropy(p: np.ndarray) -> float:
    """Shannon entropy (natural log) of a probability vector."""
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def coherence(rho: np.ndarray) -> float:
    """Relative entropy of coherence S(rho_diag) - S(rho), natural log."""
    rho = np.asarray(rho)
    herm = 0.5 * (rho + rho.conj().T)
    w = _clamped(np.linalg.eigvalsh(herm))
    d = _clamped(np.real(np.diag(rho)))
    return max(0.0, entropy(d) - entropy(w))


def concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence; conjugation in the product basis ee, eg, ge, gg."""
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise ValueError(f"concurrence needs a 4x4 matrix, got {rho.shape}")
    R = rho @ _SYY @ rho.conj() @ _SYY
    lam = np.sort(np.abs(np.linalg.eigvals(R).real))[::-1]
    s = np.sqrt(lam)
    return float(min(1.0, max(0.0, s[0] - s[1] - s[2] - s[3])))


def dressed_populations(rho: np.ndarray) -> tuple[float, float, float, float]:
    """(p_A, p_B, p_gg, p_ee) for the dressed states |e_A> = (|eg> - |ge>)/sqrt2, |e_B> = (|eg> + |ge>)/sqrt2."""
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise ValueError(f"dressed populations need a 4x4 matrix, got {rho.shape}")
    pA = float(np.real(E_A.conj() @ rho @ E_A))
    pB = float(np.real(E_B.conj() @ rho @ E_B))
    return pA, pB, float(rho[3, 3].real), float(rho[0, 0].real)


@dataclass
class MeasureSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values differ in length")

    def window(self, t0: float, t1: float) -> "MeasureSeries":
        m = (self.times >= t0 - 1e-12) & (self.times <= t1 + 1e-12)
        return MeasureSeries(self.times[m], self.values[m])


def time_average(series: MeasureSeries) -> float:
    """Trapezoidal integral divided by the elapsed time."""
    if series.times.size < 2:
        raise ValueError("time average needs at least two samples")
    span = series.times[-1] - series.times[0]
    return float(trapezoid(series.values, series.times) / span)


def coherence_series(traj) -> MeasureSeries:
    return MeasureSeries(traj.times, [coherence(r) for r in traj.states])


def concurrence_series(traj) -> MeasureSeries:
    return MeasureSeries(traj.times, [concurrence(r) for r in traj.states])


def measure_columns(traj) -> dict:
    """Columns appended to trajectory CSVs; two-qubit measures are NaN for M = 1."""
    n = len(traj.times)
    out = {"coherence": np.array([coherence(r) for r in traj.states])}
    if traj.dim == 4:
        pops = np.array([dressed_populations(r) for r in traj.states])
        out["concurrence"] = np.array([concurrence(r) for r in traj.states])
        out["p_A"], out["p_B"] = pops[:, 0], pops[:, 1]
    else:
        for k in ("concurrence", "p_A", "p_B"):
            out[k] = np.full(n, np.nan)
    return out
