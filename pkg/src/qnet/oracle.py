"""Brute-force single-excitation solver used to certify the coefficient engine.

The total state is g|G> + sum_m c_m |e_m> + sum_n d_n |1_n> + p |1_pm>, where
|G> is qubits-ground with every bosonic mode in vacuum. A Lorentzian reservoir
is replaced by one damped pseudomode (coupling sqrt(Gamma*gamma/2) to every
cavity, amplitude decay gamma); a Markovian reservoir gives the collective
non-Hermitian damping -(Gamma/2) sum_q d_q on every cavity amplitude.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .model import Lorentzian, ModelConfig
from .propagator import Trajectory


@dataclass
class AmplitudeState:
    c: np.ndarray
    d: np.ndarray
    g: complex
    p: complex = 0.0

    @property
    def norm2(self) -> float:
        return float(
            abs(self.g) ** 2 + np.sum(np.abs(self.c) ** 2) + np.sum(np.abs(self.d) ** 2) + abs(self.p) ** 2
        )


def single_excitation_generator(cfg: ModelConfig, energy_offset: float = 0.0) -> np.ndarray:
    """Effective Hamiltonian on (c_1..c_M, d_1..d_N[, p]).

    Energies are measured from the ground energy of the qubit Hamiltonian, so
    the excitation sector sits at -sum(w_a)/2 + its excitation energy.
    """
    M, N = cfg.M, cfg.N
    lor = isinstance(cfg.reservoir, Lorentzian)
    dim = M + N + (1 if lor else 0)
    E0 = -0.5 * float(np.sum(cfg.qubit_freq)) + energy_offset
    H = np.zeros((dim, dim), dtype=complex)
    for m in range(M):
        H[m, m] = cfg.qubit_freq[m]
        H[m, M + m] = cfg.qubit_cavity_coupling[m]
        H[M + m, m] = np.conj(cfg.qubit_cavity_coupling[m])
    W = cfg.cavity_coupling.copy()
    np.fill_diagonal(W, 0.0)
    H[M : M + N, M : M + N] = np.diag(cfg.cavity_freq) + W
    # qubit energies are excitation energies above the qubit ground; cavities likewise
    res = cfg.reservoir
    if lor:
        P = M + N
        g0 = np.sqrt(0.5 * res.Gamma * res.gamma)
        H[P, P] = res.center - 1j * res.gamma
        H[P, M : M + N] = g0
        H[M : M + N, P] = g0
    else:
        H[M : M + N, M : M + N] -= 0.5j * res.Gamma
    return H + E0 * np.eye(dim)


def ground_energy(cfg: ModelConfig, energy_offset: float = 0.0) -> float:
    return -0.5 * float(np.sum(cfg.qubit_freq)) + energy_offset


def state_from_ket(ket: np.ndarray, cfg: ModelConfig) -> AmplitudeState:
    """Qubit ket with the environment in vacuum. M=2 kets are in the order ee, eg, ge, gg."""
    ket = np.asarray(ket, dtype=complex)
    N = cfg.N
    if cfg.M == 1:
        return AmplitudeState(ket[:1].copy(), np.zeros(N, complex), ket[1])
    if abs(ket[0]) > 1e-12:
        raise ValueError("|ee> amplitude is outside the single-excitation sector")
    return AmplitudeState(ket[1:3].copy(), np.zeros(N, complex), ket[3])


def reduced_density_from_amplitudes(state: AmplitudeState, M: int, tol: float = 1e-10) -> np.ndarray:
    """Qubit density matrix; all population outside the qubit excitations lands in the ground."""
    if state.norm2 > 1 + tol:
        raise ValueError(f"norm {state.norm2} exceeds 1")
    c, g = np.asarray(state.c), state.g
    pop_exc = float(np.sum(np.abs(c) ** 2))
    if M == 1:
        return np.array([[abs(c[0]) ** 2, c[0] * np.conj(g)], [np.conj(c[0]) * g, 1 - pop_exc]])
    # basis ee, eg, ge, gg
    v = np.array([0.0, c[0], c[1], g])
    rho = np.outer(v, v.conj())
    rho[3, 3] = 1 - pop_exc
    return rho


def evolve_single_excitation(
    cfg: ModelConfig,
    initial: AmplitudeState | list[AmplitudeState],
    t_final: float,
    dt: float = 1e-3,
    sample_every: int = 1,
    energy_offset: float = 0.0,
    generator: np.ndarray | None = None,
):
    """Exact propagation (matrix exponential per sample interval).

    Returns (times, amplitudes, g) with amplitudes of shape (nt, dim, r) for r
    initial states and g of shape (nt, r).
    """
    inits = [initial] if isinstance(initial, AmplitudeState) else list(initial)
    for s in inits:
        if np.any(np.abs(s.d) > 0) or abs(s.p) > 0:
            raise ValueError("environment must start in the vacuum")
    H = single_excitation_generator(cfg, energy_offset) if generator is None else generator
    M = cfg.M
    dim = H.shape[0]
    v = np.zeros((dim, len(inits)), dtype=complex)
    g0 = np.zeros(len(inits), dtype=complex)
    for k, s in enumerate(inits):
        v[:M, k] = s.c
        g0[k] = s.g
    h = dt * sample_every
    nsteps = int(round(t_final / dt))
    nsamp = nsteps // sample_every
    P = expm(-1j * H * h)
    out = np.empty((nsamp + 1, dim, len(inits)), dtype=complex)
    out[0] = v
    for i in range(nsamp):
        v = P @ v
        out[i + 1] = v
    times = np.arange(nsamp + 1) * h
    E0 = ground_energy(cfg, energy_offset)
    g = np.exp(-1j * E0 * times)[:, None] * g0[None, :]
    return times, out, g


def oracle_trajectory(
    cfg: ModelConfig,
    rho0: np.ndarray,
    t_final: float,
    dt: float = 1e-3,
    sample_every: int = 1,
    energy_offset: float = 0.0,
) -> Trajectory:
    """Reduced dynamics for any rho0 in the <=1-excitation sector (mixtures by linearity)."""
    M = cfg.M
    rho0 = np.asarray(rho0, dtype=complex)
    w, V = np.linalg.eigh(0.5 * (rho0 + rho0.conj().T))
    keep = w > 1e-14
    inits = [state_from_ket(V[:, k], cfg) for k in np.flatnonzero(keep)]
    times, amps, g = evolve_single_excitation(cfg, inits, t_final, dt, sample_every, energy_offset)
    states = np.zeros((len(times), 2**M, 2**M), dtype=complex)
    for k, wk in enumerate(w[keep]):
        for i in range(len(times)):
            st = AmplitudeState(amps[i, :M, k], amps[i, M:, k], g[i, k])
            states[i] += wk * reduced_density_from_amplitudes(st, M)
    return Trajectory(times, states, engine="oracle", Gamma=cfg.Gamma)


# -- reduced (tilde-mode) oracle -------------------------------------------------


def reduced_generator(em, cfg: ModelConfig) -> np.ndarray:
    """Generator on (tilde qubits, tilde modes coupled to a qubit or the reservoir[, p]).

    Built only from the effective-model data: tilde frequencies, the
    qubit-mode coupling table and the reservoir coupling vector.
    """
    M = cfg.M
    table = np.asarray(em.qubit_mode_couplings)
    rv = np.asarray(em.reservoir_coupling_vector)
    modes = [j for j in range(table.shape[1]) if np.any(np.abs(table[:, j]) > 1e-14) or abs(rv[j]) > 1e-14]
    lor = isinstance(cfg.reservoir, Lorentzian)
    K = len(modes)
    dim = M + K + (1 if lor else 0)
    H = np.zeros((dim, dim), dtype=complex)
    H[:M, :M] = np.diag(cfg.qubit_freq)
    for a, j in enumerate(modes):
        H[M + a, M + a] = em.tilde_freqs[j]
        H[:M, M + a] = table[:, j]
        H[M + a, :M] = np.conj(table[:, j])
    r = rv[modes]
    res = cfg.reservoir
    if lor:
        g0 = np.sqrt(0.5 * res.Gamma * res.gamma)
        P = M + K
        H[P, P] = res.center - 1j * res.gamma
        H[M : M + K, P] = g0 * r
        H[P, M : M + K] = g0 * r
    else:
        H[M : M + K, M : M + K] -= 0.5j * res.Gamma * np.outer(r, r)
    return H + ground_energy(cfg) * np.eye(dim), modes


def reduced_oracle_trajectory(
    cfg: ModelConfig, rho0: np.ndarray, t_final: float, dt: float = 1e-2, em=None
) -> Trajectory:
    """Same as oracle_trajectory but propagated in the tilde basis with <=3 tilde modes."""
    from .effective import effective_model

    em = effective_model(cfg) if em is None else em
    H, modes = reduced_generator(em, cfg)
    U = np.asarray(em.qubit_transform)
    M = cfg.M
    rho0 = np.asarray(rho0, dtype=complex)
    w, V = np.linalg.eigh(0.5 * (rho0 + rho0.conj().T))
    keep = np.flatnonzero(w > 1e-14)
    inits = []
    for k in keep:
        s = state_from_ket(V[:, k], cfg)
        # tilde qubit amplitudes: c_m = sum_i U_mi c~_i
        inits.append(AmplitudeState(U.T @ s.c, np.zeros(len(modes), complex), s.g))
    times, amps, g = evolve_single_excitation(cfg, inits, t_final, dt, generator=H)
    states = np.zeros((len(times), 2**M, 2**M), dtype=complex)
    for idx, k in enumerate(keep):
        for i in range(len(times)):
            c = U @ amps[i, :M, idx]
            st = AmplitudeState(c, amps[i, M:, idx], g[i, idx])
            states[i] += w[k] * reduced_density_from_amplitudes(st, M)
    return Trajectory(times, states, engine="oracle-reduced", Gamma=cfg.Gamma)


# -- comparison ----------------------------------------------------------------


def compare_trajectories(a: Trajectory, b: Trajectory) -> tuple[float, float]:
    """Max elementwise |rho_a - rho_b| and the time where it occurs.

    On differing grids, ``b`` is linearly interpolated onto the times of ``a``
    that fall inside b's range.
    """
    ta, tb = np.asarray(a.times), np.asarray(b.times)
    if ta.size == tb.size and np.allclose(ta, tb, rtol=0, atol=1e-12):
        diff = np.abs(a.states - b.states).reshape(len(ta), -1).max(axis=1)
        i = int(np.argmax(diff))
        return float(diff[i]), float(ta[i])
    lo, hi = max(ta[0], tb[0]), min(ta[-1], tb[-1])
    mask = (ta >= lo - 1e-12) & (ta <= hi + 1e-12)
    if not np.any(mask) or lo > hi:
        raise ValueError("trajectories have disjoint time ranges")
    t = ta[mask]
    flat_b = b.states.reshape(len(tb), -1)
    interp = np.empty((t.size, flat_b.shape[1]), dtype=complex)
    for j in range(flat_b.shape[1]):
        interp[:, j] = np.interp(t, tb, flat_b[:, j].real) + 1j * np.interp(t, tb, flat_b[:, j].imag)
    diff = np.abs(a.states[mask].reshape(t.size, -1) - interp).max(axis=1)
    i = int(np.argmax(diff))
    return float(diff[i]), float(t[i])
