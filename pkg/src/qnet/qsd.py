"""Deterministic O-operator coefficient equations (single-excitation QSD).

One qubit: the quadratures F_xn(t), F_y(t) obey closed time-local ODEs and are
integrated directly. Two qubits: the two-time coefficients f_k^{p,q}(t, s) are
marched on a triangular (t, s) grid; each retained s-column is advanced in t,
a fresh column is appended at s = t from the boundary conditions, and the
quadratures F_k^{p,q}(t) are refreshed by the trapezoidal rule.

Channel layout used throughout: channels 0..N-1 are the cavity noises x_n,
channel N (Lorentzian reservoirs only) is the reservoir noise y. For a
Markovian reservoir the y-channel is eliminated, F_y = -i (Gamma/2) sum_n F_xn.
Two-qubit component order is (1,1), (1,2), (2,1), (2,2), multiplying
sigma_-^(1), sigma_z^(1) sigma_-^(2), sigma_z^(2) sigma_-^(1), sigma_-^(2).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

from .model import Lorentzian, ModelConfig

COMPONENTS = ((1, 1), (1, 2), (2, 1), (2, 2))


class IntegrationError(RuntimeError):
    """Non-finite values or resource exhaustion during integration."""

    def __init__(self, message: str, time: float | None = None):
        if time is not None:
            message = f"{message} (at t={time:.6g})"
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class IntegratorSettings:
    """Fixed-step RK4 settings.

    ``s_thinning`` keeps every k-th s-column of the two-time grid;
    ``sample_every`` sets the output cadence in steps.
    """

    dt: float = 1e-3
    s_thinning: int = 1
    sample_every: int = 1
    max_grid_bytes: float = 2e9
    scheme: str = "rk4"
    quadrature: str = "trapezoidal"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.s_thinning < 1 or self.sample_every < 1:
            raise ValueError("s_thinning and sample_every must be >= 1")
        if self.scheme != "rk4" or self.quadrature != "trapezoidal":
            raise ValueError("only fixed-step rk4 with trapezoidal quadrature is supported")

    def num_steps(self, t_final: float) -> int:
        n = int(round(t_final / self.dt))
        if abs(n * self.dt - t_final) > 1e-9 * max(1.0, t_final):
            raise ValueError("t_final must be an integer multiple of dt")
        return n


def channel_rates(cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Kernel amplitude and complex decay rate per channel: k(t,s) = amp*exp(-lam*(t-s))."""
    amp = list(np.ones(cfg.N))
    lam = list(1j * cfg.cavity_freq)
    res = cfg.reservoir
    if isinstance(res, Lorentzian):
        amp.append(0.5 * res.Gamma * res.gamma)
        lam.append(res.gamma + 1j * res.center)
    return np.array(amp, dtype=complex), np.array(lam, dtype=complex)


def boundary_matrix(cfg: ModelConfig) -> np.ndarray:
    """Linear part B of the boundary map f(t,t) = S + B F, acting on the channel index."""
    N = cfg.N
    W = cfg.cavity_coupling.copy()
    np.fill_diagonal(W, 0.0)
    if cfg.markovian:
        return -1j * W - 0.5 * cfg.Gamma * np.ones((N, N))
    B = np.zeros((N + 1, N + 1), dtype=complex)
    B[:N, :N] = -1j * W
    B[:N, N] = -1j
    B[N, :N] = -1j
    return B


# -- one qubit ---------------------------------------------------------------


@dataclass
class OneQubitCoefficients:
    t: float
    F_x: np.ndarray
    F_y: complex


def _one_qubit_system(cfg: ModelConfig):
    """Source vector, linear matrix and nonlinear prefactor for the packed state (F_x, [F_y])."""
    N = cfg.N
    a = complex(cfg.qubit_cavity_coupling[0])
    wa = float(cfg.qubit_freq[0])
    W = cfg.cavity_coupling.copy()
    np.fill_diagonal(W, 0.0)
    K = N if cfg.markovian else N + 1
    L = np.zeros((K, K), dtype=complex)
    L[:N, :N] = -1j * W + np.diag(1j * (wa - cfg.cavity_freq))
    res = cfg.reservoir
    if cfg.markovian:
        # -i F_y with F_y = -i (Gamma/2) sum_m F_xm
        L[:N, :N] -= 0.5 * res.Gamma
    else:
        L[:N, N] = -1j
        L[N, :N] = -0.5j * res.Gamma * res.gamma
        L[N, N] = 1j * wa - res.gamma - 1j * res.center
    src = np.zeros(K, dtype=complex)
    src[0] = np.conj(a)
    return src, L, a


def one_qubit_rhs(c: OneQubitCoefficients, cfg: ModelConfig) -> OneQubitCoefficients:
    """Time derivative of (F_x, F_y) for a single qubit."""
    if cfg.M != 1:
        raise ValueError("one_qubit_rhs needs M = 1")
    src, L, a = _one_qubit_system(cfg)
    N = cfg.N
    if cfg.markovian:
        y = np.asarray(c.F_x, dtype=complex)
    else:
        y = np.append(np.asarray(c.F_x, dtype=complex), c.F_y)
    dy = src + L @ y + a * y[0] * y
    if cfg.markovian:
        # F_y is slaved to F_x; report its derivative for completeness
        return OneQubitCoefficients(c.t, dy, -0.5j * cfg.Gamma * dy.sum())
    return OneQubitCoefficients(c.t, dy[:N], dy[N])


@numba.njit(cache=True)
def _one_qubit_deriv(z, K, src, L, a, wa, with_rho, out):
    k = a * z[0]
    for i in range(K):
        acc = src[i] + k * z[i]
        for j in range(K):
            acc += L[i, j] * z[j]
        out[i] = acc
    if with_rho:
        ree = z[K]
        reg = z[K + 1]
        loss = 2.0 * k.real * ree
        out[K] = -loss
        out[K + 1] = (-1j * wa - k) * reg
        out[K + 2] = (1j * wa - np.conj(k)) * z[K + 2]
        out[K + 3] = loss
    else:
        for i in range(K, out.size):
            out[i] = 0.0


@numba.njit(cache=True)
def _one_qubit_march(z0, K, src, L, a, wa, with_rho, dt, nsteps, every, samples):
    n = z0.size
    z = z0.copy()
    k1 = np.empty(n, np.complex128)
    k2 = np.empty(n, np.complex128)
    k3 = np.empty(n, np.complex128)
    k4 = np.empty(n, np.complex128)
    tmp = np.empty(n, np.complex128)
    samples[0, :] = z
    row = 1
    for step in range(nsteps):
        _one_qubit_deriv(z, K, src, L, a, wa, with_rho, k1)
        for i in range(n):
            tmp[i] = z[i] + 0.5 * dt * k1[i]
        _one_qubit_deriv(tmp, K, src, L, a, wa, with_rho, k2)
        for i in range(n):
            tmp[i] = z[i] + 0.5 * dt * k2[i]
        _one_qubit_deriv(tmp, K, src, L, a, wa, with_rho, k3)
        for i in range(n):
            tmp[i] = z[i] + dt * k3[i]
        _one_qubit_deriv(tmp, K, src, L, a, wa, with_rho, k4)
        for i in range(n):
            z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not (np.isfinite(z[i].real) and np.isfinite(z[i].imag)):
                return step + 1
        if (step + 1) % every == 0:
            samples[row, :] = z
            row += 1
    return -1


@dataclass
class CoefficientSeries:
    """Sampled quadratures. One qubit: F_x (nt, N); two qubits: F_x (nt, N, 4), F_y (nt, 4)."""

    times: np.ndarray
    F_x: np.ndarray
    F_y: np.ndarray

    def at(self, i: int) -> OneQubitCoefficients:
        return OneQubitCoefficients(float(self.times[i]), self.F_x[i], self.F_y[i])


def _one_qubit_run(cfg, settings, t_final, rho0=None):
    src, L, a = _one_qubit_system(cfg)
    K = L.shape[0]
    nsteps = settings.num_steps(t_final)
    every = settings.sample_every
    with_rho = rho0 is not None
    z0 = np.zeros(K + 4, dtype=complex)
    if with_rho:
        z0[K:] = np.asarray(rho0, dtype=complex).reshape(4)
    samples = np.empty((nsteps // every + 1, K + 4), dtype=complex)
    bad = _one_qubit_march(
        z0, K, src, L, a, float(cfg.qubit_freq[0]), with_rho, settings.dt, nsteps, every, samples
    )
    if bad >= 0:
        raise IntegrationError("non-finite coefficients", bad * settings.dt)
    times = np.arange(samples.shape[0]) * every * settings.dt
    F_x = samples[:, : cfg.N]
    if cfg.markovian:
        F_y = -0.5j * cfg.Gamma * F_x.sum(axis=1)
    else:
        F_y = samples[:, cfg.N]
    return CoefficientSeries(times, F_x, F_y), samples[:, K:].reshape(-1, 2, 2)


def evolve_one_qubit_coefficients(
    cfg: ModelConfig, settings: IntegratorSettings, t_final: float
) -> CoefficientSeries:
    """Fixed-step RK4 trajectory of (F_x, F_y) from zero initial data."""
    if cfg.M != 1:
        raise ValueError("evolve_one_qubit_coefficients needs M = 1")
    series, _ = _one_qubit_run(cfg, settings, t_final)
    return series


# -- two qubits ----------------------------------------------------------------


def two_qubit_generator(F_x: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """4x4 matrix L with d/dt f_k(t,s) = L(t) f_k(t,s), shared by every channel and column.

    ``F_x`` has shape (>=2, 4): the quadratures of cavities 1 and 2.
    """
    a1, a2 = cfg.qubit_cavity_coupling[:2]
    w1, w2 = cfg.qubit_freq[:2]
    A11, A12, A21, A22 = F_x[0]
    B11, B12, B21, B22 = F_x[1]
    return np.array(
        [
            [1j * w1 + a1 * A11, a2 * B21, a1 * A21 + a2 * (B22 + B12), -a2 * B21],
            [-a1 * A22, 1j * w2 + a1 * (A11 + A21) + a2 * B22, a1 * A22, a2 * B12],
            [a1 * A21, a2 * B11, 1j * w1 + a1 * A11 + a2 * (B22 + B12), -a2 * B11],
            [-a1 * A12, a1 * (A11 + A21) + a2 * B12, a1 * A12, 1j * w2 + a2 * B22],
        ]
    )


def boundary_source(cfg: ModelConfig) -> np.ndarray:
    """Constant part S of the boundary map, shape (channels, 4)."""
    K = cfg.N if cfg.markovian else cfg.N + 1
    S = np.zeros((K, 4), dtype=complex)
    S[0, 0] = np.conj(cfg.qubit_cavity_coupling[0])
    S[1, 3] = np.conj(cfg.qubit_cavity_coupling[1])
    return S


class TwoQubitCoefficientGrid:
    """Triangular grid of two-time coefficients f_k^{p,q}(t, s_j), s_j <= t.

    ``columns[:, j, :]`` holds f(t, s_j) with shape (4, channels); ``F`` holds
    the quadratures at ``F_time`` (shape (channels, 4)).

    Every column obeys the same linear equation d/dt f = L(t) f, so an RK4 step
    is one 4x4 matrix applied to all columns. The kernel-weighted column sum
    is carried along with the columns, which makes each stage quadrature
    O(1) instead of a pass over the grid.
    """

    def __init__(self, cfg: ModelConfig, settings: IntegratorSettings, t_final: float):
        if cfg.M != 2:
            raise ValueError("two-qubit grid needs M = 2")
        self.cfg = cfg
        self.settings = settings
        self.dt = settings.dt
        self.ds = settings.dt * settings.s_thinning
        self.nsteps = settings.num_steps(t_final)
        self.amp, self.lam = channel_rates(cfg)
        if cfg.markovian:
            self.amp, self.lam = self.amp[: cfg.N], self.lam[: cfg.N]
        self.K = self.amp.size
        self.B = boundary_matrix(cfg)
        self.S = boundary_source(cfg)
        max_cols = self.nsteps // settings.s_thinning + 1
        nbytes = 16.0 * 4 * self.K * max_cols
        if nbytes > settings.max_grid_bytes:
            raise IntegrationError(
                f"grid needs {nbytes / 1e9:.2f} GB > budget {settings.max_grid_bytes / 1e9:.2f} GB;"
                " raise s_thinning or dt"
            )
        self.columns = np.zeros((4, max_cols, self.K), dtype=complex)
        self.s = np.zeros(max_cols)
        self.ncols = 1
        self.step_index = 0
        self.t = 0.0
        self.F = np.zeros((self.K, 4), dtype=complex)
        self.F_time = 0.0
        self.columns[:, 0, :] = self.S.T  # f(0, 0) with all F = 0
        # running sum_j exp(-lam (t - s_j)) f(t, s_j), shape (4, K)
        self._T = self.columns[:, 0, :].copy()
        self._solve_cache: dict[float, np.ndarray] = {}

    @property
    def s_values(self) -> np.ndarray:
        return self.s[: self.ncols]

    def active(self) -> np.ndarray:
        """Retained columns, shape (4, ncols, channels)."""
        return self.columns[:, : self.ncols, :]

    def F_x(self, F: np.ndarray | None = None) -> np.ndarray:
        F = self.F if F is None else F
        return F[: self.cfg.N]

    def F_y(self, F: np.ndarray | None = None) -> np.ndarray:
        F = self.F if F is None else F
        if self.cfg.markovian:
            return -0.5j * self.cfg.Gamma * F[: self.cfg.N].sum(axis=0)
        return F[self.cfg.N]

    def boundary(self, F: np.ndarray) -> np.ndarray:
        return self.S + self.B @ F

    def _panel_inverse(self, h: float) -> np.ndarray:
        key = round(h / self.dt, 9)
        inv = self._solve_cache.get(key)
        if inv is None:
            inv = np.linalg.inv(np.eye(self.K) - 0.5 * h * self.amp[:, None] * self.B)
            self._solve_cache[key] = inv
        return inv

    def _close(self, R: np.ndarray, h: float, last: np.ndarray, e_last: np.ndarray) -> np.ndarray:
        """Add the last panel [s_last, tau] and solve for F(tau); ``last`` is f(tau, s_last) (4, K)."""
        if h <= 1e-12 * self.dt:
            return R
        R = R + 0.5 * h * (self.amp * e_last)[:, None] * last.T
        return self._panel_inverse(h) @ (R + 0.5 * h * self.amp[:, None] * self.S)

    def quadrature(self, tau: float | None = None, cols: np.ndarray | None = None) -> np.ndarray:
        """F(tau) by the trapezoidal rule over stored columns (a full pass over the grid).

        ``cols`` defaults to the current columns, taken as values at time ``tau``.
        The last panel [s_last, tau] closes with the boundary value f(tau, tau),
        which depends linearly on F(tau); that small system is solved exactly.
        """
        tau = self.t if tau is None else tau
        cols = self.active() if cols is None else cols
        n = cols.shape[1]
        s = self.s[:n]
        decay = np.exp(-self.lam[None, :] * (tau - s[:, None]))  # (n, K)
        if n > 1:
            w = np.full(n, self.ds)
            w[0] = w[-1] = 0.5 * self.ds
            R = self.amp[:, None] * np.einsum("pjk,jk->kp", cols, decay * w[:, None])
        else:
            R = np.zeros((self.K, 4), dtype=complex)
        return self._close(R, tau - s[n - 1], cols[:, n - 1, :], decay[n - 1])

    def _stage_F(self, A: np.ndarray, tau: float) -> np.ndarray:
        """Quadrature at ``tau`` of the stage columns A @ f(t, .) using the running sum."""
        n = self.ncols
        t0 = self.t
        last = A @ self.columns[:, n - 1, :]
        e_last = np.exp(-self.lam * (tau - self.s[n - 1]))
        if n > 1:
            first = self.columns[:, 0, :]
            e_first = np.exp(-self.lam * (tau - self.s[0]))
            bulk = np.exp(-self.lam * (tau - t0)) * (A @ self._T) - 0.5 * e_first * (A @ first)
            bulk -= 0.5 * e_last * last
            R = self.ds * self.amp[:, None] * bulk.T
        else:
            R = np.zeros((self.K, 4), dtype=complex)
        return self._close(R, tau - self.s[n - 1], last, e_last)

    def march(
        self,
        passenger: np.ndarray | None = None,
        passenger_rhs: Callable | None = None,
        on_sample: Callable | None = None,
    ):
        """Advance to t_final with RK4, optionally co-integrating ``passenger``.

        ``passenger_rhs(tau, y, F)`` is evaluated at every RK stage with the
        stage quadratures F, so the passenger moves in lock-step with the grid.
        ``on_sample(grid, y)`` is called at t = 0 and every ``sample_every`` steps.
        """
        dt = self.dt
        every = self.settings.sample_every
        thin = self.settings.s_thinning
        eye = np.eye(4)
        y = passenger
        if on_sample is not None:
            on_sample(self, y)
        for step in range(self.nsteps):
            t0 = self.t
            n = self.ncols

            F1 = self.F
            L1 = two_qubit_generator(self.F_x(F1), self.cfg)
            A2 = eye + 0.5 * dt * L1
            F2 = self._stage_F(A2, t0 + 0.5 * dt)
            L2 = two_qubit_generator(self.F_x(F2), self.cfg)
            A3 = eye + 0.5 * dt * L2 @ A2
            F3 = self._stage_F(A3, t0 + 0.5 * dt)
            L3 = two_qubit_generator(self.F_x(F3), self.cfg)
            A4 = eye + dt * L3 @ A3
            F4 = self._stage_F(A4, t0 + dt)
            L4 = two_qubit_generator(self.F_x(F4), self.cfg)
            P = eye + dt / 6.0 * (L1 + 2.0 * L2 @ A2 + 2.0 * L3 @ A3 + L4 @ A4)

            if y is not None:
                q1 = passenger_rhs(t0, y, F1)
                q2 = passenger_rhs(t0 + 0.5 * dt, y + 0.5 * dt * q1, F2)
                q3 = passenger_rhs(t0 + 0.5 * dt, y + 0.5 * dt * q2, F3)
                q4 = passenger_rhs(t0 + dt, y + dt * q3, F4)
                y = y + dt / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4)

            F_new = self._stage_F(P, t0 + dt)
            flat = self.columns[:, :n, :].reshape(4, n * self.K)
            flat[...] = P @ flat
            self._T = np.exp(-self.lam * dt) * (P @ self._T)

            self.step_index = step + 1
            self.t = self.step_index * dt
            self.F = F_new
            self.F_time = self.t
            if self.step_index % thin == 0:
                self.s[n] = self.t
                self.columns[:, n, :] = self.boundary(self.F).T
                self._T += self.columns[:, n, :]
                self.ncols = n + 1
            if not np.all(np.isfinite(self.F)) or (y is not None and not np.all(np.isfinite(y))):
                raise IntegrationError("non-finite coefficients", self.t)
            if on_sample is not None and self.step_index % every == 0:
                on_sample(self, y)
        return y


def two_qubit_boundary(grid: TwoQubitCoefficientGrid, cfg: ModelConfig) -> dict:
    """Boundary values f_k^{p,q}(t, t) from the current quadratures.

    Returns ``{"x": array (N, 4), "y": array (4,)}``.
    """
    if abs(grid.F_time - grid.t) > 1e-12:
        raise ValueError(f"stale quadratures: F at t={grid.F_time}, grid at t={grid.t}")
    if cfg is not grid.cfg:
        raise ValueError("grid was built for a different config")
    N = cfg.N
    F = grid.F
    W = cfg.cavity_coupling.copy()
    np.fill_diagonal(W, 0.0)
    F_x = F[:N]
    F_y = grid.F_y(F)
    f_x = -1j * (W @ F_x) - 1j * F_y[None, :]
    f_x[0, 0] += np.conj(cfg.qubit_cavity_coupling[0])
    f_x[1, 3] += np.conj(cfg.qubit_cavity_coupling[1])
    f_y = -1j * F_x.sum(axis=0)
    return {"x": f_x, "y": f_y}


def evolve_two_qubit_coefficients(
    cfg: ModelConfig, settings: IntegratorSettings, t_final: float
) -> CoefficientSeries:
    """March the triangular grid from zero data; sample F every ``sample_every`` steps."""
    grid = TwoQubitCoefficientGrid(cfg, settings, t_final)
    times, fx, fy = [], [], []

    def record(g, _):
        times.append(g.t)
        fx.append(g.F_x().copy())
        fy.append(g.F_y().copy())

    grid.march(on_sample=record)
    return CoefficientSeries(np.array(times), np.array(fx), np.array(fy))


def dump_coefficients(series: CoefficientSeries, path, Gamma: float = 1.0) -> None:
    """Debug CSV: Gamma_t then Re/Im of every F."""
    fx = series.F_x.reshape(len(series.times), -1)
    fy = np.asarray(series.F_y).reshape(len(series.times), -1)
    two = series.F_x.ndim == 3
    names = []
    for n in range(series.F_x.shape[1]):
        if two:
            names += [f"F_x{n + 1}^{p}{q}" for p, q in COMPONENTS]
        else:
            names.append(f"F_x{n + 1}")
    names += [f"F_y^{p}{q}" for p, q in COMPONENTS] if two else ["F_y"]
    data = np.concatenate([fx, fy], axis=1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Gamma_t"] + [f"{k}_{part}" for k in names for part in ("re", "im")])
        for t, row in zip(series.times, data):
            vals = [Gamma * t]
            for z in row:
                vals += [z.real, z.imag]
            w.writerow([repr(float(v)) for v in vals])
