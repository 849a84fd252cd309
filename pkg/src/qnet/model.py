"""Physical configuration of qubits in a leaky coupled-cavity network.

All rates and frequencies are plain floats; the library does not impose a
unit, but the CLI and the built-in presets work in units of the
cavity-reservoir rate Gamma, so times are Gamma*t.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np


class ConfigError(ValueError):
    """Raised when a configuration cannot be constructed."""


@dataclass(frozen=True)
class Lorentzian:
    """Lorentzian reservoir S(w) = Gamma*gamma^2 / (2*pi*(gamma^2 + (w - center)^2)).

    ``center`` is the lab-frame frequency of the spectral peak. The default
    0.0 places the peak at zero frequency while the cavities sit at their own
    frequencies, which is the literal reading of the exponential kernel
    without an oscillating factor.
    """

    Gamma: float
    gamma: float
    center: float = 0.0

    kind = "lorentzian"


@dataclass(frozen=True)
class Markovian:
    """Flat (delta-correlated) reservoir, the gamma -> infinity limit."""

    Gamma: float

    kind = "markovian"


ReservoirSpec = Union[Lorentzian, Markovian]


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ModelConfig:
    """Qubits, cavity network and reservoir parameters.

    Qubit ``m`` sits in cavity ``m`` (m < M). ``cavity_coupling[p, q]`` is the
    amplitude of a_p^dag a_q; the diagonal is ignored and must be zero.
    """

    qubit_freq: np.ndarray
    cavity_freq: np.ndarray
    qubit_cavity_coupling: np.ndarray
    cavity_coupling: np.ndarray
    reservoir: ReservoirSpec
    num_qubits: int = field(init=False)
    num_cavities: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "qubit_freq", _frozen(self.qubit_freq, float))
        object.__setattr__(self, "cavity_freq", _frozen(self.cavity_freq, float))
        object.__setattr__(
            self, "qubit_cavity_coupling", _frozen(self.qubit_cavity_coupling, complex)
        )
        object.__setattr__(self, "cavity_coupling", _frozen(self.cavity_coupling, complex))
        object.__setattr__(self, "num_qubits", int(self.qubit_freq.size))
        object.__setattr__(self, "num_cavities", int(self.cavity_freq.size))

    @property
    def M(self) -> int:
        return self.num_qubits

    @property
    def N(self) -> int:
        return self.num_cavities

    @property
    def Gamma(self) -> float:
        return float(self.reservoir.Gamma)

    @property
    def markovian(self) -> bool:
        return isinstance(self.reservoir, Markovian)

    def is_isotropic(self, tol: float = 1e-12) -> bool:
        """True for common frequencies, common real couplings."""
        w = self.cavity_freq[0]
        if np.any(np.abs(self.cavity_freq - w) > tol):
            return False
        if np.any(np.abs(self.qubit_freq - self.qubit_freq[0]) > tol):
            return False
        oa = self.qubit_cavity_coupling
        if np.any(np.abs(oa - oa[0]) > tol) or abs(oa[0].imag) > tol:
            return False
        N = self.N
        if N == 1:
            return True
        off = self.cavity_coupling[~np.eye(N, dtype=bool)]
        return bool(np.all(np.abs(off - off[0]) <= tol) and abs(off[0].imag) <= tol)

    def replace(self, **changes) -> "ModelConfig":
        kw = dict(
            qubit_freq=self.qubit_freq,
            cavity_freq=self.cavity_freq,
            qubit_cavity_coupling=self.qubit_cavity_coupling,
            cavity_coupling=self.cavity_coupling,
            reservoir=self.reservoir,
        )
        kw.update(changes)
        return ModelConfig(**kw)


@dataclass
class ValidationReport:
    issues: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "ok" if self.ok else "; ".join(self.issues)


def make_isotropic_config(
    M: int,
    N: int,
    omega: float,
    Omega_a: float,
    Omega: float,
    reservoir: ReservoirSpec,
    omega_a: float | None = None,
) -> ModelConfig:
    """Resonant, isotropic network: every cavity at ``omega``, every pair coupled by ``Omega``.

    ``omega_a`` defaults to ``omega`` (qubits resonant with the cavities).
    """
    if M not in (1, 2):
        raise ConfigError(f"M must be 1 or 2, got {M}")
    if N < M:
        raise ConfigError(f"need M <= N, got M={M}, N={N}")
    if Omega_a < 0:
        raise ConfigError("Omega_a must be nonnegative")
    if reservoir.Gamma <= 0:
        raise ConfigError("Gamma must be positive")
    if isinstance(reservoir, Lorentzian) and reservoir.gamma <= 0:
        raise ConfigError("gamma must be positive")
    wa = omega if omega_a is None else omega_a
    cc = np.full((N, N), float(Omega), dtype=complex)
    np.fill_diagonal(cc, 0.0)
    return ModelConfig(
        qubit_freq=np.full(M, float(wa)),
        cavity_freq=np.full(N, float(omega)),
        qubit_cavity_coupling=np.full(M, float(Omega_a), dtype=complex),
        cavity_coupling=cc,
        reservoir=reservoir,
    )


def validate_config(c: ModelConfig) -> ValidationReport:
    rep = ValidationReport()
    M, N = c.M, c.N
    if M not in (1, 2):
        rep.issues.append(f"dimension: M={M} not in {{1, 2}}")
    if N < max(M, 1):
        rep.issues.append(f"dimension: M={M} exceeds N={N}")
    if c.qubit_cavity_coupling.shape != (M,):
        rep.issues.append("dimension: qubit_cavity_coupling must have length M")
    if c.cavity_coupling.shape != (N, N):
        rep.issues.append("dimension: cavity_coupling must be N x N")
    else:
        W = c.cavity_coupling
        if np.any(np.abs(np.diag(W)) > 0):
            rep.issues.append("cavity_coupling: diagonal must be zero")
        if np.max(np.abs(W - W.conj().T), initial=0.0) > 1e-12:
            rep.issues.append("cavity_coupling: Hermiticity violated (Omega_pq != conj(Omega_qp))")
    for name in ("qubit_freq", "cavity_freq", "qubit_cavity_coupling", "cavity_coupling"):
        if not np.all(np.isfinite(getattr(c, name))):
            rep.issues.append(f"{name}: non-finite entries")
    res = c.reservoir
    if not res.Gamma > 0:
        rep.issues.append("reservoir: nonpositive rate Gamma")
    if isinstance(res, Lorentzian) and not res.gamma > 0:
        rep.issues.append("reservoir: nonpositive bandwidth gamma")
    return rep


def cavity_correlation(c: ModelConfig, n: int, t, s):
    """alpha_n(t, s) = exp(-i w_cn (t - s)) for cavity index ``n`` (0-based)."""
    return np.exp(-1j * c.cavity_freq[n] * (np.asarray(t) - np.asarray(s)))


def bath_correlation(c: ModelConfig, t, s):
    """Reservoir memory kernel (Gamma*gamma/2) exp(-gamma |t - s|).

    A nonzero Lorentzian ``center`` adds the phase exp(-i center (t - s)).
    """
    res = c.reservoir
    if not isinstance(res, Lorentzian):
        raise ValueError("Markovian reservoir: kernel is a delta distribution")
    tau = np.asarray(t, dtype=float) - np.asarray(s, dtype=float)
    out = 0.5 * res.Gamma * res.gamma * np.exp(-res.gamma * np.abs(tau))
    if res.center != 0.0:
        out = out * np.exp(-1j * res.center * tau)
    return out


def spectral_density(c: ModelConfig, w):
    res = c.reservoir
    w = np.asarray(w, dtype=float)
    if isinstance(res, Markovian):
        return np.full_like(w, res.Gamma / (2 * np.pi))
    return res.Gamma * res.gamma**2 / (2 * np.pi * (res.gamma**2 + (w - res.center) ** 2))


# -- JSON documents ---------------------------------------------------------


def _flatten(doc: dict) -> dict:
    flat = {}
    for k, v in doc.items():
        if k == "reservoir" and isinstance(v, dict):
            for rk, rv in v.items():
                flat[f"reservoir.{rk}"] = rv
        else:
            flat[k] = v
    return flat


def _cplx(x) -> complex:
    return complex(x.replace(" ", "")) if isinstance(x, str) else complex(x)


def _per_element(value, n, name, conv=float):
    if isinstance(value, (list, tuple)):
        if len(value) != n:
            raise ConfigError(f"{name}: expected {n} entries, got {len(value)}")
        return np.array([conv(v) for v in value])
    return np.full(n, conv(value))


def config_from_dict(doc: dict) -> ModelConfig:
    """Build a config from a flat (or nested ``reservoir``) key-value document.

    Keys: ``M, N, omega, omega_a, Omega_a, Omega`` and ``reservoir.kind``,
    ``reservoir.Gamma``, ``reservoir.gamma``, ``reservoir.center``. Scalars
    mean isotropic values; arrays override per element (``Omega`` as an N x N
    matrix). Complex entries are written as strings, e.g. ``"0.2+0.1j"``.
    """
    d = _flatten(doc)
    try:
        M = int(d["M"])
        N = int(d["N"])
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]}") from None
    if M not in (1, 2) or N < M:
        raise ConfigError(f"dimension violation: M={M}, N={N}")
    kind = str(d.get("reservoir.kind", "markovian")).lower()
    Gamma = float(d.get("reservoir.Gamma", 1.0))
    if kind == "markovian":
        res: ReservoirSpec = Markovian(Gamma)
    elif kind == "lorentzian":
        if "reservoir.gamma" not in d:
            raise ConfigError("lorentzian reservoir needs reservoir.gamma")
        res = Lorentzian(Gamma, float(d["reservoir.gamma"]), float(d.get("reservoir.center", 0.0)))
    else:
        raise ConfigError(f"unknown reservoir.kind {kind!r}")

    try:
        wc = _per_element(d.get("omega", 0.0), N, "omega")
        wa = _per_element(d.get("omega_a", wc[0] if np.all(wc == wc[0]) else wc[:M].tolist()),
                          M, "omega_a")
        Oa = _per_element(d.get("Omega_a", 0.0), M, "Omega_a", _cplx)
        Om = d.get("Omega", 0.0)
        if isinstance(Om, (list, tuple)):
            W = np.array([[_cplx(x) for x in row] for row in Om])
            if W.shape != (N, N):
                raise ConfigError(f"Omega: expected {N}x{N} matrix, got {W.shape}")
        else:
            val = _cplx(Om)
            W = np.triu(np.full((N, N), val), 1)
            W = W + W.conj().T
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return ModelConfig(
        qubit_freq=wa, cavity_freq=wc, qubit_cavity_coupling=Oa, cavity_coupling=W, reservoir=res
    )


def _num(z):
    z = complex(z)
    return z.real if z.imag == 0 else str(z).strip("()")


def config_to_dict(c: ModelConfig) -> dict:
    """Fully resolved (per-element) document; round-trips through config_from_dict."""
    res = c.reservoir
    out = {
        "M": c.M,
        "N": c.N,
        "omega": c.cavity_freq.tolist(),
        "omega_a": c.qubit_freq.tolist(),
        "Omega_a": [_num(z) for z in c.qubit_cavity_coupling],
        "Omega": [[_num(z) for z in row] for row in c.cavity_coupling],
        "reservoir.kind": res.kind,
        "reservoir.Gamma": res.Gamma,
    }
    if isinstance(res, Lorentzian):
        out["reservoir.gamma"] = res.gamma
        out["reservoir.center"] = res.center
    return out
