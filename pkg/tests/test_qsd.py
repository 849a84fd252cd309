import numpy as np
import pytest
from scipy.integrate import simpson

from qnet.model import Lorentzian, Markovian, make_isotropic_config
from qnet.oracle import oracle_trajectory, single_excitation_generator
from qnet.propagator import SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z, initial_state, qubit_op
from qnet.qsd import (
    COMPONENTS,
    IntegrationError,
    IntegratorSettings,
    OneQubitCoefficients,
    TwoQubitCoefficientGrid,
    dump_coefficients,
    evolve_one_qubit_coefficients,
    evolve_two_qubit_coefficients,
    one_qubit_rhs,
    two_qubit_boundary,
    two_qubit_generator,
)


def lor(M=1, N=3, oa=0.3, om=0.2, gam=0.5, w=5.0):
    return make_isotropic_config(M, N, w, oa, om, Lorentzian(1.0, gam))


def test_settings_validation():
    with pytest.raises(ValueError):
        IntegratorSettings(dt=0)
    with pytest.raises(ValueError):
        IntegratorSettings(s_thinning=0)
    with pytest.raises(ValueError):
        IntegratorSettings(scheme="rk45")
    with pytest.raises(ValueError):
        IntegratorSettings(dt=0.3).num_steps(1.0)


def test_rhs_at_zero():
    cfg = lor(oa=0.4).replace(qubit_cavity_coupling=[0.4 + 0.3j])
    d = one_qubit_rhs(OneQubitCoefficients(0.0, np.zeros(3), 0.0), cfg)
    assert d.F_x[0] == pytest.approx(0.4 - 0.3j)
    assert np.all(d.F_x[1:] == 0) and d.F_y == 0


def test_rhs_needs_one_qubit():
    with pytest.raises(ValueError):
        one_qubit_rhs(OneQubitCoefficients(0.0, np.zeros(3), 0.0), lor(M=2))


def test_rhs_matches_written_equations(rng):
    cfg = lor(N=4, oa=0.7, gam=0.8)
    Fx = rng.normal(size=4) + 1j * rng.normal(size=4)
    Fy = complex(rng.normal(), rng.normal())
    d = one_qubit_rhs(OneQubitCoefficients(0.0, Fx, Fy), cfg)
    a, wa, W = 0.7, 5.0, cfg.cavity_coupling
    for n in range(4):
        exp = (np.conj(a) if n == 0 else 0) - 1j * sum(W[n, q] * Fx[q] for q in range(4) if q != n)
        exp += 1j * (wa - 5.0) * Fx[n] + a * Fx[0] * Fx[n] - 1j * Fy
        assert d.F_x[n] == pytest.approx(exp, abs=1e-13)
    exp_y = -0.5j * 0.8 * Fx.sum() + (1j * wa - 0.8) * Fy + a * Fx[0] * Fy
    assert d.F_y == pytest.approx(exp_y, abs=1e-13)


def test_rhs_symmetric_in_spectator_cavities(rng):
    cfg = lor(N=4)
    Fx = rng.normal(size=4) + 1j * rng.normal(size=4)
    Fx[2] = Fx[3] = Fx[1]
    d = one_qubit_rhs(OneQubitCoefficients(0.0, Fx, 0.3j), cfg)
    assert abs(d.F_x[1] - d.F_x[2]) < 1e-15 and abs(d.F_x[1] - d.F_x[3]) < 1e-15


def test_zero_coupling_gives_zero_coefficients():
    s = evolve_one_qubit_coefficients(lor(oa=0.0), IntegratorSettings(dt=1e-2), 20.0)
    assert np.all(s.F_x == 0) and np.all(s.F_y == 0)
    s2 = evolve_two_qubit_coefficients(lor(M=2, oa=0.0), IntegratorSettings(dt=1e-2), 2.0)
    assert np.all(s2.F_x == 0) and np.all(s2.F_y == 0)


def test_initial_coefficients_vanish():
    s = evolve_one_qubit_coefficients(lor(), IntegratorSettings(dt=1e-2), 1.0)
    assert np.all(s.F_x[0] == 0) and s.F_y[0] == 0
    s2 = evolve_two_qubit_coefficients(lor(M=2), IntegratorSettings(dt=1e-2), 0.5)
    assert np.all(s2.F_x[0] == 0) and np.all(s2.F_y[0] == 0)


@pytest.mark.parametrize("res", [Markovian(1.0), Lorentzian(1.0, 0.3)], ids=["markov", "lorentz"])
def test_spectator_cavities_stay_equal(res):
    cfg = make_isotropic_config(1, 6, 5.0, 0.5, 0.3, res)
    s = evolve_one_qubit_coefficients(cfg, IntegratorSettings(dt=1e-3), 200.0)
    assert np.max(np.abs(s.F_x[:, 1:] - s.F_x[:, -1:])) <= 1e-10


def test_rk4_fourth_order():
    cfg = lor(oa=0.8, om=0.4, gam=0.7, w=1.0)
    vals = [evolve_one_qubit_coefficients(cfg, IntegratorSettings(dt=h), 10.0).F_x[-1, 0] for h in (0.04, 0.02, 0.01)]
    ratio = abs(vals[0] - vals[1]) / abs(vals[1] - vals[2])
    assert 14 < ratio < 18


def test_long_time_fixed_point_matches_oracle_decay():
    # one resonant cavity, overdamped: F_x1 settles and rho_ee decays at 2 Re(Omega_a F_x1)
    cfg = make_isotropic_config(1, 1, 0.0, 0.1, 0.0, Markovian(1.0))
    s = evolve_one_qubit_coefficients(cfg, IntegratorSettings(dt=1e-2), 500.0)
    rate_qsd = 2 * (0.1 * s.F_x[-1, 0]).real
    assert abs(s.F_x[-1, 0] - s.F_x[-1000, 0]) < 1e-12
    orc = oracle_trajectory(cfg, initial_state("e", 1), 500.0, dt=0.5)
    pee = orc.states[:, 0, 0].real
    slope = -np.polyfit(orc.times[800:], np.log(pee[800:]), 1)[0]
    lam = np.linalg.eigvals(single_excitation_generator(cfg))
    assert rate_qsd == pytest.approx(slope, rel=1e-6)
    assert rate_qsd == pytest.approx(-2 * lam.imag.max(), rel=1e-9)


def test_markovian_branch_matches_broad_lorentzian():
    base = make_isotropic_config(1, 3, 0.0, 0.5, 2.0, Markovian(1.0))
    st = IntegratorSettings(dt=1e-3)
    m = evolve_one_qubit_coefficients(base, st, 50.0)
    gaps = []
    for g in (100.0, 200.0):
        lz = evolve_one_qubit_coefficients(base.replace(reservoir=Lorentzian(1.0, g)), st, 50.0)
        assert np.max(np.abs(m.F_x - lz.F_x)) <= 1e-3
        gaps.append(np.max(np.abs(m.F_y - lz.F_y)[m.times >= 0.1]))
    # the slaved F_y is approached at rate 1/gamma
    assert gaps[0] / gaps[1] == pytest.approx(2.0, rel=0.05)


def test_blow_up_reported_with_time():
    cfg = make_isotropic_config(1, 2, 0.0, 60.0, 0.0, Markovian(1.0))
    with pytest.raises(IntegrationError) as exc:
        evolve_one_qubit_coefficients(cfg, IntegratorSettings(dt=0.5), 200.0)
    assert exc.value.time is not None and exc.value.time > 0


def test_grid_memory_budget():
    with pytest.raises(IntegrationError, match="budget"):
        TwoQubitCoefficientGrid(lor(M=2), IntegratorSettings(dt=1e-3, max_grid_bytes=1e5), 100.0)


# -- two qubits ------------------------------------------------------------------

S_M1, S_M2 = qubit_op(SIGMA_MINUS, 0, 2), qubit_op(SIGMA_MINUS, 1, 2)
S_Z1, S_Z2 = qubit_op(SIGMA_Z, 0, 2), qubit_op(SIGMA_Z, 1, 2)
BASIS = [S_M1, S_Z1 @ S_M2, S_Z2 @ S_M1, S_M2]


def _project(X):
    mat = np.array([b.ravel() for b in BASIS]).T
    c, *_ = np.linalg.lstsq(mat, X.ravel(), rcond=None)
    assert np.max(np.abs(mat @ c - X.ravel())) < 1e-12
    return c


def test_generator_agrees_with_commutator_on_active_block(rng):
    # d/dt O = [A, O], A = -i H_q - sum_m Omega_am sigma_+^m Obar_m. Only the combinations
    # f^{11} - f^{21} and f^{22} - f^{12} act on states with at most one excitation.
    for _ in range(25):
        w = rng.normal(size=2)
        oa = rng.normal(size=2) + 1j * rng.normal(size=2)
        cfg = make_isotropic_config(2, 2, 0.0, 1.0, 0.1, Markovian(1.0)).replace(
            qubit_freq=w, qubit_cavity_coupling=oa)
        Fx = rng.normal(size=(2, 4)) + 1j * rng.normal(size=(2, 4))
        f = rng.normal(size=4) + 1j * rng.normal(size=4)
        Hq = 0.5 * (w[0] * S_Z1 + w[1] * S_Z2)
        obar = [sum(Fx[m, k] * BASIS[k] for k in range(4)) for m in range(2)]
        A = -1j * Hq - oa[0] * S_M1.conj().T @ obar[0] - oa[1] * S_M2.conj().T @ obar[1]
        O = sum(f[k] * BASIS[k] for k in range(4))
        exact = _project(A @ O - O @ A)
        ours = two_qubit_generator(Fx, cfg) @ f
        assert abs((exact[0] - exact[2]) - (ours[0] - ours[2])) < 1e-12
        assert abs((exact[3] - exact[1]) - (ours[3] - ours[1])) < 1e-12


def test_boundary_at_start():
    cfg = lor(M=2).replace(qubit_cavity_coupling=[0.3 + 0.1j, 0.2 - 0.4j])
    grid = TwoQubitCoefficientGrid(cfg, IntegratorSettings(dt=1e-2), 1.0)
    b = two_qubit_boundary(grid, cfg)
    exp = np.zeros((3, 4), complex)
    exp[0, 0], exp[1, 3] = 0.3 - 0.1j, 0.2 + 0.4j
    assert np.array_equal(b["x"], exp) and np.all(b["y"] == 0)
    assert np.array_equal(grid.columns[:, 0, :3].T, exp)


def test_boundary_decoupled_limit(rng):
    cfg = make_isotropic_config(2, 3, 0.0, 0.3, 0.0, Markovian(1.0)).replace(reservoir=Markovian(0.0))
    grid = TwoQubitCoefficientGrid(cfg, IntegratorSettings(dt=1e-2), 1.0)
    grid.F = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    b = two_qubit_boundary(grid, cfg)
    exp = np.zeros((3, 4), complex)
    exp[0, 0], exp[1, 3] = 0.3, 0.3
    assert np.array_equal(b["x"], exp)


def test_boundary_rejects_stale_or_foreign():
    cfg = lor(M=2)
    grid = TwoQubitCoefficientGrid(cfg, IntegratorSettings(dt=1e-2), 1.0)
    grid.t = 0.5
    with pytest.raises(ValueError, match="stale"):
        two_qubit_boundary(grid, cfg)
    grid.t = 0.0
    with pytest.raises(ValueError):
        two_qubit_boundary(grid, lor(M=2))


def _simpson_F(grid, tau):
    n = grid.ncols
    s = grid.s_values
    decay = np.exp(-grid.lam[None, :] * (tau - s[:, None]))
    vals = grid.active() * (grid.amp[None, None, :] * decay[None])
    return simpson(vals, x=s, axis=1).T


def _run_grid(cfg, T, dt=1e-2):
    grid = TwoQubitCoefficientGrid(cfg, IntegratorSettings(dt=dt), T)
    grid.march()
    return grid


def test_quadratures_match_stored_columns():
    grid = _run_grid(lor(M=2, oa=0.5, gam=0.7), 4.0)
    assert np.max(np.abs(grid.quadrature() - grid.F)) <= 1e-12


def test_reservoir_boundary_against_simpson():
    cfg = lor(M=2, oa=0.5, gam=0.7)
    grid = _run_grid(cfg, 4.0)
    Fs = _simpson_F(grid, grid.t)
    fy = two_qubit_boundary(grid, cfg)["y"]
    assert np.max(np.abs(fy - (-1j) * Fs[:3].sum(axis=0))) <= 1e-4


def test_simpson_consistency():
    cfg = lor(M=2, oa=0.5, gam=0.7)
    grid = _run_grid(cfg, 4.0)
    trap = grid.quadrature()
    # trapezoid on every other column estimates the trapezoid error by Richardson
    n = grid.ncols
    sub = grid.active()[:, ::2, :]
    s = grid.s_values[::2]
    decay = np.exp(-grid.lam[None, :] * (grid.t - s[:, None]))
    w = np.full(s.size, 2 * grid.ds)
    w[0] = w[-1] = grid.ds
    coarse = grid.amp[:, None] * np.einsum("pjk,jk->kp", sub, decay * w[:, None])
    bulk = grid.amp[:, None] * np.einsum(
        "pjk,jk->kp", grid.active(), np.exp(-grid.lam[None, :] * (grid.t - grid.s_values[:, None]))
        * np.r_[0.5, np.ones(n - 2), 0.5][:, None] * grid.ds)
    est = np.abs(bulk - coarse) / 3
    diff = np.abs(_simpson_F(grid, grid.t) - bulk)
    assert np.all(diff <= 10 * est + 1e-14)
    assert np.allclose(trap, bulk, atol=1e-12)


def test_qubit_relabeling_symmetry():
    cfg = lor(M=2, oa=0.4, gam=0.5)
    s = evolve_two_qubit_coefficients(cfg, IntegratorSettings(dt=1e-2), 5.0)
    swap = [3, 2, 1, 0]  # (1,1)<->(2,2), (1,2)<->(2,1)
    assert np.allclose(s.F_x[:, 0, :], s.F_x[:, 1, swap], atol=1e-12)
    assert np.allclose(s.F_x[:, 2, :], s.F_x[:, 2, swap], atol=1e-12)
    assert np.allclose(s.F_y, s.F_y[:, swap], atol=1e-12)


def test_thinning_stays_close():
    cfg = lor(M=2, oa=0.3, gam=0.5)
    a = evolve_two_qubit_coefficients(cfg, IntegratorSettings(dt=1e-2), 5.0)
    b = evolve_two_qubit_coefficients(cfg, IntegratorSettings(dt=1e-2, s_thinning=2), 5.0)
    assert np.max(np.abs(a.F_x - b.F_x)) <= 1e-3 * np.max(np.abs(a.F_x))
    assert len(a.times) == len(b.times)


def test_coefficient_dump(tmp_path):
    s = evolve_two_qubit_coefficients(lor(M=2), IntegratorSettings(dt=1e-2, sample_every=10), 1.0)
    path = tmp_path / "coeff.csv"
    dump_coefficients(s, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("Gamma_t,F_x1^11_re")
    assert len(lines) == len(s.times) + 1
    assert len(COMPONENTS) == 4
