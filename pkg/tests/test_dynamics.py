import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from chdyn import NumericalFailure, PreconditionError
from chdyn.dynamics import (
    advection_matrix,
    assemble_system,
    chemical_potential,
    energy,
    initial_state,
    integrate,
    nonlinear_jacobian,
    nonlinear_term,
    project_initial_datum,
    rhs,
    step_backward_euler,
    step_convex_split,
)
from chdyn.potentials import YosidaParams, make_split, yosida
from chdyn.scenario import build_scenario
from chdyn.velocity import shear_field, stream_function_field

EPS = 0.1


def _system(ops, basis, bulk="regular", kappa=0.0, velocity=None, tau=(1.0, 1.0), eta=1.0, c=1.5):
    splits = (make_split(bulk, c), make_split(bulk, c))
    return assemble_system(ops, basis, splits, YosidaParams(EPS, eta), tau[0], tau[1], kappa, velocity)


@pytest.fixture(scope="module")
def small(small_ops):
    from chdyn.spectral import eigendecompose

    return small_ops, eigendecompose(small_ops, 20)


def _scalar_log_derivative(m0, eps, c):
    """(beta_eps + pi)(m0) for the logarithmic split, from a bracketing root solve."""
    J = brentq(lambda s: s + eps * np.log((1 + s) / (1 - s)) - m0, -1 + 1e-15, 1 - 1e-15, xtol=1e-15)
    return (m0 - J) / eps - 2 * c * m0


def test_relaxation_matrix_is_identity_for_unit_tau(desk_ops, desk_basis):
    sy = _system(desk_ops, desk_basis)
    assert np.max(np.abs(sy.B - np.eye(64))) < 1e-10
    np.testing.assert_array_equal(sy.B, sy.B.T)


def test_kappa_shifts_dn(small):
    sy = _system(*small, kappa=0.1)
    assert sy.Dn[0, 0] == pytest.approx(0.1)
    assert not sy.conserve


def test_unequal_tau_gives_weighted_gram(small):
    ops, basis = small
    sy = _system(ops, basis, tau=(2.0, 0.5))
    mesh = ops.mesh
    E = basis.vectors
    W = 2.0 * mesh.bulk_weights + 0.5 * mesh.boundary_weights
    np.testing.assert_allclose(sy.B, E.T @ (W[:, None] * E), atol=1e-12)


def test_bad_parameters(small):
    with pytest.raises(PreconditionError):
        _system(*small, kappa=-1.0)
    with pytest.raises(PreconditionError):
        _system(*small, tau=(-1.0, 1.0))


def test_advection_matrix(desk_ops, desk_basis, rng):
    assert np.all(advection_matrix(_system(desk_ops, desk_basis), 0.0) == 0)
    sy = _system(desk_ops, desk_basis, velocity=stream_function_field(2 * np.pi, 1.0))
    raw = advection_matrix(sy, 0.0, "raw")
    assert np.max(np.abs(raw[0])) < 1e-12
    U = advection_matrix(sy, 0.0)
    for _ in range(5):
        y = rng.standard_normal(64)
        assert abs(y @ U @ y) < 1e-12


def test_nonlinear_term_constant_state(desk_ops, desk_basis):
    m0, c = 0.3, 1.5
    sy = _system(desk_ops, desk_basis, bulk="log", c=c)
    S = desk_basis.mesh.total_measure
    rho_bar = np.zeros(64)
    rho_bar[0] = m0 * np.sqrt(S)
    F = nonlinear_term(sy, rho_bar)
    expected = np.zeros(64)
    expected[0] = _scalar_log_derivative(m0, EPS, c) * np.sqrt(S)
    np.testing.assert_allclose(F, expected, atol=1e-10)


def test_nonlinear_term_vanishes_at_zero(desk_ops, desk_basis):
    sy = _system(desk_ops, desk_basis)
    assert np.all(nonlinear_term(sy, np.zeros(64)) == 0)


def test_jacobian_matches_differences(small, rng):
    sy = _system(*small, bulk="log")
    y = 0.2 * rng.standard_normal(20)
    J = nonlinear_jacobian(sy, y)
    h = 1e-6
    fd = np.column_stack([(nonlinear_term(sy, y + h * e) - nonlinear_term(sy, y - h * e)) / (2 * h) for e in np.eye(20)])
    np.testing.assert_allclose(J, fd, atol=1e-6)


def test_rhs_equilibria(desk_ops, desk_basis):
    u = shear_field("sine", 1.0, 2.0)
    sy = _system(desk_ops, desk_basis, velocity=u)
    assert np.all(rhs(sy, 0.3, np.zeros(64)) == 0)
    rho_bar = np.zeros(64)
    rho_bar[0] = 0.4 * np.sqrt(desk_basis.mesh.total_measure)
    assert np.max(np.abs(rhs(sy, 0.3, rho_bar))) < 1e-12


def test_rhs_mass_drift_with_kappa(desk_ops, desk_basis):
    kappa, m0, c = 0.01, 0.3, 1.5
    sy = _system(desk_ops, desk_basis, bulk="log", kappa=kappa, c=c)
    S = desk_basis.mesh.total_measure
    rho_bar = np.zeros(64)
    rho_bar[0] = m0 * np.sqrt(S)
    rate = rhs(sy, 0.0, rho_bar)
    F1 = _scalar_log_derivative(m0, EPS, c) * np.sqrt(S)
    # one-mode reduction: (1/kappa + B11) rho_1' + F_1 = 0 with B11 = 1
    assert rate[0] == pytest.approx(-kappa * F1 / (1 + kappa), rel=1e-10)
    assert np.max(np.abs(rate[1:])) < 1e-12


def test_chemical_potential(desk_ops, desk_basis, rng):
    sy = _system(desk_ops, desk_basis, bulk="log")
    assert np.all(chemical_potential(sy, np.zeros(64), np.zeros(64)) == 0)
    m0 = -0.2
    rho_bar = np.zeros(64)
    rho_bar[0] = m0 * np.sqrt(desk_basis.mesh.total_measure)
    mu = chemical_potential(sy, rho_bar, rhs(sy, 0.0, rho_bar))
    np.testing.assert_allclose(sy.nodal(mu), _scalar_log_derivative(m0, EPS, 1.5), atol=1e-10)


def test_chemical_potential_against_nodal_quadrature(small, rng):
    ops, basis = small
    sy = _system(ops, basis, bulk="log", tau=(0.7, 1.3), velocity=shear_field("couette", 1.0))
    mesh = ops.mesh
    y = 0.1 * rng.standard_normal(20)
    rate = rhs(sy, 0.0, y)
    mu = chemical_potential(sy, y, rate)
    E = basis.vectors
    idx = mesh.boundary_index
    rho, dr = E @ y, E @ rate
    gb = 0.7 * dr + yosida(sy.bulk.graph, EPS, rho) + sy.bulk.pi(rho)
    gg = 1.3 * dr[idx] + yosida(sy.boundary.graph, EPS, rho[idx]) + sy.boundary.pi(rho[idx])
    expected = basis.lambdas * y + E.T @ (mesh.bulk_weights * gb) + E[idx].T @ (mesh.boundary_weights[idx] * gg)
    assert np.max(np.abs(mu - expected)) < 1e-10


def test_project_initial_datum(desk_basis):
    e = project_initial_datum(desk_basis.mode(7), desk_basis)
    assert e[7] == pytest.approx(1.0) and np.sum(np.abs(np.delete(e, 7))) < 1e-10
    c = project_initial_datum(desk_basis.mesh.constant(0.2), desk_basis)
    assert np.max(np.abs(c[1:])) < 1e-12


def test_backward_euler_equilibrium(small):
    sy = _system(*small, velocity=shear_field("sine", 1.0))
    st0 = initial_state(sy, np.zeros(20))
    st1 = step_backward_euler(sy, st0, 0.1)
    assert np.all(st1.rho_bar == 0) and st1.newton_iterations <= 1
    st2 = step_convex_split(sy, st0, 0.1)
    assert np.all(st2.rho_bar == 0)


def test_newton_residual_below_tolerance(small, rng):
    ops, basis = small
    sy = _system(ops, basis, bulk="log", velocity=shear_field("sine", 1.0))
    y0 = 0.3 * rng.standard_normal(20)
    y0[0] = 0.0
    dt, tol = 0.05, 1e-11
    st1 = step_backward_euler(sy, initial_state(sy, y0), dt, tol)
    U = advection_matrix(sy, dt)
    A = np.diag(sy.inv_dn) + sy.B
    V = sy.D - sy.inv_dn[:, None] * U
    r = A @ (st1.rho_bar - y0) + dt * (V @ st1.rho_bar + nonlinear_term(sy, st1.rho_bar))
    assert np.linalg.norm(r[1:]) < tol * 10


def test_convex_split_agrees_with_backward_euler_as_dt_shrinks():
    sc = build_scenario(nx=16, ny=9, n_modes=20, t_end=0.2, dt=0.02)
    diffs = []
    for dt in (0.02, 0.01, 0.005):
        a = sc.run(dt=dt)[1].rho[-1]
        b = sc.run(dt=dt, stepper="convex_split")[1].rho[-1]
        diffs.append(np.linalg.norm(a - b))
    ratios = np.array(diffs[:-1]) / np.array(diffs[1:])
    assert np.all((ratios > 1.7) & (ratios < 2.3)), ratios


def test_trajectory_shape_and_thinning():
    sc = build_scenario(nx=16, ny=9, n_modes=20, t_end=0.1, dt=0.01, velocity=shear_field("sine", 1.0))
    _, full = sc.run()
    _, thin = sc.run(output_every=3)
    assert len(full) == 11 and np.all(np.diff(full.times) > 0)
    np.testing.assert_allclose(thin.times, [0, 0.03, 0.06, 0.09, 0.1], atol=1e-15)
    np.testing.assert_array_equal(thin.rho[-1], full.rho[-1])
    assert thin.dissipation[-1] == full.dissipation[-1]
    for col in (full.rho, full.mu, full.rates, full.mass, full.energy, full.min_rho):
        assert len(col) == len(full)


def test_integrate_rejects_bad_input(small):
    sy = _system(*small)
    with pytest.raises(PreconditionError):
        integrate(sy, np.zeros(20), 0.0, 1.0)
    with pytest.raises(PreconditionError):
        integrate(sy, np.zeros(20), 0.1, 1.0, stepper="rk4")
    with pytest.raises(PreconditionError):
        step_backward_euler(sy, initial_state(sy, np.zeros(20)), -0.1)


def test_unreachable_tolerance_raises_numerical_failure(small, rng):
    sy = _system(*small, bulk="log")
    y0 = 0.3 * rng.standard_normal(20)
    with pytest.raises(NumericalFailure):
        step_backward_euler(sy, initial_state(sy, y0), 0.1, newton_tol=1e-300, max_iter=1)


def test_energy_of_constant_state(desk_ops, desk_basis):
    sy = _system(desk_ops, desk_basis)
    m0 = 0.5
    rho_bar = np.zeros(64)
    rho_bar[0] = m0 * np.sqrt(desk_basis.mesh.total_measure)
    # regular split: envelope of r^4/4 at m0 plus 1/4 - m0^2/2, over bulk and boundary
    J = brentq(lambda s: s + EPS * s**3 - m0, 0, 1, xtol=1e-15)
    density = (m0 - J) ** 2 / (2 * EPS) + J**4 / 4 + 0.25 - m0**2 / 2
    assert energy(sy, rho_bar) == pytest.approx(density * desk_basis.mesh.total_measure, rel=1e-12)


_SC = build_scenario(nx=12, ny=7, n_modes=16, velocity=stream_function_field(2 * np.pi, 1.0))
_SY = _SC.system()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 5.0))
def test_skew_advection_is_energy_neutral(seed, t):
    y = np.random.default_rng(seed).standard_normal(16)
    U = advection_matrix(_SY, t)
    assert abs(y @ U @ y) < 1e-12 * (1 + y @ y)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_nonlinear_term_lipschitz(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(16), rng.standard_normal(16)
    L = 1.0 / _SY.yosida.bulk_step + _SY.bulk.pi_lipschitz
    Lg = 1.0 / _SY.yosida.boundary_step + _SY.boundary.pi_lipschitz
    diff = np.linalg.norm(nonlinear_term(_SY, a) - nonlinear_term(_SY, b))
    assert diff <= max(L, Lg) * np.linalg.norm(a - b) * (1 + 1e-12)


def test_drift_rate_equals_kappa_times_mean_mu(small, rng):
    ops, basis = small
    kappa = 0.05
    sy = _system(ops, basis, bulk="log", kappa=kappa, velocity=shear_field("sine", 1.0))
    y = 0.2 * rng.standard_normal(20)
    rate = rhs(sy, 0.1, y)
    mu = chemical_potential(sy, y, rate)
    mesh = ops.mesh
    d_mean = sy.mass(rate)
    expected = -kappa * (mesh.mass_diagonal @ sy.nodal(mu)) / mesh.total_measure
    assert d_mean == pytest.approx(expected, rel=1e-10, abs=1e-14)


def test_pure_flow_without_relaxation_is_solvable(small, rng):
    ops, basis = small
    sy = _system(ops, basis, tau=(0.0, 0.0))
    y = 0.3 * rng.standard_normal(20)
    st1 = step_backward_euler(sy, initial_state(sy, y), 0.01)
    assert np.all(np.isfinite(st1.rho_bar)) and st1.rho_bar[0] == y[0]


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.integers(0, 2**32 - 1))
def test_relaxation_matrix_coercive(tb, tg, seed):
    sy = assemble_system(_SC.ops, _SC.basis, _SC.splits(), YosidaParams(0.05), tb, tg)
    y = np.random.default_rng(seed).standard_normal(16)
    assert y @ sy.B @ y >= min(tb, tg) * (y @ y) * (1 - 1e-12)
