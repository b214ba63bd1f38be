import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chdyn import PreconditionError
from chdyn.mesh import assemble_operators, build_strip_mesh, generalized_mean, inner_a, inner_h
from chdyn.spectral import (
    apply_n_operator,
    dump_spectrum,
    eigendecompose,
    project,
    reconstruct,
    solve_elliptic,
    star_norm,
)


def test_kernel_mode(desk_basis):
    mesh = desk_basis.mesh
    assert desk_basis.lambdas[0] == 0.0
    assert abs(desk_basis.raw_kernel_eigenvalue) < 1e-10 * desk_basis.lambdas[1]
    np.testing.assert_allclose(desk_basis.vectors[:, 0], 1 / np.sqrt(mesh.total_measure), rtol=1e-15)
    assert np.all(np.diff(desk_basis.lambdas) >= 0)


def test_orthonormality(desk_basis):
    E = desk_basis.vectors
    G = E.T @ (desk_basis.mesh.mass_diagonal[:, None] * E)
    assert np.max(np.abs(G - np.eye(64))) < 1e-8


def test_cosine_mode_eigenvalue(desk_basis, desk_ops):
    mesh = desk_basis.mesh
    v = mesh.sample(lambda x, y: np.cos(2 * np.pi * x / mesh.lx)).values
    lam = (2 / mesh.hx**2) * (1 - np.cos(2 * np.pi * mesh.hx / mesh.lx))
    resid = desk_ops.stiffness @ v - lam * mesh.mass_diagonal * v
    assert np.max(np.abs(resid)) < 1e-10
    # the first nonzero eigenvalue is this mode (double: cos and sin)
    np.testing.assert_allclose(desk_basis.lambdas[1:3], lam, rtol=1e-10)


def test_eigendecompose_rejects_bad_counts(small_ops):
    with pytest.raises(PreconditionError):
        eigendecompose(small_ops, 1)
    with pytest.raises(PreconditionError):
        eigendecompose(small_ops, small_ops.mesh.size + 1)


def test_deterministic(small_ops):
    a, b = eigendecompose(small_ops, 10), eigendecompose(small_ops, 10)
    np.testing.assert_array_equal(a.vectors, b.vectors)


def test_project_examples(desk_basis):
    mesh = desk_basis.mesh
    c = project(desk_basis.mode(4), desk_basis)
    expected = np.zeros(64)
    expected[4] = 1.0
    np.testing.assert_allclose(c, expected, atol=1e-12)
    c = project(mesh.constant(0.7), desk_basis)
    assert c[0] == pytest.approx(0.7 * np.sqrt(mesh.total_measure), rel=1e-14)
    assert np.max(np.abs(c[1:])) < 1e-12


def test_reconstruct_roundtrip(small_basis, rng):
    v = rng.standard_normal(small_basis.mesh.size)
    np.testing.assert_allclose(reconstruct(project(v, small_basis), small_basis).values, v, atol=1e-11)


def test_n_operator_on_modes(desk_basis):
    for j in (1, 5, 40):
        xi = apply_n_operator(desk_basis.mode(j), desk_basis)
        np.testing.assert_allclose(xi.values, desk_basis.vectors[:, j] / desk_basis.lambdas[j], atol=1e-8)
    with pytest.raises(PreconditionError):
        apply_n_operator(desk_basis.mode(0), desk_basis)


def _mean_zero(rng, mesh):
    v = rng.standard_normal(mesh.size)
    return v - generalized_mean(v, mesh)


def test_n_operator_weak_form(small_basis, small_ops, rng):
    p = _mean_zero(rng, small_basis.mesh)
    xi = apply_n_operator(p, small_basis)
    res = [abs(inner_a(xi, small_basis.vectors[:, j], small_ops) - inner_h(p, small_basis.vectors[:, j], small_basis.mesh))
           for j in range(small_basis.n_modes)]
    assert max(res) < 1e-9


def test_star_norm(desk_basis, rng):
    assert star_norm(desk_basis.mode(3), desk_basis) == pytest.approx(desk_basis.lambdas[3] ** -0.5, rel=1e-12)
    assert star_norm(np.zeros(desk_basis.mesh.size), desk_basis) == 0.0
    # duality in the span of the basis
    c = rng.standard_normal(64)
    c[0] = 0.0
    p = reconstruct(c, desk_basis)
    lhs = inner_h(p, apply_n_operator(p, desk_basis))
    assert lhs == pytest.approx(star_norm(p, desk_basis) ** 2, rel=1e-10)


def test_elliptic_identity_gamma(desk_ops):
    mesh = desk_ops.mesh
    # zero bulk source, unit boundary source: the constant 1 solves the problem
    g = np.zeros(mesh.size)
    g[mesh.boundary_index] = 1.0 * mesh.boundary_weights[mesh.boundary_index] / mesh.mass_diagonal[mesh.boundary_index]
    w = solve_elliptic(g, lambda r: r, desk_ops, lambda r: np.ones_like(r))
    np.testing.assert_allclose(w.values, 1.0, atol=1e-12)
    w0 = solve_elliptic(np.zeros(mesh.size), lambda r: r, desk_ops, lambda r: np.ones_like(r))
    assert np.max(np.abs(w0.values)) == 0.0


def test_elliptic_matches_n_operator(small_ops, small_basis, rng):
    p = _mean_zero(rng, small_ops.mesh)
    w = solve_elliptic(p, lambda r: np.zeros_like(r), small_ops, lambda r: np.zeros_like(r))
    np.testing.assert_allclose(w.values, apply_n_operator(p, small_basis).values, atol=1e-9)


def test_elliptic_incompatible_data(small_ops):
    with pytest.raises(PreconditionError):
        solve_elliptic(np.ones(small_ops.mesh.size), lambda r: np.zeros_like(r), small_ops, lambda r: np.zeros_like(r))


def test_elliptic_nonlinear(small_ops, rng):
    g = rng.standard_normal(small_ops.mesh.size)
    w = solve_elliptic(g, lambda r: r**3 + r, small_ops, lambda r: 3 * r * r + 1)
    mesh = small_ops.mesh
    b = np.zeros(mesh.size)
    idx = mesh.boundary_index
    b[idx] = mesh.boundary_weights[idx] * (w.values[idx] ** 3 + w.values[idx])
    np.testing.assert_allclose(small_ops.stiffness @ w.values + b, mesh.mass_diagonal * g, atol=1e-9)


def test_dump_spectrum(small_ops, tmp_path):
    basis = eigendecompose(small_ops, 5)
    path = tmp_path / "spec.csv"
    dump_spectrum(basis, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "j,lambda" and len(lines) == 6
    assert lines[1] == "1,0.0"


_SMALL_OPS = assemble_operators(build_strip_mesh(8, 5, 2 * np.pi, 1.0))
_SMALL_BASIS = eigendecompose(_SMALL_OPS, 12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projection_is_contractive(seed):
    v = np.random.default_rng(seed).standard_normal(_SMALL_OPS.mesh.size)
    assert np.linalg.norm(project(v, _SMALL_BASIS)) <= np.sqrt(inner_h(v, v, _SMALL_OPS.mesh)) * (1 + 1e-12)
