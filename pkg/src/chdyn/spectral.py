"""Eigenbasis of the coupled bulk/surface Laplacian and the solution operators built on it.

The generalized symmetric problem ``K e = lam M e`` (``M`` diagonal) is
reduced to a standard one through ``M^{-1/2} K M^{-1/2}`` and solved densely.
Eigenvectors are ``M``-orthonormal, ascending, and the kernel mode is the
exact normalized constant.
"""

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .exceptions import NumericalFailure, PreconditionError
from .mesh import FunctionPair, _values, generalized_mean

__all__ = [
    "EigenBasis",
    "eigendecompose",
    "project",
    "reconstruct",
    "apply_n_operator",
    "star_norm",
    "solve_elliptic",
    "dump_spectrum",
]

KERNEL_REL_TOL = 1e-10
MEAN_ZERO_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class EigenBasis:
    mesh: object
    lambdas: np.ndarray
    vectors: np.ndarray  # (n_nodes, n_modes), columns are nodal eigenvectors
    raw_kernel_eigenvalue: float

    @property
    def n_modes(self):
        return self.lambdas.size

    def mode(self, j):
        """Eigenpair ``j`` (0-based) as a :class:`FunctionPair`."""
        return FunctionPair(self.mesh, self.vectors[:, j])

    def truncate(self, n):
        if not 1 <= n <= self.n_modes:
            raise ValueError(f"cannot truncate {self.n_modes} modes to {n}")
        return EigenBasis(self.mesh, self.lambdas[:n], self.vectors[:, :n], self.raw_kernel_eigenvalue)


def eigendecompose(ops, n_modes):
    mesh = ops.mesh
    N = mesh.size
    if not 2 <= n_modes <= N:
        raise PreconditionError(f"n_modes must lie in [2, {N}], got {n_modes}")
    m = mesh.mass_diagonal
    s = 1.0 / np.sqrt(m)
    A = ops.stiffness.toarray() * s[:, None] * s[None, :]
    A = 0.5 * (A + A.T)
    try:
        lam, Y = la.eigh(A, subset_by_index=[0, n_modes - 1], driver="evr")
    except la.LinAlgError as exc:
        raise NumericalFailure(f"eigensolver failed: {exc}") from exc
    vecs = Y * s[:, None]

    raw0 = float(lam[0])
    if not abs(raw0) < KERNEL_REL_TOL * lam[1]:
        raise NumericalFailure(f"no isolated zero eigenvalue: lambda_1={raw0:g}, lambda_2={lam[1]:g}")
    lam = lam.copy()
    lam[0] = 0.0
    vecs[:, 0] = 1.0 / np.sqrt(mesh.total_measure)

    # deterministic sign: largest-magnitude entry positive
    for j in range(1, n_modes):
        k = np.argmax(np.abs(vecs[:, j]))
        if vecs[k, j] < 0:
            vecs[:, j] *= -1.0
    vecs.setflags(write=False)
    lam.setflags(write=False)
    return EigenBasis(mesh, lam, vecs, raw0)


def project(p, basis, n=None):
    """Coefficients ``(p, e^j)_H`` for the first ``n`` modes."""
    n = basis.n_modes if n is None else n
    if n > basis.n_modes:
        raise ValueError(f"requested {n} coefficients from a basis of {basis.n_modes}")
    v = _values(p)
    if v.shape != (basis.mesh.size,):
        raise ValueError(f"dimension mismatch: field of shape {v.shape}")
    return basis.vectors[:, :n].T @ (basis.mesh.mass_diagonal * v)


def reconstruct(coeffs, basis):
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1 or coeffs.size > basis.n_modes:
        raise ValueError(f"expected at most {basis.n_modes} coefficients, got shape {coeffs.shape}")
    return FunctionPair(basis.mesh, basis.vectors[:, : coeffs.size] @ coeffs)


def _check_mean_zero(p, basis):
    v = _values(p)
    mesh = basis.mesh
    norm = np.sqrt(v @ (mesh.mass_diagonal * v))
    mean = generalized_mean(v, mesh)
    if abs(mean) > MEAN_ZERO_TOL * max(norm, np.finfo(float).tiny):
        raise PreconditionError(f"operator N needs mean-zero data, got mean {mean:.3e}")
    return v


def apply_n_operator(p, basis):
    """``N p``: the mean-zero pair ``xi`` with ``a(xi, v) = (p, v)_H`` on the basis span."""
    v = _check_mean_zero(p, basis)
    c = project(v, basis)
    c[0] = 0.0
    c[1:] /= basis.lambdas[1:]
    return reconstruct(c, basis)


def star_norm(p, basis):
    v = _check_mean_zero(p, basis)
    c = project(v, basis)[1:]
    return float(np.sqrt(np.sum(c * c / basis.lambdas[1:])))


def solve_elliptic(g, gamma, ops, gamma_prime=None, tol=1e-10, max_iter=50):
    """Solve ``K w + W_G gamma(w_G) = M g`` for a monotone Lipschitz ``gamma``.

    ``gamma`` acts pointwise on the boundary trace; ``W_G`` carries the
    boundary quadrature weights. When ``gamma`` is flat the stiffness alone is
    singular, so the data must have zero generalized mean (after subtracting
    ``gamma``) and the solution is normalized to zero mean.

    Damped Newton on the residual measured in the ``M^{-1}`` norm.
    """
    mesh = ops.mesh
    m = mesh.mass_diagonal
    wg = mesh.boundary_weights
    bidx = mesh.boundary_index
    K = ops.stiffness
    rhs = m * _values(g)
    if gamma_prime is None:
        def gamma_prime(r, h=1e-7):
            return (gamma(r + h) - gamma(r - h)) / (2 * h)

    def boundary_term(w):
        out = np.zeros(mesh.size)
        out[bidx] = wg[bidx] * gamma(w[bidx])
        return out

    def residual(w):
        return K @ w + boundary_term(w) - rhs

    def dual_norm(r):
        return float(np.sqrt(r @ (r / m)))

    scale = max(1.0, dual_norm(rhs))
    ones = np.ones(mesh.size)
    w = np.zeros(mesh.size)
    Kd = K.toarray()
    for _ in range(max_iter):
        r = residual(w)
        if dual_norm(r) < tol * scale:
            return FunctionPair(mesh, w)
        d = np.zeros(mesh.size)
        d[bidx] = wg[bidx] * gamma_prime(w[bidx])
        J = Kd + np.diag(d)
        if np.max(d) <= 0.0:
            # constant kernel: bordered system with zero generalized mean
            flux = ones @ (rhs - boundary_term(w))
            if abs(flux) > 1e-9 * max(1.0, np.abs(rhs).sum()):
                raise PreconditionError(
                    f"incompatible data: net source {flux:.3e} with no boundary absorption"
                )
            n = mesh.size
            big = np.zeros((n + 1, n + 1))
            big[:n, :n] = J
            big[:n, n] = m
            big[n, :n] = m
            sol = la.solve(big, np.concatenate([-r, [-(m @ w)]]), assume_a="sym")
            step = sol[:n]
        else:
            step = la.solve(J, -r, assume_a="sym")
        t = 1.0
        base = dual_norm(r)
        while t > 1e-4 and dual_norm(residual(w + t * step)) > (1 - 1e-4 * t) * base:
            t *= 0.5
        w = w + t * step
    r = residual(w)
    if dual_norm(r) < tol * scale:
        return FunctionPair(mesh, w)
    raise NumericalFailure(f"elliptic Newton did not converge: residual {dual_norm(r):.3e}")


def dump_spectrum(basis, path):
    """Write ``(j, lambda_j)`` rows (1-based ``j``) to a CSV file."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "lambda"])
        for j, lam in enumerate(basis.lambdas, start=1):
            writer.writerow([j, repr(float(lam))])
