"""Periodic strip geometry, coupled bulk/boundary fields and the discrete forms.

The domain is ``(0, lx) x (0, ly)``, periodic in ``x``. Its boundary consists of
the two rows ``y = 0`` and ``y = ly``, each a circle of length ``lx`` carrying
a 1D periodic Laplace-Beltrami operator. Nodal values are stored row-major in
a flat vector of length ``nx * ny`` (index ``j * nx + i`` for ``x_i, y_j``);
the boundary trace of a field is simply its first and last rows, so every
discrete field is automatically a bulk/boundary pair with matching trace.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import PreconditionError

__all__ = [
    "StripMesh",
    "FunctionPair",
    "DiscreteOperators",
    "build_strip_mesh",
    "assemble_operators",
    "generalized_mean",
    "inner_h",
    "inner_a",
]


@dataclass(frozen=True, eq=False)
class StripMesh:
    nx: int
    ny: int
    lx: float
    ly: float
    hx: float
    hy: float
    bulk_weights: np.ndarray
    boundary_weights: np.ndarray
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    @property
    def size(self):
        return self.nx * self.ny

    @property
    def area(self):
        """``|Omega|``."""
        return self.lx * self.ly

    @property
    def perimeter(self):
        """``|Gamma|``: two circles of length ``lx``."""
        return 2.0 * self.lx

    @property
    def total_measure(self):
        return self.area + self.perimeter

    @property
    def boundary_index(self):
        """Flat indices of the boundary nodes (row ``y=0`` then row ``y=ly``)."""
        nx, ny = self.nx, self.ny
        return np.concatenate([np.arange(nx), (ny - 1) * nx + np.arange(nx)])

    @property
    def mass_diagonal(self):
        return self.bulk_weights + self.boundary_weights

    def grid(self):
        """Nodal coordinates as flat arrays ``(X, Y)``."""
        X, Y = np.meshgrid(self.x, self.y)
        return X.ravel(), Y.ravel()

    def sample(self, func):
        """Evaluate ``func(x, y)`` at every node and return a :class:`FunctionPair`."""
        X, Y = self.grid()
        values = np.broadcast_to(np.asarray(func(X, Y), dtype=float), X.shape)
        return FunctionPair(self, np.array(values, dtype=float))

    def constant(self, c):
        return FunctionPair(self, np.full(self.size, float(c)))


class FunctionPair:
    """A discrete element ``(v, v_Gamma)`` of the coupled space.

    Only the bulk nodal values are stored; the trace is a view on the boundary
    rows, so ``v_Gamma = v|_Gamma`` holds by construction.
    """

    __slots__ = ("mesh", "values")

    def __init__(self, mesh, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.size,):
            raise ValueError(f"expected {mesh.size} nodal values, got shape {values.shape}")
        self.mesh = mesh
        self.values = values

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def bulk(self):
        """Nodal values as an ``(ny, nx)`` array."""
        return self.values.reshape(self.mesh.ny, self.mesh.nx)

    @property
    def trace(self):
        """Boundary values as a ``(2, nx)`` array: rows ``y=0`` and ``y=ly``."""
        b = self.bulk
        return np.stack([b[0], b[-1]])

    def __add__(self, other):
        return FunctionPair(self.mesh, self.values + _values(other))

    def __sub__(self, other):
        return FunctionPair(self.mesh, self.values - _values(other))

    def __mul__(self, c):
        return FunctionPair(self.mesh, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return FunctionPair(self.mesh, -self.values)

    def __repr__(self):
        return f"FunctionPair(nx={self.mesh.nx}, ny={self.mesh.ny})"


def _values(p):
    return p.values if isinstance(p, FunctionPair) else np.asarray(p, dtype=float)


@dataclass(frozen=True, eq=False)
class DiscreteOperators:
    """Mass, stiffness and gradient matrices on a :class:`StripMesh`.

    ``stiffness`` realizes ``a(w, v) = int_Omega grad w . grad v +
    int_Gamma d_x w d_x v`` through forward-difference energies, which gives
    the usual three-point second differences in both directions and a
    boundary row containing the one-sided normal difference plus the
    tangential Laplace-Beltrami difference.
    """

    mesh: StripMesh
    mass: sp.dia_matrix
    stiffness: sp.csr_matrix
    grad_x: sp.csr_matrix
    grad_y: sp.csr_matrix

    @property
    def mass_diagonal(self):
        return self.mesh.mass_diagonal


def build_strip_mesh(nx, ny, lx, ly):
    """Uniform grid on the periodic strip with trapezoid weights in ``y``."""
    if int(nx) != nx or int(ny) != ny:
        raise PreconditionError("node counts must be integers")
    nx, ny = int(nx), int(ny)
    if nx < 4:
        raise PreconditionError(f"nx must be >= 4, got {nx}")
    if ny < 3:
        raise PreconditionError(f"ny must be >= 3, got {ny}")
    if not (lx > 0 and ly > 0) or not np.isfinite([lx, ly]).all():
        raise PreconditionError(f"domain lengths must be positive, got lx={lx}, ly={ly}")
    lx, ly = float(lx), float(ly)
    hx = lx / nx
    hy = ly / (ny - 1)

    wy = np.full(ny, hy)
    wy[0] = wy[-1] = 0.5 * hy
    bulk = np.repeat(wy * hx, nx)
    bdry = np.zeros(nx * ny)
    bdry[:nx] = hx
    bdry[-nx:] = hx
    for w in (bulk, bdry):
        w.setflags(write=False)

    x = np.arange(nx) * hx
    y = np.arange(ny) * hy
    y[-1] = ly
    return StripMesh(nx, ny, lx, ly, hx, hy, bulk, bdry, x, y)


def _periodic_difference(n, h):
    """Forward difference ``(v[i+1] - v[i]) / h`` with wrap-around."""
    return (sp.eye(n, k=1, format="csr") + sp.eye(n, k=1 - n, format="csr") - sp.eye(n)) / h


def assemble_operators(mesh):
    nx, ny, hx, hy = mesh.nx, mesh.ny, mesh.hx, mesh.hy

    # x-energy per row weighted by that row's total (bulk + boundary) measure
    dx = _periodic_difference(nx, hx)
    lap_x = (dx.T @ dx).tocsr()
    row_weight = mesh.mass_diagonal.reshape(ny, nx)[:, 0]
    kx = sp.kron(sp.diags(row_weight), lap_x)

    # y-energy: sum over the ny-1 cells of hx * hy * ((v[j+1]-v[j]) / hy)^2
    dy = sp.diags([-np.ones(ny - 1), np.ones(ny - 1)], [0, 1], shape=(ny - 1, ny)) / hy
    lap_y = (dy.T @ dy) * hy
    ky = sp.kron(lap_y, sp.eye(nx) * hx)

    K = (kx + ky).tocsr()
    K = ((K + K.T) * 0.5).tocsr()
    K.eliminate_zeros()

    M = sp.diags(mesh.mass_diagonal)

    cx = (sp.eye(nx, k=1) + sp.eye(nx, k=1 - nx) - sp.eye(nx, k=-1) - sp.eye(nx, k=nx - 1)) / (2 * hx)
    gx = sp.kron(sp.eye(ny), cx).tocsr()

    # centered in the interior, second-order one-sided on the boundary rows
    cy = sp.lil_matrix((ny, ny))
    for j in range(1, ny - 1):
        cy[j, j - 1] = -0.5 / hy
        cy[j, j + 1] = 0.5 / hy
    cy[0, :3] = np.array([-1.5, 2.0, -0.5]) / hy
    cy[-1, -3:] = np.array([0.5, -2.0, 1.5]) / hy
    gy = sp.kron(cy.tocsr(), sp.eye(nx)).tocsr()

    return DiscreteOperators(mesh, M, K, gx, gy)


def generalized_mean(p, mesh=None):
    """``(int_Omega v + int_Gamma v_Gamma) / (|Omega| + |Gamma|)``."""
    mesh = mesh if mesh is not None else p.mesh
    v = _values(p)
    return float(mesh.mass_diagonal @ v) / mesh.total_measure


def inner_h(p, q, mesh=None):
    mesh = mesh if mesh is not None else p.mesh
    u, v = _values(p), _values(q)
    if u.shape != v.shape or u.shape[0] != mesh.size:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape} on a mesh of {mesh.size} nodes")
    return float(u @ (mesh.mass_diagonal * v))


def inner_a(p, q, ops):
    u, v = _values(p), _values(q)
    if u.shape != v.shape or u.shape[0] != ops.mesh.size:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape} on a mesh of {ops.mesh.size} nodes")
    return float(u @ (ops.stiffness @ v))
