"""Divergence-free velocity fields tangential to the strip boundary.

Two analytic families are provided. Shear flows ``u = (a(t) u1(y), 0)`` are
exactly divergence free and tangential on the grid. Stream-function flows
``u = (d_y psi, -d_x psi)`` with ``psi`` constant on both boundary rows are
exactly tangential; their centered-difference divergence is ``O(h^2)``.
Fields can be added and scaled, which is how perturbed velocities
``u1 + delta * w`` are built.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Modulation",
    "VelocityField",
    "ShearField",
    "StreamFunctionField",
    "ZeroField",
    "ConstantField",
    "shear_field",
    "stream_function_field",
    "validate_field",
    "l2l3_norm",
]


@dataclass(frozen=True)
class Modulation:
    """Temporal factor ``a(t)``: ``constant`` (1) or ``sinusoidal`` (``cos(omega t)``)."""

    kind: str = "constant"
    omega: float = 2 * np.pi

    def __post_init__(self):
        if self.kind not in ("constant", "sinusoidal"):
            raise ValueError(f"unknown modulation {self.kind!r}")

    def __call__(self, t):
        return 1.0 if self.kind == "constant" else float(np.cos(self.omega * t))

    def derivative(self, t):
        return 0.0 if self.kind == "constant" else float(-self.omega * np.sin(self.omega * t))


class VelocityField:
    """Base class: ``sample(x, y, t) -> (u1, u2)`` at nodal coordinates."""

    #: expected order of the discrete divergence defect (``None`` means exactly zero)
    divergence_order = None

    def sample(self, x, y, t):
        raise NotImplementedError

    def sample_dt(self, x, y, t):
        raise NotImplementedError

    def nodal(self, mesh, t):
        X, Y = mesh.grid()
        return self.sample(X, Y, t)

    def __add__(self, other):
        return SumField((self, other))

    def __mul__(self, c):
        return ScaledField(self, float(c))

    __rmul__ = __mul__


@dataclass(frozen=True)
class ZeroField(VelocityField):
    def sample(self, x, y, t):
        z = np.zeros(np.shape(x))
        return z, z.copy()

    sample_dt = sample


@dataclass(frozen=True)
class ConstantField(VelocityField):
    """Uniform ``(u1, u2)``: divergence free, tangential only when ``u2 == 0``."""

    u1: float = 0.0
    u2: float = 0.0

    def sample(self, x, y, t):
        one = np.ones(np.shape(x))
        return self.u1 * one, self.u2 * one

    def sample_dt(self, x, y, t):
        z = np.zeros(np.shape(x))
        return z, z.copy()


_PROFILES = {
    "uniform": (lambda y, ly: np.ones_like(y)),
    "sine": (lambda y, ly: np.sin(np.pi * y / ly)),
    "couette": (lambda y, ly: y / ly - 0.5),
    "poiseuille": (lambda y, ly: 4.0 * y * (ly - y) / ly**2),
}


@dataclass(frozen=True)
class ShearField(VelocityField):
    profile: str
    ly: float
    amplitude: float = 1.0
    modulation: Modulation = field(default_factory=Modulation)

    def __post_init__(self):
        if self.profile not in _PROFILES:
            raise ValueError(f"unknown shear profile {self.profile!r}; expected one of {sorted(_PROFILES)}")

    def _u1(self, y):
        return self.amplitude * _PROFILES[self.profile](np.asarray(y, dtype=float), self.ly)

    def sample(self, x, y, t):
        u1 = self.modulation(t) * self._u1(y) * np.ones(np.shape(x))
        return u1, np.zeros(np.shape(u1))

    def sample_dt(self, x, y, t):
        u1 = self.modulation.derivative(t) * self._u1(y) * np.ones(np.shape(x))
        return u1, np.zeros(np.shape(u1))


@dataclass(frozen=True)
class StreamFunctionField(VelocityField):
    """``psi = A a(t) sin(2 pi k x / lx) y^2 (ly - y)^2``, vanishing on both boundary rows."""

    lx: float
    ly: float
    amplitude: float = 1.0
    wavenumber: int = 1
    modulation: Modulation = field(default_factory=Modulation)

    divergence_order = 2

    def _gradpsi(self, x, y):
        k = 2 * np.pi * self.wavenumber / self.lx
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        g = y * y * (self.ly - y) ** 2
        dg = 2 * y * (self.ly - y) ** 2 - 2 * y * y * (self.ly - y)
        psi_x = self.amplitude * k * np.cos(k * x) * g
        psi_y = self.amplitude * np.sin(k * x) * dg
        return psi_x, psi_y

    def sample(self, x, y, t):
        psi_x, psi_y = self._gradpsi(x, y)
        a = self.modulation(t)
        return a * psi_y, -a * psi_x

    def sample_dt(self, x, y, t):
        psi_x, psi_y = self._gradpsi(x, y)
        a = self.modulation.derivative(t)
        return a * psi_y, -a * psi_x


@dataclass(frozen=True)
class SumField(VelocityField):
    parts: tuple

    @property
    def divergence_order(self):
        orders = [p.divergence_order for p in self.parts if p.divergence_order is not None]
        return min(orders) if orders else None

    def sample(self, x, y, t):
        u = [p.sample(x, y, t) for p in self.parts]
        return sum(a for a, _ in u), sum(b for _, b in u)

    def sample_dt(self, x, y, t):
        u = [p.sample_dt(x, y, t) for p in self.parts]
        return sum(a for a, _ in u), sum(b for _, b in u)


@dataclass(frozen=True)
class ScaledField(VelocityField):
    base: VelocityField
    factor: float

    @property
    def divergence_order(self):
        return self.base.divergence_order

    def sample(self, x, y, t):
        u1, u2 = self.base.sample(x, y, t)
        return self.factor * u1, self.factor * u2

    def sample_dt(self, x, y, t):
        u1, u2 = self.base.sample_dt(x, y, t)
        return self.factor * u1, self.factor * u2


def shear_field(profile, ly, amplitude=1.0, modulation=None):
    return ShearField(profile, float(ly), float(amplitude), modulation or Modulation())


def stream_function_field(lx, ly, amplitude=1.0, wavenumber=1, modulation=None):
    return StreamFunctionField(float(lx), float(ly), float(amplitude), int(wavenumber), modulation or Modulation())


@dataclass
class FieldReport:
    max_divergence: float
    max_normal: float
    tol: float

    @property
    def passed(self):
        return self.max_divergence <= self.tol and self.max_normal <= self.tol

    @property
    def tangency_ok(self):
        return self.max_normal <= self.tol


def validate_field(field, ops, tol=1e-10, times=(0.0,)):
    """Maximum nodal discrete divergence and boundary normal component over ``times``."""
    mesh = ops.mesh
    bidx = mesh.boundary_index
    max_div = 0.0
    max_nrm = 0.0
    for t in times:
        u1, u2 = field.nodal(mesh, t)
        div = ops.grad_x @ u1 + ops.grad_y @ u2
        max_div = max(max_div, float(np.max(np.abs(div))))
        # u . nu = -u2 on y = 0 and +u2 on y = ly: both vanish iff u2 does
        max_nrm = max(max_nrm, float(np.max(np.abs(u2[bidx]))))
    return FieldReport(max_div, max_nrm, tol)


def l2l3_norm(field, mesh, t_grid):
    """``( int_0^T ||u(t)||_{L^3}^2 dt )^{1/2}`` with trapezoid quadrature in time."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0:
        raise ValueError("time grid must be non-empty")
    vals = np.empty(t_grid.size)
    for k, t in enumerate(t_grid):
        u1, u2 = field.nodal(mesh, t)
        speed = np.sqrt(u1 * u1 + u2 * u2)
        vals[k] = np.sum(mesh.bulk_weights * speed**3) ** (2.0 / 3.0)
    if t_grid.size == 1:
        return 0.0
    return float(np.sqrt(np.trapezoid(vals, t_grid)))
