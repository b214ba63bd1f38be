"""Galerkin reduction onto the eigenbasis and time integration of the coefficient ODEs.

With coefficients ``rho`` and ``mu`` in the first ``n`` eigenpairs the
reduced flow reads::

    rho' - U(t) rho + Dn mu = 0
    B rho' + D rho + F(rho) = mu

with ``D = diag(lambda_j)``, ``Dn = diag(lambda_j + kappa)``, ``B`` the
``tau``-weighted mass Gram matrix and ``F`` the quadrature of the regularized
nonlinearity against each mode. Eliminating ``mu`` gives
``(Dn^{-1} + B) rho' + (D - Dn^{-1} U) rho + F(rho) = 0``.

At ``kappa = 0`` the constant mode decouples: its equation is ``rho_1' = 0``,
so it is frozen and the remaining modes are solved with ``Dn`` restricted to
``j >= 2`` (where it is invertible).
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la

from .exceptions import NumericalFailure, PreconditionError
from .potentials import beta_hat, moreau_envelope, yosida, yosida_derivative
from .spectral import project
from .velocity import ZeroField

__all__ = [
    "GalerkinSystem",
    "GalerkinState",
    "TrajectoryRecord",
    "assemble_system",
    "advection_matrix",
    "nonlinear_term",
    "nonlinear_jacobian",
    "rhs",
    "chemical_potential",
    "energy",
    "step_backward_euler",
    "step_convex_split",
    "project_initial_datum",
    "initial_state",
    "integrate",
    "regularized_tau",
]

NEWTON_TOL = 1e-11
NEWTON_MAXITER = 50
MAX_HALVINGS = 10


def regularized_tau(tau, eps):
    """``max(tau, eps)``: keeps the relaxation matrix ``B`` positive definite."""
    return max(float(tau), float(eps))


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    ops: object
    basis: object
    bulk: object
    boundary: object
    yosida: object
    tau_bulk: float
    tau_bdry: float
    kappa: float
    velocity: object
    advection: str
    B: np.ndarray
    lambdas: np.ndarray
    dn: np.ndarray
    _E: np.ndarray = field(repr=False)
    _Eb: np.ndarray = field(repr=False)
    _gxE: np.ndarray = field(repr=False)
    _gyE: np.ndarray = field(repr=False)
    _mass_row: np.ndarray = field(repr=False)
    _chol: tuple = field(repr=False)

    @property
    def n(self):
        return self.lambdas.size

    @property
    def mesh(self):
        return self.basis.mesh

    @property
    def conserve(self):
        """Exact-conservation path (``kappa == 0``): mode 1 is frozen."""
        return self.kappa == 0

    @property
    def active(self):
        return slice(1, None) if self.conserve else slice(None)

    @property
    def D(self):
        return np.diag(self.lambdas)

    @property
    def Dn(self):
        return np.diag(self.dn)

    @property
    def inv_dn(self):
        out = np.zeros(self.n)
        a = self.active
        out[a] = 1.0 / self.dn[a]
        return out

    @property
    def relaxation(self):
        """``Dn^{-1} + B`` on the active modes."""
        a = self.active
        return np.diag(self.inv_dn[a]) + self.B[a, a]

    def nodal(self, rho_bar):
        """Reconstructed nodal field."""
        return self._E @ rho_bar

    def mass(self, rho_bar):
        """Generalized mean of the reconstructed field."""
        return float(self._mass_row @ rho_bar)


def assemble_system(ops, basis, potentials, yosida_params, tau_bulk, tau_bdry, kappa=0.0,
                    velocity=None, advection="skew"):
    """Build ``B``, ``D``, ``Dn`` and the cached nodal data for a Galerkin run.

    ``potentials`` is the pair ``(bulk_split, boundary_split)``. The ``tau``
    values are used verbatim; see :func:`regularized_tau` for the
    ``max(tau, eps)`` variant.
    """
    if kappa < 0:
        raise PreconditionError(f"kappa must be >= 0, got {kappa}")
    if tau_bulk < 0 or tau_bdry < 0:
        raise PreconditionError("tau values must be nonnegative")
    if advection not in ("skew", "raw"):
        raise PreconditionError(f"advection mode must be 'skew' or 'raw', got {advection!r}")
    mesh = basis.mesh
    bulk, boundary = potentials
    E = np.ascontiguousarray(basis.vectors)
    bidx = mesh.boundary_index
    Eb = E[bidx]
    wb, wg = mesh.bulk_weights, mesh.boundary_weights[bidx]
    B = tau_bulk * (E.T @ (wb[:, None] * E)) + tau_bdry * (Eb.T @ (wg[:, None] * Eb))
    B = 0.5 * (B + B.T)
    lambdas = np.array(basis.lambdas, dtype=float)
    dn = lambdas + kappa
    gxE = np.asarray(ops.grad_x @ E)
    gyE = np.asarray(ops.grad_y @ E)
    mass_row = E.T @ mesh.mass_diagonal / mesh.total_measure

    a = slice(1, None) if kappa == 0 else slice(None)
    inv = 1.0 / dn[a]
    A = np.diag(inv) + B[a, a]
    try:
        chol = la.cho_factor(A)
    except la.LinAlgError as exc:
        raise NumericalFailure(f"relaxation matrix is not positive definite: {exc}") from exc

    return GalerkinSystem(
        ops=ops,
        basis=basis,
        bulk=bulk,
        boundary=boundary,
        yosida=yosida_params,
        tau_bulk=float(tau_bulk),
        tau_bdry=float(tau_bdry),
        kappa=float(kappa),
        velocity=velocity if velocity is not None else ZeroField(),
        advection=advection,
        B=B,
        lambdas=lambdas,
        dn=dn,
        _E=E,
        _Eb=Eb,
        _gxE=gxE,
        _gyE=gyE,
        _mass_row=mass_row,
        _chol=chol,
    )


def advection_matrix(system, t, mode=None):
    """``u_ij = int_Omega e^j u . grad e^i`` (``raw``) or its skew part (``skew``).

    In skew mode the first column of the raw matrix (the net flux
    ``int u . grad e^i``, zero for admissible fields) is dropped before
    antisymmetrizing, so the constant mode is inert in both directions.
    """
    mode = mode or system.advection
    n = system.n
    if isinstance(system.velocity, ZeroField):
        return np.zeros((n, n))
    mesh = system.mesh
    u1, u2 = system.velocity.nodal(mesh, t)
    E = system._E
    wb = mesh.bulk_weights
    raw = system._gxE.T @ ((wb * u1)[:, None] * E) + system._gyE.T @ ((wb * u2)[:, None] * E)
    if mode == "raw":
        return raw
    raw = raw.copy()
    raw[:, 0] = 0.0
    raw[0, :] = 0.0
    return 0.5 * (raw - raw.T)


def _pointwise(system, rho_bar, part):
    rho = system._E @ rho_bar
    rho_b = system._Eb @ rho_bar
    eps_b, eps_g = system.yosida.bulk_step, system.yosida.boundary_step
    gb = np.zeros_like(rho)
    gg = np.zeros_like(rho_b)
    if part in ("full", "beta"):
        gb += yosida(system.bulk.graph, eps_b, rho)
        gg += yosida(system.boundary.graph, eps_g, rho_b)
    if part in ("full", "pi"):
        gb += system.bulk.pi(rho)
        gg += system.boundary.pi(rho_b)
    return gb, gg


def _pointwise_prime(system, rho_bar, part):
    rho = system._E @ rho_bar
    rho_b = system._Eb @ rho_bar
    eps_b, eps_g = system.yosida.bulk_step, system.yosida.boundary_step
    db = np.zeros_like(rho)
    dg = np.zeros_like(rho_b)
    if part in ("full", "beta"):
        db += yosida_derivative(system.bulk.graph, eps_b, rho)
        dg += yosida_derivative(system.boundary.graph, eps_g, rho_b)
    if part in ("full", "pi"):
        db += system.bulk.pi_prime(rho)
        dg += system.boundary.pi_prime(rho_b)
    return db, dg


def nonlinear_term(system, rho_bar, part="full"):
    """Quadrature of ``(beta_eps + pi)(rho)`` (bulk) and ``(beta_G,eps + pi_G)(rho_G)`` against each mode.

    ``part`` selects the monotone (``"beta"``), perturbation (``"pi"``) or
    full contribution.
    """
    mesh = system.mesh
    gb, gg = _pointwise(system, np.asarray(rho_bar, dtype=float), part)
    wg = mesh.boundary_weights[mesh.boundary_index]
    return system._E.T @ (mesh.bulk_weights * gb) + system._Eb.T @ (wg * gg)


def nonlinear_jacobian(system, rho_bar, part="full"):
    mesh = system.mesh
    db, dg = _pointwise_prime(system, np.asarray(rho_bar, dtype=float), part)
    wg = mesh.boundary_weights[mesh.boundary_index]
    E, Eb = system._E, system._Eb
    return E.T @ ((mesh.bulk_weights * db)[:, None] * E) + Eb.T @ ((wg * dg)[:, None] * Eb)


def rhs(system, t, rho_bar):
    """Rate ``rho'`` solving ``(Dn^{-1} + B) rho' = -(D - Dn^{-1} U) rho - F(rho)``."""
    rho_bar = np.asarray(rho_bar, dtype=float)
    U = advection_matrix(system, t)
    forcing = -(system.lambdas * rho_bar) + system.inv_dn * (U @ rho_bar) - nonlinear_term(system, rho_bar)
    rate = np.zeros(system.n)
    a = system.active
    rate[a] = la.cho_solve(system._chol, forcing[a])
    return rate


def chemical_potential(system, rho_bar, rate, nonlinear=None):
    """``mu = B rho' + D rho + F(rho)``; ``nonlinear`` overrides ``F(rho)``."""
    rho_bar = np.asarray(rho_bar, dtype=float)
    if nonlinear is None:
        nonlinear = nonlinear_term(system, rho_bar)
    return system.B @ rate + system.lambdas * rho_bar + nonlinear


def energy(system, rho_bar):
    """``a(rho, rho)/2 + sum w (beta_hat_eps + pi_hat)`` over bulk and boundary nodes."""
    rho_bar = np.asarray(rho_bar, dtype=float)
    mesh = system.mesh
    rho = system._E @ rho_bar
    rho_b = system._Eb @ rho_bar
    wg = mesh.boundary_weights[mesh.boundary_index]
    bulk = moreau_envelope(system.bulk.graph, system.yosida.bulk_step, rho) + system.bulk.pi_hat(rho)
    bdry = moreau_envelope(system.boundary.graph, system.yosida.boundary_step, rho_b) + system.boundary.pi_hat(rho_b)
    return float(0.5 * np.sum(system.lambdas * rho_bar**2) + mesh.bulk_weights @ bulk + wg @ bdry)


def unregularized_energy(system, rho_bar):
    """Same as :func:`energy` with ``beta_hat`` in place of its envelope (may be ``inf``)."""
    rho_bar = np.asarray(rho_bar, dtype=float)
    mesh = system.mesh
    rho = system._E @ rho_bar
    rho_b = system._Eb @ rho_bar
    wg = mesh.boundary_weights[mesh.boundary_index]
    bulk = beta_hat(system.bulk.graph, rho) + system.bulk.pi_hat(rho)
    bdry = beta_hat(system.boundary.graph, rho_b) + system.boundary.pi_hat(rho_b)
    return float(0.5 * np.sum(system.lambdas * rho_bar**2) + mesh.bulk_weights @ bulk + wg @ bdry)


@dataclass(frozen=True)
class GalerkinState:
    t: float
    rho_bar: np.ndarray
    mu_bar: np.ndarray
    last_rate: np.ndarray
    dissipated: float = 0.0
    work: float = 0.0
    newton_iterations: int = 0


def project_initial_datum(rho0, basis, n=None):
    """Coefficients of the ``H``-orthogonal projection of ``rho0`` on the first ``n`` modes."""
    return project(rho0, basis, n)


def initial_state(system, rho_bar0, t0=0.0):
    rho_bar0 = np.array(rho_bar0, dtype=float)
    rate = rhs(system, t0, rho_bar0)
    mu = chemical_potential(system, rho_bar0, rate)
    return GalerkinState(t0, rho_bar0, mu, rate)


class _StepFailure(Exception):
    pass


def _newton(residual, jacobian, y0, tol, max_iter):
    y = y0.copy()
    for it in range(max_iter + 1):
        r = residual(y)
        nr = np.linalg.norm(r)
        if not np.isfinite(nr):
            raise _StepFailure("non-finite residual")
        if nr <= tol:
            return y, it
        if it == max_iter:
            break
        try:
            dy = la.solve(jacobian(y), -r)
        except la.LinAlgError as exc:
            raise _StepFailure(str(exc)) from exc
        y = y + dy
        # stagnation at the roundoff floor counts as converged
        if np.linalg.norm(dy) <= 1e-15 * (1.0 + np.linalg.norm(y)) and nr <= 1e3 * tol:
            return y, it + 1
    raise _StepFailure(f"Newton residual {nr:.3e} above {tol:.1e} after {max_iter} iterations")


def _relax(system):
    return np.diag(system.inv_dn) + system.B


def _be_single(system, state, dt, tol, max_iter):
    a = system.active
    t1 = state.t + dt
    U = advection_matrix(system, t1)
    V = system.D - system.inv_dn[:, None] * U
    A = _relax(system)
    rho0 = state.rho_bar

    def full(ya):
        y = rho0.copy()
        y[a] = ya
        return y

    def residual(ya):
        y = full(ya)
        r = A @ (y - rho0) + dt * (V @ y + nonlinear_term(system, y))
        return r[a]

    def jacobian(ya):
        J = A + dt * (V + nonlinear_jacobian(system, full(ya)))
        return J[a, a]

    ya, its = _newton(residual, jacobian, rho0[a].copy(), tol, max_iter)
    y = full(ya)
    rate = (y - rho0) / dt
    mu = chemical_potential(system, y, rate)
    work = float(mu @ (U @ y))
    return _finish(system, state, t1, y, mu, rate, work, dt, its)


def _cs_single(system, state, dt, tol, max_iter):
    a = system.active
    t1 = state.t + dt
    rho0 = state.rho_bar
    U = advection_matrix(system, state.t)
    A = _relax(system)
    explicit = -system.inv_dn * (U @ rho0) + nonlinear_term(system, rho0, "pi")

    def full(ya):
        y = rho0.copy()
        y[a] = ya
        return y

    def residual(ya):
        y = full(ya)
        r = A @ (y - rho0) + dt * (system.lambdas * y + nonlinear_term(system, y, "beta") + explicit)
        return r[a]

    def jacobian(ya):
        J = A + dt * (system.D + nonlinear_jacobian(system, full(ya), "beta"))
        return J[a, a]

    ya, its = _newton(residual, jacobian, rho0[a].copy(), tol, max_iter)
    y = full(ya)
    rate = (y - rho0) / dt
    F = nonlinear_term(system, y, "beta") + nonlinear_term(system, rho0, "pi")
    mu = chemical_potential(system, y, rate, nonlinear=F)
    work = float(mu @ (U @ rho0))
    return _finish(system, state, t1, y, mu, rate, work, dt, its)


def _finish(system, state, t1, y, mu, rate, work, dt, its):
    diss = float(mu @ (system.dn * mu) + rate @ (system.B @ rate))
    return GalerkinState(
        t=t1,
        rho_bar=y,
        mu_bar=mu,
        last_rate=rate,
        dissipated=state.dissipated + dt * diss,
        work=state.work + dt * work,
        newton_iterations=state.newton_iterations + its,
    )


def _advance(single, system, state, dt, tol, max_iter, depth=0):
    try:
        return single(system, state, dt, tol, max_iter)
    except _StepFailure as exc:
        if depth >= MAX_HALVINGS:
            raise NumericalFailure(f"step at t={state.t:.6g} failed after {MAX_HALVINGS} halvings: {exc}") from exc
    half = 0.5 * dt
    mid = _advance(single, system, state, half, tol, max_iter, depth + 1)
    return _advance(single, system, mid, half, tol, max_iter, depth + 1)


def step_backward_euler(system, state, dt, newton_tol=NEWTON_TOL, max_iter=NEWTON_MAXITER):
    """Implicit Euler step solved by Newton; ``dt`` is halved on failure (up to 10 times)."""
    if not dt > 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    return _advance(_be_single, system, state, dt, newton_tol, max_iter)


def step_convex_split(system, state, dt, newton_tol=NEWTON_TOL, max_iter=NEWTON_MAXITER):
    """Semi-implicit step: implicit in ``beta_eps`` and ``D``, explicit in ``pi`` and advection."""
    if not dt > 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    return _advance(_cs_single, system, state, dt, newton_tol, max_iter)


STEPPERS = {"backward_euler": step_backward_euler, "convex_split": step_convex_split}


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    rho: np.ndarray
    mu: np.ndarray
    rates: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    work: np.ndarray
    min_rho: np.ndarray
    max_rho: np.ndarray
    dt: float
    stepper: str
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.size

    @property
    def n_modes(self):
        return self.rho.shape[1]

    def with_meta(self, **kw):
        return replace(self, meta={**self.meta, **kw})


def integrate(system, rho_bar0, dt, t_end, stepper="backward_euler", newton_tol=NEWTON_TOL,
              max_iter=NEWTON_MAXITER, output_every=1):
    """Run a stepper from ``t=0`` to ``t_end`` and record every ``output_every`` steps.

    Dissipation and advection work are accumulated at every step, so the
    ledger stays exact when snapshots are thinned.
    """
    if not dt > 0 or not t_end > 0:
        raise PreconditionError("dt and t_end must be positive")
    if stepper not in STEPPERS:
        raise PreconditionError(f"unknown stepper {stepper!r}")
    step = STEPPERS[stepper]
    n_steps = max(1, int(round(t_end / dt)))
    h = t_end / n_steps

    state = initial_state(system, rho_bar0)
    rows = [_snapshot(system, state)]
    for k in range(1, n_steps + 1):
        state = step(system, state, h, newton_tol, max_iter)
        state = replace(state, t=k * h)
        if k % output_every == 0 or k == n_steps:
            rows.append(_snapshot(system, state))
    cols = list(zip(*rows))
    return TrajectoryRecord(
        times=np.array(cols[0]),
        rho=np.array(cols[1]),
        mu=np.array(cols[2]),
        rates=np.array(cols[3]),
        mass=np.array(cols[4]),
        energy=np.array(cols[5]),
        dissipation=np.array(cols[6]),
        work=np.array(cols[7]),
        min_rho=np.array(cols[8]),
        max_rho=np.array(cols[9]),
        dt=h,
        stepper=stepper,
    )


def _snapshot(system, state):
    rho = system.nodal(state.rho_bar)
    return (
        state.t,
        state.rho_bar.copy(),
        state.mu_bar.copy(),
        state.last_rate.copy(),
        system.mass(state.rho_bar),
        energy(system, state.rho_bar),
        state.dissipated,
        state.work,
        float(rho.min()),
        float(rho.max()),
    )
