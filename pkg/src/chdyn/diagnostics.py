"""Executable checks and experiment harnesses over Galerkin trajectories.

Every report is a pure function of a trajectory and the system that produced
it. Experiments that need several runs dispatch them to a thread pool and
assemble the reports once all runs have finished.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import TrajectoryRecord, advection_matrix
from .potentials import yosida
from .velocity import l2l3_norm

__all__ = [
    "TrajectoryRecord",
    "MassDriftReport",
    "LedgerReport",
    "SeparationReport",
    "DependenceReport",
    "EpsilonStudy",
    "mass_drift",
    "kappa_scaling_study",
    "energy_ledger",
    "energy_increments",
    "separation_report",
    "dependence_lhs",
    "continuous_dependence_experiment",
    "epsilon_refinement_study",
    "beta_norm_series",
    "bound_monitor",
    "compare_bounds",
    "dt_refinement_study",
    "skew_defect",
]


def _map(fn, items, max_workers=None):
    items = list(items)
    if max_workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


def _time_l2(values, times):
    if times.size < 2:
        return 0.0
    return float(np.sqrt(np.trapezoid(values, times)))


def _grams(system):
    mesh = system.mesh
    E, Eb = system._E, system._Eb
    wg = mesh.boundary_weights[mesh.boundary_index]
    return E.T @ (mesh.bulk_weights[:, None] * E), Eb.T @ (wg[:, None] * Eb)


# -- conservation -----------------------------------------------------------


@dataclass
class MassDriftReport:
    times: np.ndarray
    drift: np.ndarray
    kappa: float
    tol: float

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.drift)))

    @property
    def end(self):
        return float(self.drift[-1])

    @property
    def passed(self):
        """Conservation verdict; ``None`` when ``kappa > 0`` (drift is expected)."""
        return self.max_abs < self.tol if self.kappa == 0 else None


def mass_drift(traj, m0, kappa, tol=1e-9):
    return MassDriftReport(traj.times, traj.mass - m0, float(kappa), tol)


def kappa_scaling_study(scenario, kappas, max_workers=None):
    """End-time mass drift for each ``kappa`` and the ratios of consecutive drifts."""
    m0 = scenario.m0
    runs = _map(lambda k: scenario.run(kappa=k)[1], kappas, max_workers)
    drifts = np.array([mass_drift(tr, m0, k).end for tr, k in zip(runs, kappas)])
    ratios = drifts[:-1] / drifts[1:]
    return drifts, ratios


# -- energy -----------------------------------------------------------------


@dataclass
class LedgerReport:
    times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    work: np.ndarray
    residual: np.ndarray

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.residual)))


def energy_ledger(traj, system=None):
    """``E(t) + int dissipation - int advection work - E(0)``.

    Dissipation is ``mu.Dn.mu + rho'.B.rho'`` (gradient of ``mu`` plus the
    ``tau``-weighted rates, and the ``kappa`` term); the work term is the
    quadrature of ``int rho u . grad mu``. Both are accumulated per step with
    the stepper's own time levels.
    """
    res = traj.energy + traj.dissipation - traj.work - traj.energy[0]
    return LedgerReport(traj.times, traj.energy, traj.dissipation, traj.work, res)


def energy_increments(traj):
    return np.diff(traj.energy)


# -- separation -------------------------------------------------------------


@dataclass
class SeparationReport:
    min_rho: float
    max_rho: float
    margin: float
    floor: float
    precondition_ok: bool = True

    @property
    def passed(self):
        return self.precondition_ok and self.margin >= self.floor


def separation_report(traj, floor=0.01, rho0=None):
    """Distance of the reconstructed order parameter to ``+-1`` over all nodes and times."""
    lo = float(np.min(traj.min_rho))
    hi = float(np.max(traj.max_rho))
    ok = True
    if rho0 is not None:
        v = np.asarray(rho0, dtype=float)
        ok = bool(v.max() < 1.0 and v.min() > -1.0)
    return SeparationReport(lo, hi, min(1.0 - hi, lo + 1.0), float(floor), ok)


# -- continuous dependence --------------------------------------------------


@dataclass
class DependenceReport:
    delta: float
    lhs: float
    rhs: float
    parts: dict = field(default_factory=dict)

    @property
    def ratio(self):
        return self.lhs / self.rhs if self.rhs > 0 else float("nan")


def dependence_lhs(traj1, traj2, system):
    """Norm of the difference of two runs on the same time grid.

    ``sup_t ||rho||_* + ||rho||_{L2(V)} + sqrt(tau) sup_t ||rho'||`` (bulk and
    boundary), with the dual norm evaluated in the truncated basis on the
    mean-zero part of the difference.
    """
    if traj1.times.shape != traj2.times.shape or np.any(traj1.times != traj2.times):
        raise ValueError("trajectories must share their time grid")
    lam = system.lambdas
    d = traj1.rho - traj2.rho
    r = traj1.rates - traj2.rates
    star = np.sqrt(np.sum(d[:, 1:] ** 2 / lam[1:], axis=1))
    vnorm2 = np.sum((1.0 + lam) * d * d, axis=1)
    Gb, Gg = _grams(system)
    rb = np.sqrt(np.maximum(np.einsum("ti,ij,tj->t", r, Gb, r), 0.0))
    rg = np.sqrt(np.maximum(np.einsum("ti,ij,tj->t", r, Gg, r), 0.0))
    parts = {
        "star_sup": float(star.max()),
        "V_L2": _time_l2(vnorm2, traj1.times),
        "rate_bulk_sup": float(np.sqrt(system.tau_bulk) * rb.max()),
        "rate_bdry_sup": float(np.sqrt(system.tau_bdry) * rg.max()),
    }
    return float(sum(parts.values())), parts


def continuous_dependence_experiment(scenario, u1, w, deltas, max_workers=None):
    """Runs ``u1`` and ``u1 + delta w`` for every ``delta`` and compares.

    Returns one :class:`DependenceReport` per ``delta``; the ratio lhs/rhs
    estimates the constant of the stability bound.
    """
    base_system, base = scenario.run(velocity=u1)
    fields = [u1 if d == 0 else u1 + d * w for d in deltas]
    runs = _map(lambda f: scenario.run(velocity=f)[1], fields, max_workers)
    reports = []
    for d, tr in zip(deltas, runs):
        lhs, parts = dependence_lhs(base, tr, base_system)
        rhs = abs(d) * l2l3_norm(w, scenario.mesh, base.times)
        reports.append(DependenceReport(float(d), lhs, rhs, parts))
    return reports


# -- epsilon refinement -----------------------------------------------------


def beta_norm_series(traj, system):
    """``||(beta_eps(rho), beta_G,eps(rho_G))||_H`` at each recorded time."""
    mesh = system.mesh
    wg = mesh.boundary_weights[mesh.boundary_index]
    out = np.empty(len(traj))
    for k, rb in enumerate(traj.rho):
        rho = system._E @ rb
        rho_g = system._Eb @ rb
        zb = yosida(system.bulk.graph, system.yosida.bulk_step, rho)
        zg = yosida(system.boundary.graph, system.yosida.boundary_step, rho_g)
        out[k] = np.sqrt(mesh.bulk_weights @ zb**2 + wg @ zg**2)
    return out


@dataclass
class EpsilonStudy:
    eps: np.ndarray
    cauchy_diff: np.ndarray  # between rung k and k+1 (nan for the last rung)
    beta_norm: np.ndarray

    @property
    def diffs_nonincreasing(self):
        d = self.cauchy_diff[:-1]
        return bool(np.all(np.diff(d) < 0))

    @property
    def beta_growth(self):
        return float(self.beta_norm.max() / self.beta_norm.min() - 1.0)

    def rows(self):
        return list(zip(self.eps.tolist(), self.cauchy_diff.tolist(), self.beta_norm.tolist()))


def epsilon_refinement_study(scenario, eps_ladder, max_workers=None):
    """Cauchy differences ``max_t ||rho_eps - rho_eps'||_H`` along a decreasing ladder."""
    eps_ladder = [float(e) for e in eps_ladder]
    if any(b >= a for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise ValueError("eps ladder must be strictly decreasing")
    runs = _map(lambda e: scenario.run(eps=e), eps_ladder, max_workers)
    diffs = np.full(len(runs), np.nan)
    for k in range(len(runs) - 1):
        a, b = runs[k][1], runs[k + 1][1]
        diffs[k] = float(np.max(np.linalg.norm(a.rho - b.rho, axis=1)))
    bnorm = np.array([beta_norm_series(tr, sy).max() for sy, tr in runs])
    return EpsilonStudy(np.array(eps_ladder), diffs, bnorm)


# -- a priori bounds --------------------------------------------------------


def bound_monitor(traj, system):
    """Every norm on the left of the global a priori bound, computed in the basis."""
    lam = system.lambdas
    t = traj.times
    Gb, Gg = _grams(system)
    r = traj.rates
    zeta = beta_norm_series(traj, system)
    norms = {
        "mu_L2V": _time_l2(np.sum((1 + lam) * traj.mu**2, axis=1), t),
        "rho_LinfV": float(np.sqrt(np.max(np.sum((1 + lam) * traj.rho**2, axis=1)))),
        "rho_L2W": _time_l2(np.sum((1 + lam) ** 2 * traj.rho**2, axis=1), t),
        "rate_L2Vstar": _time_l2(np.sum(r * r / (1 + lam), axis=1), t),
        "zeta_L2H": _time_l2(zeta**2, t),
        "rate_bulk_L2H": float(np.sqrt(system.tau_bulk)) * _time_l2(np.einsum("ti,ij,tj->t", r, Gb, r), t),
        "rate_bdry_L2H": float(np.sqrt(system.tau_bdry)) * _time_l2(np.einsum("ti,ij,tj->t", r, Gg, r), t),
    }
    norms["finite"] = bool(np.all(np.isfinite(list(norms.values()))))
    return norms


def compare_bounds(a, b):
    """Largest relative change between two :func:`bound_monitor` reports."""
    worst = 0.0
    for k, va in a.items():
        if k == "finite":
            continue
        vb = b[k]
        scale = max(abs(va), abs(vb))
        if scale > 0:
            worst = max(worst, abs(va - vb) / scale)
    return worst


# -- time discretization ----------------------------------------------------


def dt_refinement_study(scenario, dts, max_workers=None):
    """End-time differences between consecutive ``dt`` rungs and observed orders."""
    runs = _map(lambda h: scenario.run(dt=h, output_every=10**9)[1], dts, max_workers)
    ends = [tr.rho[-1] for tr in runs]
    diffs = np.array([np.linalg.norm(a - b) for a, b in zip(ends, ends[1:])])
    ratios = np.asarray(dts[:-1], dtype=float) / np.asarray(dts[1:], dtype=float)
    orders = np.log(diffs[:-1] / diffs[1:]) / np.log(ratios[1:])
    return diffs, orders


def skew_defect(system, t=0.0):
    """``||U_raw + U_raw^T||_F``: how far the raw advection matrix is from skew."""
    U = advection_matrix(system, t, mode="raw")
    return float(np.linalg.norm(U + U.T))
