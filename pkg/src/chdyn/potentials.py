"""Maximal monotone graphs, their resolvents and Moreau-Yosida regularizations.

Three odd graphs are supported:

``RegularCubic``
    ``beta(r) = r**3`` with ``beta_hat(r) = r**4 / 4`` (convex part of the
    quartic double well).
``Logarithmic``
    ``beta(r) = log((1 + r) / (1 - r))`` on ``(-1, 1)``, the derivative of
    ``(1 + r) log(1 + r) + (1 - r) log(1 - r)``.
``DoubleObstacle``
    the subdifferential of the indicator of ``[-1, 1]``.

All functions accept scalars or arrays and broadcast.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, NumericalFailure, PreconditionError

__all__ = [
    "MonotoneGraph",
    "PotentialSplit",
    "YosidaParams",
    "REGULAR_CUBIC",
    "LOGARITHMIC",
    "DOUBLE_OBSTACLE",
    "make_graph",
    "make_split",
    "beta",
    "beta_hat",
    "in_domain",
    "resolvent",
    "yosida",
    "yosida_derivative",
    "moreau_envelope",
    "minimal_section",
    "check_compatibility",
    "fit_domination",
    "coercivity_check",
]

REGULAR_CUBIC = "RegularCubic"
LOGARITHMIC = "Logarithmic"
DOUBLE_OBSTACLE = "DoubleObstacle"
_KINDS = (REGULAR_CUBIC, LOGARITHMIC, DOUBLE_OBSTACLE)
_ALIASES = {
    "regular": REGULAR_CUBIC,
    "regularcubic": REGULAR_CUBIC,
    "cubic": REGULAR_CUBIC,
    "logarithmic": LOGARITHMIC,
    "log": LOGARITHMIC,
    "obstacle": DOUBLE_OBSTACLE,
    "doubleobstacle": DOUBLE_OBSTACLE,
    "double_obstacle": DOUBLE_OBSTACLE,
}

RESOLVENT_TOL = 1e-13
RESOLVENT_MAXITER = 200


@dataclass(frozen=True)
class MonotoneGraph:
    kind: str
    margin: float = 1e-14

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown graph {self.kind!r}; expected one of {_KINDS}")
        if not 0 < self.margin < 1e-3:
            raise ValueError("margin must lie in (0, 1e-3)")

    @property
    def domain(self):
        """Closure endpoints of ``D(beta)`` and whether they are included."""
        if self.kind == REGULAR_CUBIC:
            return (-np.inf, np.inf, False)
        if self.kind == LOGARITHMIC:
            return (-1.0, 1.0, False)
        return (-1.0, 1.0, True)


def make_graph(name):
    """Build a graph from a config-style name such as ``"log"`` or ``"obstacle"``."""
    if isinstance(name, MonotoneGraph):
        return name
    key = str(name).strip()
    kind = _ALIASES.get(key.lower(), key)
    return MonotoneGraph(kind)


@dataclass(frozen=True)
class PotentialSplit:
    """``f = beta_hat + pi_hat`` with the linear perturbation ``pi(r) = -slope * r``."""

    graph: MonotoneGraph
    slope: float
    offset: float = 0.0

    @property
    def pi_lipschitz(self):
        return abs(self.slope)

    def pi(self, r):
        return -self.slope * np.asarray(r, dtype=float)

    def pi_prime(self, r):
        return np.full(np.shape(r), -self.slope)

    def pi_hat(self, r):
        r = np.asarray(r, dtype=float)
        return self.offset - 0.5 * self.slope * r * r

    def f(self, r):
        return beta_hat(self.graph, r) + self.pi_hat(r)

    def f_prime(self, r):
        """Single-valued part ``beta_min + pi`` (uses the minimal section)."""
        return minimal_section(self.graph, r) + self.pi(r)


def make_split(name, c=None):
    """Standard splits: quartic ``(r^2-1)^2/4``, ``f_log`` and ``f_2obs``.

    ``c`` is the concavity coefficient of the logarithmic (``c > 1``) and
    obstacle (``c > 0``) potentials; it is ignored for the regular one.
    """
    graph = make_graph(name)
    if graph.kind == REGULAR_CUBIC:
        return PotentialSplit(graph, 1.0, 0.25)
    if c is None:
        c = 1.5 if graph.kind == LOGARITHMIC else 1.0
    if graph.kind == LOGARITHMIC and not c > 1:
        raise PreconditionError(f"logarithmic potential needs c > 1, got {c}")
    if graph.kind == DOUBLE_OBSTACLE and not c > 0:
        raise PreconditionError(f"obstacle potential needs c > 0, got {c}")
    return PotentialSplit(graph, 2.0 * float(c))


@dataclass(frozen=True)
class YosidaParams:
    eps: float
    eta: float = 1.0

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise PreconditionError(f"eps must lie in (0, 1), got {self.eps}")
        if not self.eta > 0:
            raise PreconditionError(f"eta must be positive, got {self.eta}")

    @property
    def bulk_step(self):
        return self.eps

    @property
    def boundary_step(self):
        return self.eps * self.eta


def _log_beta(graph, s):
    lim = 1.0 - graph.margin
    s = np.clip(s, -lim, lim)
    return np.log1p(s) - np.log1p(-s)


def beta(graph, r):
    """Pointwise value of a single-valued graph (cubic or logarithmic)."""
    r = np.asarray(r, dtype=float)
    if graph.kind == REGULAR_CUBIC:
        return r**3
    if graph.kind == LOGARITHMIC:
        return _log_beta(graph, r)
    raise ValueError("the double obstacle graph is multivalued; use minimal_section")


def in_domain(graph, r):
    lo, hi, closed = graph.domain
    r = np.asarray(r, dtype=float)
    if closed:
        return (r >= lo) & (r <= hi)
    return (r > lo) & (r < hi)


def beta_hat(graph, r):
    """Convex part ``beta_hat`` (``+inf`` outside its effective domain)."""
    r = np.asarray(r, dtype=float)
    if graph.kind == REGULAR_CUBIC:
        return 0.25 * r**4
    inside = np.abs(r) <= 1.0
    if graph.kind == DOUBLE_OBSTACLE:
        return np.where(inside, 0.0, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.clip(r, -1.0, 1.0)
        val = _xlogx(1 + a) + _xlogx(1 - a)
    return np.where(inside, val, np.inf)


def _xlogx(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = z[pos] * np.log(z[pos])
    return out


def _check_step(step):
    if not step > 0:
        raise PreconditionError(f"regularization step must be positive, got {step}")


def resolvent(graph, step, r):
    """``(I + step * beta)^{-1}(r)``."""
    _check_step(step)
    r = np.asarray(r, dtype=float)
    if graph.kind == DOUBLE_OBSTACLE:
        return np.clip(r, -1.0, 1.0)
    s = _resolvent_positive(graph, float(step), np.abs(r).ravel())
    return np.copysign(s.reshape(r.shape), r)


def _safeguarded_newton(g, dg, x, lo, hi, tol):
    """Vectorized Newton with bisection fallback for increasing ``g`` bracketed by ``[lo, hi]``."""
    active = np.ones(x.shape, dtype=bool)
    for _ in range(RESOLVENT_MAXITER):
        xa = x[active]
        phi = g(xa, active)
        lo_a = np.where(phi <= 0, xa, lo[active])
        hi_a = np.where(phi >= 0, xa, hi[active])
        newton = xa - phi / dg(xa)
        bad = ~((newton > lo_a) & (newton < hi_a)) | ~np.isfinite(newton)
        new = np.where(bad, 0.5 * (lo_a + hi_a), newton)
        scale = 1.0 + np.abs(new)
        done = (np.abs(new - xa) <= tol * scale) | (hi_a - lo_a <= tol * scale)
        lo[active], hi[active], x[active] = lo_a, hi_a, new
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            return x, lo, hi
    raise NumericalFailure("resolvent root-finding did not converge")


def _resolvent_positive(graph, lam, a):
    """Resolvent for ``a >= 0`` (both smooth graphs are odd)."""
    if graph.kind == LOGARITHMIC:
        # unknown z = beta(s), s = tanh(z / 2): lam z + tanh(z / 2) = a has slope in [lam, lam + 1/2]
        lo = np.maximum(a - 1.0, 0.0) / lam
        hi = a / lam
        z = np.clip(a / (lam + 0.5), lo, hi)

        def g(z, m):
            return lam * z + np.tanh(0.5 * z) - a[m]

        def dg(z):
            return lam + 0.5 * (1.0 - np.tanh(0.5 * z) ** 2)

        z, _, _ = _safeguarded_newton(g, dg, z, lo, hi, RESOLVENT_TOL)
        return np.minimum(np.tanh(0.5 * z), 1.0 - graph.margin)

    # cubic: start from the closed-form (Cardano) root, then polish
    q = a / lam
    disc = np.sqrt(0.25 * q * q + 1.0 / (27.0 * lam**3))
    lo, hi = np.zeros_like(a), a.copy()
    s = np.clip(np.cbrt(0.5 * q + disc) + np.cbrt(0.5 * q - disc), lo, hi)

    def g(s, m):
        return s + lam * s**3 - a[m]

    def dg(s):
        return 1.0 + 3.0 * lam * s * s

    s, lo, hi = _safeguarded_newton(g, dg, s, lo, hi, RESOLVENT_TOL)
    phi = s + lam * s**3 - a
    polish = s - phi / dg(s)
    ok = (polish >= lo) & (polish <= hi) & np.isfinite(polish)
    return np.where(ok, polish, s)


def yosida(graph, step, r):
    """``beta_step(r) = (r - J(r)) / step`` with ``J`` the resolvent."""
    r = np.asarray(r, dtype=float)
    return (r - resolvent(graph, step, r)) / step


def yosida_derivative(graph, step, r):
    """Derivative of the Yosida approximation, in closed form for every graph."""
    _check_step(step)
    r = np.asarray(r, dtype=float)
    if graph.kind == DOUBLE_OBSTACLE:
        return np.where(np.abs(r) > 1.0, 1.0 / step, 0.0)
    J = resolvent(graph, step, r)
    if graph.kind == REGULAR_CUBIC:
        return 3.0 * J * J / (1.0 + 3.0 * step * J * J)
    return 2.0 / (1.0 - J * J + 2.0 * step)


def moreau_envelope(graph, step, r):
    """``min_s |r - s|^2 / (2 step) + beta_hat(s)``, attained at the resolvent."""
    r = np.asarray(r, dtype=float)
    J = resolvent(graph, step, r)
    return (r - J) ** 2 / (2.0 * step) + beta_hat(graph, J)


def minimal_section(graph, r):
    """Element of minimal modulus of ``beta(r)``; raises outside ``D(beta)``."""
    r = np.asarray(r, dtype=float)
    if not np.all(in_domain(graph, r)):
        bad = np.asarray(r)[~in_domain(graph, r)].ravel()[0]
        raise DomainError(f"{bad!r} lies outside the domain of {graph.kind}")
    if graph.kind == DOUBLE_OBSTACLE:
        return np.zeros_like(r)
    return beta(graph, r)


@dataclass
class CompatibilityReport:
    eta: float
    C: float
    eps: float
    domain_inclusion: bool
    raw_violation: float
    yosida_violation: float
    c_eta: float
    same_sign: bool

    @property
    def passed(self):
        return self.domain_inclusion and self.raw_violation <= 0 and self.yosida_violation <= 1e-10

    def as_dict(self):
        return {
            "eta": self.eta,
            "C": self.C,
            "eps": self.eps,
            "domain_inclusion": self.domain_inclusion,
            "raw_violation": self.raw_violation,
            "yosida_violation": self.yosida_violation,
            "C_eta": self.c_eta,
            "same_sign": self.same_sign,
            "passed": self.passed,
        }


def _domain_contains(outer, inner):
    lo_o, hi_o, closed_o = outer.domain
    lo_i, hi_i, closed_i = inner.domain
    if lo_i < lo_o or hi_i > hi_o:
        return False
    if closed_i and not closed_o and (lo_i == lo_o or hi_i == hi_o):
        return False
    return True


def check_compatibility(bulk, boundary, eta, C, samples, eps=0.1):
    """Check ``|beta_min| <= eta |beta_G_min| + C`` and its Yosida counterpart.

    The raw inequality is tested on the samples lying in both domains; the
    regularized one (bulk step ``eps``, boundary step ``eps * eta``) on all
    samples. The report also carries the smallest ``C_eta`` with
    ``beta_G_eps * beta_eps >= |beta_eps|^2 / (2 eta) - C_eta``.
    """
    bulk, boundary = make_graph(bulk), make_graph(boundary)
    r = np.asarray(samples, dtype=float).ravel()
    inner = r[in_domain(boundary, r) & in_domain(bulk, r)]
    if inner.size:
        raw = np.abs(minimal_section(bulk, inner)) - eta * np.abs(minimal_section(boundary, inner)) - C
        raw_violation = float(max(raw.max(), 0.0))
    else:
        raw_violation = 0.0
    b = yosida(bulk, eps, r)
    bg = yosida(boundary, eps * eta, r)
    yos = np.abs(b) - eta * np.abs(bg) - C
    c_eta = float(max(np.max(b * b / (2 * eta) - bg * b), 0.0))
    same_sign = bool(np.all(b * bg >= 0))
    return CompatibilityReport(
        eta=float(eta),
        C=float(C),
        eps=float(eps),
        domain_inclusion=_domain_contains(bulk, boundary),
        raw_violation=raw_violation,
        yosida_violation=float(max(yos.max(), 0.0)),
        c_eta=c_eta,
        same_sign=same_sign,
    )


def fit_domination(bulk, boundary, samples, etas=None):
    """Grid search for ``(eta, C)`` in ``|beta_min| <= eta |beta_G_min| + C``.

    For each candidate ``eta`` the smallest admissible ``C`` is computed on
    the samples; the pair minimizing ``eta + C`` is returned.
    """
    bulk, boundary = make_graph(bulk), make_graph(boundary)
    r = np.asarray(samples, dtype=float).ravel()
    r = r[in_domain(boundary, r) & in_domain(bulk, r)]
    if etas is None:
        etas = np.geomspace(1e-3, 1e3, 121)
    b = np.abs(minimal_section(bulk, r))
    bg = np.abs(minimal_section(boundary, r))
    best = None
    for eta in etas:
        C = float(max(np.max(b - eta * bg), 0.0)) if r.size else 0.0
        if best is None or eta + C < best[0] + best[1]:
            best = (float(eta), C)
    return best


def coercivity_check(graph, step, m0, samples):
    """Fit ``delta0, C0`` with ``beta_step(r) (r - m0) >= delta0 |beta_step(r)| - C0``.

    ``delta0`` is the distance from ``m0`` to the boundary of ``D(beta)``
    (capped at 1); ``C0`` is the smallest constant making the inequality hold
    on the samples.
    """
    graph = make_graph(graph)
    lo, hi, _ = graph.domain
    if not (lo < m0 < hi):
        raise PreconditionError(f"m0={m0} is not interior to the domain of {graph.kind}")
    delta0 = float(min(m0 - lo, hi - m0, 1.0))
    r = np.asarray(samples, dtype=float).ravel()
    b = yosida(graph, step, r)
    C0 = float(max(np.max(delta0 * np.abs(b) - b * (r - m0)), 0.0))
    return delta0, C0
