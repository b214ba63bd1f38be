"""Run configuration: a flat ``section.key`` schema read from INI files.

Example::

    [mesh]
    nx = 32
    ny = 33

    [potential]
    bulk = log
    eps = 0.05

    [velocity]
    kind = shear
    profile = sine
    amplitude = 0.5

    [experiment]
    kind = dependence
    deltas = 0.1, 0.05, 0.025

Every key has a default; unknown sections or keys are rejected so typos
cannot silently fall back to defaults.
"""

import configparser
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, PreconditionError
from .mesh import assemble_operators, build_strip_mesh, generalized_mean
from .potentials import _ALIASES, make_graph
from .scenario import Scenario, initial_profile
from .spectral import eigendecompose
from .velocity import ConstantField, Modulation, shear_field, stream_function_field

__all__ = ["RunConfig", "SCHEMA", "load_config", "parse_config", "build_velocity", "build_initial", "build_scenario_from_config"]


def _floats(text):
    text = text.strip()
    if not text:
        return ()
    return tuple(float(t) for t in text.replace(";", ",").split(","))


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default); ``None`` defaults are resolved from other keys
SCHEMA = {
    "mesh.nx": (int, 32),
    "mesh.ny": (int, 33),
    "mesh.lx": (float, 2 * math.pi),
    "mesh.ly": (float, 1.0),
    "potential.bulk": (str, "regular"),
    "potential.boundary": (str, None),
    "potential.eps": (float, 0.1),
    "potential.eta": (float, 1.0),
    "potential.c": (float, None),
    "dynamics.tau_bulk": (float, 1.0),
    "dynamics.tau_bdry": (float, 1.0),
    "dynamics.kappa": (float, 0.0),
    "dynamics.n_modes": (int, 64),
    "dynamics.dt": (float, 0.01),
    "dynamics.t_end": (float, 1.0),
    "dynamics.stepper": (str, "backward_euler"),
    "dynamics.newton_tol": (float, 1e-11),
    "dynamics.max_iter": (int, 50),
    "dynamics.output_every": (int, 1),
    "dynamics.advection": (str, "skew"),
    "dynamics.regularize_tau": (_bool, True),
    "velocity.kind": (str, "none"),
    "velocity.profile": (str, "sine"),
    "velocity.amplitude": (float, 1.0),
    "velocity.modulation": (str, "constant"),
    "velocity.omega": (float, 2 * math.pi),
    "velocity.wavenumber": (int, 1),
    "velocity.u1": (float, 0.0),
    "velocity.u2": (float, 0.0),
    "initial.profile": (str, "cosine"),
    "initial.mean": (float, 0.0),
    "initial.amplitude": (float, 0.5),
    "initial.wavenumber": (int, 1),
    "initial.seed": (int, 0),
    "initial.modes": (int, 4),
    "experiment.kind": (str, "none"),
    "experiment.deltas": (_floats, (0.0, 0.1, 0.05, 0.025)),
    "experiment.perturbation": (str, "couette"),
    "experiment.perturbation_amplitude": (float, 1.0),
    "experiment.eps_ladder": (_floats, ()),
    "experiment.floor": (float, 0.01),
    "experiment.kappas": (_floats, ()),
    "experiment.workers": (int, 0),
}

CHOICES = {
    "dynamics.stepper": ("backward_euler", "convex_split"),
    "dynamics.advection": ("skew", "raw"),
    "velocity.kind": ("none", "shear", "stream", "constant"),
    "velocity.profile": ("uniform", "sine", "couette", "poiseuille"),
    "velocity.modulation": ("constant", "sinusoidal"),
    "initial.profile": ("constant", "cosine", "random_smooth"),
    "experiment.kind": ("none", "dependence", "eps_study", "separation", "conservation"),
    "experiment.perturbation": ("uniform", "sine", "couette", "poiseuille"),
}


@dataclass(frozen=True)
class RunConfig:
    """Resolved, type-checked configuration values keyed by ``section.key``."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def replace(self, **kw):
        """Override values; keyword names use ``__`` for the dot (``initial__seed=3``)."""
        new = dict(self.values)
        for k, v in kw.items():
            key = k.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigError(key, "unknown key")
            new[key] = v
        _check(new)
        return RunConfig(new)

    def canonical(self):
        return "\n".join(f"{k}={_fmt(self.values[k])}" for k in sorted(self.values))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)


def parse_config(text):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", f"malformed configuration: {exc}") from exc
    raw = {}
    for sec in parser.sections():
        for name, value in parser.items(sec):
            key = f"{sec}.{name}"
            if key not in SCHEMA:
                raise ConfigError(key, "unknown key")
            raw[key] = value
    values = {}
    for key, (conv, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except ValueError as exc:
                raise ConfigError(key, f"cannot parse {raw[key]!r}: {exc}") from exc
        else:
            values[key] = default
    _resolve(values)
    _check(values)
    return RunConfig(values)


def _resolve(v):
    bulk = v["potential.bulk"].strip().lower()
    if bulk not in _ALIASES:
        raise ConfigError("potential.bulk", f"unknown potential {v['potential.bulk']!r}")
    if v["potential.boundary"] is None:
        v["potential.boundary"] = v["potential.bulk"]
    if v["potential.boundary"].strip().lower() not in _ALIASES:
        raise ConfigError("potential.boundary", f"unknown potential {v['potential.boundary']!r}")
    v["potential.bulk"] = make_graph(v["potential.bulk"]).kind
    v["potential.boundary"] = make_graph(v["potential.boundary"]).kind
    if v["potential.c"] is None:
        kinds = {v["potential.bulk"], v["potential.boundary"]}
        v["potential.c"] = 1.5 if make_graph("log").kind in kinds else 1.0
    if not v["experiment.eps_ladder"]:
        e = v["potential.eps"]
        v["experiment.eps_ladder"] = (e, e / 2, e / 4, e / 8)
    if not v["experiment.kappas"]:
        k = v["dynamics.kappa"] or 1e-2
        v["experiment.kappas"] = (k, k / 2, k / 4)


def _require(ok, key, message):
    if not ok:
        raise ConfigError(key, message)


def _check(v):
    for key, allowed in CHOICES.items():
        _require(v[key] in allowed, key, f"must be one of {', '.join(allowed)}; got {v[key]!r}")
    _require(v["mesh.nx"] >= 4, "mesh.nx", "must be >= 4")
    _require(v["mesh.ny"] >= 3, "mesh.ny", "must be >= 3")
    _require(v["mesh.lx"] > 0, "mesh.lx", "must be positive")
    _require(v["mesh.ly"] > 0, "mesh.ly", "must be positive")
    _require(0 < v["potential.eps"] < 1, "potential.eps", f"must lie in (0, 1); got {v['potential.eps']!r}")
    _require(v["potential.eta"] > 0, "potential.eta", "must be positive")
    logk = make_graph("log").kind
    if logk in (v["potential.bulk"], v["potential.boundary"]):
        _require(v["potential.c"] > 1, "potential.c", "must exceed 1 for logarithmic potentials")
    _require(v["potential.c"] > 0, "potential.c", "must be positive")
    for key in ("dynamics.tau_bulk", "dynamics.tau_bdry", "dynamics.kappa"):
        _require(v[key] >= 0, key, "must be nonnegative")
    n_nodes = v["mesh.nx"] * v["mesh.ny"]
    _require(2 <= v["dynamics.n_modes"] <= n_nodes, "dynamics.n_modes", f"must lie in [2, {n_nodes}]")
    _require(v["dynamics.dt"] > 0, "dynamics.dt", "must be positive")
    _require(v["dynamics.t_end"] > 0, "dynamics.t_end", "must be positive")
    _require(v["dynamics.newton_tol"] > 0, "dynamics.newton_tol", "must be positive")
    _require(v["dynamics.max_iter"] >= 1, "dynamics.max_iter", "must be >= 1")
    _require(v["dynamics.output_every"] >= 1, "dynamics.output_every", "must be >= 1")
    _require(v["velocity.wavenumber"] >= 1, "velocity.wavenumber", "must be >= 1")
    _require(v["initial.seed"] >= 0, "initial.seed", "must be nonnegative")
    _require(v["initial.modes"] >= 1, "initial.modes", "must be >= 1")
    ladder = v["experiment.eps_ladder"]
    _require(all(0 < e < 1 for e in ladder), "experiment.eps_ladder", "entries must lie in (0, 1)")
    _require(all(b < a for a, b in zip(ladder, ladder[1:])), "experiment.eps_ladder", "must be strictly decreasing")
    _require(all(k > 0 for k in v["experiment.kappas"]), "experiment.kappas", "entries must be positive")
    _require(v["experiment.floor"] >= 0, "experiment.floor", "must be nonnegative")
    _require(v["experiment.workers"] >= 0, "experiment.workers", "must be nonnegative")


def build_velocity(cfg):
    kind = cfg["velocity.kind"]
    if kind == "none":
        return None
    mod = Modulation(cfg["velocity.modulation"], cfg["velocity.omega"])
    if kind == "shear":
        return shear_field(cfg["velocity.profile"], cfg["mesh.ly"], cfg["velocity.amplitude"], mod)
    if kind == "stream":
        return stream_function_field(cfg["mesh.lx"], cfg["mesh.ly"], cfg["velocity.amplitude"],
                                     cfg["velocity.wavenumber"], mod)
    return ConstantField(cfg["velocity.u1"], cfg["velocity.u2"])


def build_perturbation(cfg):
    return shear_field(cfg["experiment.perturbation"], cfg["mesh.ly"], cfg["experiment.perturbation_amplitude"])


def build_initial(cfg, mesh):
    return initial_profile(
        mesh,
        cfg["initial.profile"],
        mean=cfg["initial.mean"],
        amplitude=cfg["initial.amplitude"],
        wavenumber=cfg["initial.wavenumber"],
        seed=cfg["initial.seed"],
        modes=cfg["initial.modes"],
    )


INTERIOR_TOL = 1e-12


def check_interior_mean(cfg, rho0):
    """``m0`` must lie in the interior of the boundary graph's domain."""
    m0 = generalized_mean(rho0)
    lo, hi, _ = make_graph(cfg["potential.boundary"]).domain
    # a datum sitting on the endpoint can round to just inside it
    tol = INTERIOR_TOL * max(1.0, abs(m0))
    if not (lo + tol < m0 < hi - tol):
        raise PreconditionError(f"initial mean m0={m0:.6g} is not interior to the boundary domain ({lo}, {hi})")
    return m0


def build_scenario_from_config(cfg, mesh=None, ops=None, basis=None):
    mesh = mesh or build_strip_mesh(cfg["mesh.nx"], cfg["mesh.ny"], cfg["mesh.lx"], cfg["mesh.ly"])
    ops = ops or assemble_operators(mesh)
    basis = basis or eigendecompose(ops, cfg["dynamics.n_modes"])
    rho0 = build_initial(cfg, mesh)
    check_interior_mean(cfg, rho0)
    return Scenario(
        ops=ops,
        basis=basis,
        bulk=cfg["potential.bulk"],
        boundary=cfg["potential.boundary"],
        c=cfg["potential.c"],
        eps=cfg["potential.eps"],
        eta=cfg["potential.eta"],
        tau_bulk=cfg["dynamics.tau_bulk"],
        tau_bdry=cfg["dynamics.tau_bdry"],
        kappa=cfg["dynamics.kappa"],
        velocity=build_velocity(cfg),
        rho0=rho0,
        dt=cfg["dynamics.dt"],
        t_end=cfg["dynamics.t_end"],
        stepper=cfg["dynamics.stepper"],
        newton_tol=cfg["dynamics.newton_tol"],
        max_iter=cfg["dynamics.max_iter"],
        output_every=cfg["dynamics.output_every"],
        advection=cfg["dynamics.advection"],
        regularize_tau=cfg["dynamics.regularize_tau"],
    )


def sample_grid(cfg, n=2001):
    """Sample points for compatibility checks: the closure of the boundary domain, clipped to [-3, 3]."""
    lo, hi, _ = make_graph(cfg["potential.boundary"]).domain
    lo, hi = max(lo, -3.0), min(hi, 3.0)
    return np.linspace(lo, hi, n)
