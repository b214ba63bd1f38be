"""Command line entry point: ``chdyn run <config>`` and ``chdyn validate <config>``.

Exit codes: 0 success, 1 an enabled check failed, 2 configuration error,
3 precondition failure, 4 numerical failure.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import diagnostics as dg
from .config import (
    build_initial,
    build_perturbation,
    build_scenario_from_config,
    build_velocity,
    check_interior_mean,
    load_config,
    sample_grid,
)
from .exceptions import ConfigError, NumericalFailure, PreconditionError
from .mesh import assemble_operators, build_strip_mesh
from .potentials import check_compatibility, fit_domination
from .spectral import dump_spectrum, eigendecompose
from .velocity import ZeroField, validate_field

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4

FIELD_TOL = 1e-10


def _num(x):
    return repr(float(x))


def _write_csv(path, config_hash, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) for v in row])


def write_trajectory_csv(path, traj, config_hash):
    n = traj.n_modes
    header = ["t", *(f"rho_{j}" for j in range(1, n + 1)), *(f"mu_{j}" for j in range(1, n + 1)),
              "mass", "energy", "min_rho", "max_rho"]
    rows = (
        [traj.times[k], *traj.rho[k], *traj.mu[k], traj.mass[k], traj.energy[k], traj.min_rho[k], traj.max_rho[k]]
        for k in range(len(traj))
    )
    _write_csv(path, config_hash, header, rows)


def write_ledger_csv(path, ledger, config_hash):
    rows = zip(ledger.times, ledger.energy, ledger.dissipation, ledger.work, ledger.residual)
    _write_csv(path, config_hash, ["t", "energy", "dissipation", "work", "residual"], rows)


def write_dependence_csv(path, reports, config_hash):
    rows = ((r.delta, r.lhs, r.rhs, r.ratio) for r in reports)
    _write_csv(path, config_hash, ["delta", "lhs", "rhs", "ratio"], rows)


def write_eps_csv(path, study, config_hash):
    _write_csv(path, config_hash, ["eps", "cauchy_diff", "beta_norm"], study.rows())


def write_summary(path, items):
    with open(path, "w") as fh:
        for k, v in items:
            if isinstance(v, bool):
                v = "pass" if v else "fail"
            elif isinstance(v, float):
                v = _num(v)
            fh.write(f"{k}={v}\n")


def _workers(cfg):
    return cfg["experiment.workers"] or None


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed", "must be an unsigned 64-bit integer")
        cfg = cfg.replace(initial__seed=args.seed)
    return cfg


def _check_velocity(cfg, ops):
    field = build_velocity(cfg)
    if field is None:
        return None
    t_end = cfg["dynamics.t_end"]
    report = validate_field(field, ops, FIELD_TOL, times=np.linspace(0.0, t_end, 5))
    if not report.tangency_ok:
        raise PreconditionError(f"velocity is not tangential on the boundary: max |u.nu| = {report.max_normal:.3e}")
    return report


def _experiment(cfg, scenario, system, traj, out, h):
    kind = cfg["experiment.kind"]
    items = []
    workers = _workers(cfg)
    if kind == "dependence":
        u1 = scenario.velocity or ZeroField()
        reports = dg.continuous_dependence_experiment(
            scenario, u1, build_perturbation(cfg), cfg["experiment.deltas"], workers
        )
        write_dependence_csv(os.path.join(out, "dependence.csv"), reports, h)
        ratios = np.array([r.ratio for r in reports if r.delta != 0])
        zero_ok = all(r.lhs == 0.0 for r in reports if r.delta == 0)
        if ratios.size:
            med = np.median(ratios)
            spread = float(np.max(np.abs(ratios / med - 1.0)))
            items += [("dependence_ratio_median", float(med)), ("dependence_ratio_spread", spread)]
            items.append(("check_dependence", bool(np.all(np.isfinite(ratios)) and spread <= 0.25 and zero_ok)))
    elif kind == "eps_study":
        study = dg.epsilon_refinement_study(scenario, cfg["experiment.eps_ladder"], workers)
        write_eps_csv(os.path.join(out, "eps_study.csv"), study, h)
        items += [("eps_beta_growth", study.beta_growth),
                  ("check_eps_cauchy_decreasing", study.diffs_nonincreasing),
                  ("check_eps_beta_bounded", study.beta_growth < 0.1)]
    elif kind == "separation":
        rep = dg.separation_report(traj, cfg["experiment.floor"], scenario.rho0)
        items += [("separation_margin", rep.margin), ("separation_floor", rep.floor),
                  ("separation_precondition", rep.precondition_ok), ("check_separation", rep.passed)]
    elif kind == "conservation":
        drift = dg.mass_drift(traj, scenario.m0, system.kappa)
        if system.kappa == 0:
            items.append(("check_conservation", drift.passed))
        kappas = cfg["experiment.kappas"]
        ends, ratios = dg.kappa_scaling_study(scenario, kappas, workers)
        for k, e in zip(kappas, ends):
            items.append((f"kappa_drift[{_num(k)}]", float(e)))
        for j, r in enumerate(ratios):
            items.append((f"kappa_drift_ratio_{j + 1}", float(r)))
    return items


def cmd_run(args):
    cfg = _load(args)
    h = cfg.hash
    out = args.output_dir
    os.makedirs(out, exist_ok=True)
    mesh = build_strip_mesh(cfg["mesh.nx"], cfg["mesh.ny"], cfg["mesh.lx"], cfg["mesh.ly"])
    ops = assemble_operators(mesh)
    _check_velocity(cfg, ops)
    basis = eigendecompose(ops, cfg["dynamics.n_modes"])
    if args.dump_spectrum:
        dump_spectrum(basis, os.path.join(out, "spectrum.csv"))
    scenario = build_scenario_from_config(cfg, mesh, ops, basis)
    system, traj = scenario.run()
    write_trajectory_csv(os.path.join(out, "trajectory.csv"), traj, h)
    ledger = dg.energy_ledger(traj, system)
    write_ledger_csv(os.path.join(out, "ledger.csv"), ledger, h)
    drift = dg.mass_drift(traj, scenario.m0, system.kappa)

    items = [
        ("config_hash", h),
        ("status", "ok"),
        ("spectrum", "discrete"),
        ("n_records", len(traj)),
        ("dt", traj.dt),
        ("m0", scenario.m0),
        ("mass_drift_max", drift.max_abs),
        ("energy_start", float(traj.energy[0])),
        ("energy_end", float(traj.energy[-1])),
        ("ledger_residual_max", ledger.max_abs),
        ("min_rho", float(traj.min_rho.min())),
        ("max_rho", float(traj.max_rho.max())),
    ]
    if system.kappa == 0:
        items.append(("check_mass_conservation", drift.passed))
    items += _experiment(cfg, scenario, system, traj, out, h)
    write_summary(os.path.join(out, "summary.txt"), items)
    failed = [k for k, v in items if k.startswith("check_") and v is False]
    for k, v in items:
        print(f"{k}={'pass' if v is True else 'fail' if v is False else v}")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_validate(args):
    cfg = _load(args)
    mesh = build_strip_mesh(cfg["mesh.nx"], cfg["mesh.ny"], cfg["mesh.lx"], cfg["mesh.ly"])
    ops = assemble_operators(mesh)
    problems = []
    field = build_velocity(cfg)
    if field is not None:
        rep = validate_field(field, ops, FIELD_TOL, times=np.linspace(0.0, cfg["dynamics.t_end"], 5))
        print(f"velocity max_divergence={_num(rep.max_divergence)} max_normal={_num(rep.max_normal)}")
        if not rep.tangency_ok:
            problems.append(f"tangency failure: max |u.nu| = {rep.max_normal:.3e}")
    try:
        m0 = check_interior_mean(cfg, build_initial(cfg, mesh))
        print(f"m0={_num(m0)} interior=yes")
    except PreconditionError as exc:
        problems.append(str(exc))
    samples = sample_grid(cfg)
    eta, C = fit_domination(cfg["potential.bulk"], cfg["potential.boundary"], samples)
    comp = check_compatibility(cfg["potential.bulk"], cfg["potential.boundary"], eta, C, samples, cfg["potential.eps"])
    print(f"domination eta={_num(eta)} C={_num(C)}")
    for k, v in comp.as_dict().items():
        print(f"compatibility {k}={v}")
    if not comp.passed:
        print("WARN compatibility conditions not met on the sample grid")
    if problems:
        for p in problems:
            print(f"FAIL {p}")
        return EXIT_PRECONDITION
    print(f"OK eta={_num(eta)} C={_num(C)}")
    return EXIT_OK


def _add_common(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--output-dir", default=d("."), help="directory for CSV and summary files")
    p.add_argument("--seed", type=int, default=d(None), help="override initial.seed")
    p.add_argument("--dump-spectrum", action="store_true", default=d(False),
                   help="write spectrum.csv with (j, lambda_j)")


def build_parser():
    p = argparse.ArgumentParser(prog="chdyn", description=__doc__.splitlines()[0])
    _add_common(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("validate", cmd_validate)):
        s = sub.add_parser(name)
        s.add_argument("config")
        _add_common(s, suppress=True)
        s.set_defaults(func=fn)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
