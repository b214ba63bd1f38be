"""Sensitivity of the flow to the transport velocity.

Perturbs a shear flow by ``delta * w`` and compares the difference of the
solutions with ``delta * ||w||``; the ratio stays essentially constant,
which is the linear regime of the stability estimate.
"""

from chdyn import build_scenario, shear_field
from chdyn import diagnostics as dg

sc = build_scenario(velocity=shear_field("sine", 1.0, 0.5), dt=0.01, t_end=1.0)
reports = dg.continuous_dependence_experiment(sc, sc.velocity, shear_field("couette", 1.0), [0.0, 0.2, 0.1, 0.05, 0.025])
print(f"{'delta':>8} {'lhs':>12} {'rhs':>12} {'ratio':>10}")
for r in reports:
    print(f"{r.delta:8.3f} {r.lhs:12.4e} {r.rhs:12.4e} {r.ratio:10.5f}")
