"""How the Yosida regularization tames the logarithmic and obstacle graphs.

Prints a small table of resolvent, Yosida value and Moreau envelope for
shrinking steps, showing the regularized values approaching the graph inside
its domain and growing like ``dist / step`` outside it.
"""

import numpy as np

from chdyn.potentials import beta_hat, make_graph, minimal_section, moreau_envelope, resolvent, yosida

points = np.array([0.0, 0.5, 0.9, 0.99, 1.5])

for name in ("log", "obstacle"):
    g = make_graph(name)
    print(f"\n{g.kind}")
    print(f"{'step':>8} " + " ".join(f"{'r=' + str(r):>12}" for r in points))
    for step in (0.1, 0.01, 0.001):
        vals = yosida(g, step, points)
        print(f"{step:8.0e} " + " ".join(f"{v:12.5f}" for v in vals))
    inside = points[np.abs(points) < 1]
    print("minimal section inside the domain:", np.round(minimal_section(g, inside), 5))
    print("resolvent at step 0.01:", np.round(resolvent(g, 0.01, points), 6))
    print("envelope <= beta_hat:", bool(np.all(moreau_envelope(g, 0.01, points) <= beta_hat(g, points) + 1e-12)))
