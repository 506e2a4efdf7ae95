"""Negative control: an argmax that jumps.

w(x, y) = -(y^2 - 1)^2 + x y has two peaks at y = -1 and y = +1 whose
heights cross at x = 0.  The policy jumps there, upper hemicontinuity of the
sampled policy fails, and the verifier reports NotApplicable rather than a
verdict it cannot justify.

Run:  python demos/04_negative_control.py
"""

import numpy as np

from clarkedp import Grid, ReducedFormModel, extract_policy, solve_value_iteration, uhc_probe
from clarkedp.envelope import verify_point

model = ReducedFormModel(0.05, lambda x, y: -(y**2 - 1) ** 2 + x * y,
                         lambda x: 0 * x - 2.0, lambda x: 0 * x + 2.0, (-2.0, 2.0), name="jump")
V, _ = solve_value_iteration(model, Grid.uniform(-2, 2, 400))
G = extract_policy(model, V)

for x in (-0.6, 0.0, 0.6):
    r = verify_point(model, V, G, x)
    uhc = bool(uhc_probe(G, x, 0.2))
    dV = r.envelope.dV
    print(f"x = {x:+.1f}: policy {np.round(G.at(x), 3)}, uhc {uhc}, "
          f"dV [{dV.lo:+.3f}, {dV.hi:+.3f}], verdict {r.verdict}")
