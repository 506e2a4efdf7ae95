"""A short tour of the sampled Clarke calculus on one-variable functions.

Run:  python demos/01_clarke_tour.py
"""

import numpy as np

from clarkedp import (ScalarMap1, clarke_interval, convex_subdifferential, is_regular,
                      is_strongly_differentiable)


def x2sin(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x == 0, 0.0, x * x * np.sin(1 / x))


funcs = {
    "|x|": ScalarMap1(np.abs),
    "-|x|": ScalarMap1(lambda x: -np.abs(x)),
    "max(x, 2x)": ScalarMap1(lambda x: np.maximum(x, 2 * x)),
    "x^2 sin(1/x)": ScalarMap1(x2sin),
}

print(f"{'function':>14}  {'Clarke interval at 0':>22}  regular  strongly diff.")
for name, f in funcs.items():
    iv = clarke_interval(f, 0.0)
    reg = bool(is_regular(f, 0.0))
    sd, _ = is_strongly_differentiable(f, 0.0)
    print(f"{name:>14}  [{iv.lo:+.4f}, {iv.hi:+.4f}]      {str(reg):>5}  {str(sd):>5}")

# x^2 sin(1/x) is differentiable at 0 with derivative 0, yet its Clarke
# interval is [-1, 1]: nearby slopes 2x sin(1/x) - cos(1/x) oscillate.
print("\nconvex subdifferential of |x| at 0:", convex_subdifferential(funcs["|x|"], 0.0))
