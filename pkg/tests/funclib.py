"""Piecewise-smooth test functions with known derivatives and Lipschitz constants."""

from dataclasses import dataclass

import numpy as np

from clarkedp import ScalarMap1


def _x2sin(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x * x * np.sin(1.0 / x)
    return np.where(x == 0.0, 0.0, out)


X2SIN = ScalarMap1(_x2sin, name="x2sin")


@dataclass
class Case:
    name: str
    f: ScalarMap1
    points: tuple
    lip: float  # Lipschitz constant on [-1.5, 1.5]
    convex: bool = False
    deriv: object = None  # derivative for smooth functions
    oscillatory: bool = False


def _m(fn, name):
    return ScalarMap1(fn, name=name)


PTS = (-0.7, -0.2, 0.0, 0.3, 0.9)

LIBRARY = [
    Case("abs", _m(np.abs, "abs"), PTS, 1.0, convex=True),
    Case("neg_abs", _m(lambda x: -np.abs(x), "neg_abs"), PTS, 1.0),
    Case("square", _m(np.square, "square"), PTS, 3.0, convex=True, deriv=lambda x: 2 * x),
    Case("max_x_2x", _m(lambda x: np.maximum(x, 2 * x), "max_x_2x"), PTS, 2.0, convex=True),
    Case("min_2x_negx", _m(lambda x: np.minimum(2 * x, -x), "min_2x_negx"), PTS, 2.0),
    Case("sin", _m(np.sin, "sin"), PTS, 1.0, deriv=np.cos),
    Case("exp_half", _m(lambda x: np.exp(0.5 * x), "exp_half"), PTS, 0.5 * np.exp(0.75),
         convex=True, deriv=lambda x: 0.5 * np.exp(0.5 * x)),
    Case("shifted_abs_quad", _m(lambda x: np.abs(x - 0.3) + 0.5 * x * x, "shifted_abs_quad"),
         PTS, 2.5, convex=True),
    Case("max_sin_cos", _m(lambda x: np.maximum(np.sin(x), np.cos(x)), "max_sin_cos"),
         PTS + (np.pi / 4,), 1.0),
    Case("pl3", _m(lambda x: np.maximum.reduce([-x, 0.5 * x, 2 * x - 1]), "pl3"),
         PTS + (2 / 3,), 2.0, convex=True),
    Case("x2sin", X2SIN, PTS, 4.0, oscillatory=True),
]

# exact Clarke intervals at the listed kinks
KINKS = {
    ("abs", 0.0): (-1.0, 1.0),
    ("neg_abs", 0.0): (-1.0, 1.0),
    ("max_x_2x", 0.0): (1.0, 2.0),
    ("min_2x_negx", 0.0): (-1.0, 2.0),
    ("shifted_abs_quad", 0.3): (-0.7, 1.3),
    ("max_sin_cos", np.pi / 4): (-np.sqrt(0.5), np.sqrt(0.5)),
    ("pl3", 0.0): (-1.0, 0.5),
    ("pl3", 2 / 3): (0.5, 2.0),
    ("x2sin", 0.0): (-1.0, 1.0),
}

CASE_POINTS = [(c, x) for c in LIBRARY for x in c.points]
