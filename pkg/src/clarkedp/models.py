"""Reduced-form models built from growth-model primitives.

The discrete Ramsey-Cass-Koopmans economy with utility ``u``, production
``f``, depreciation ``d`` and government expenditure rule ``g`` reduces to

    w(x, y) = u(F(x) - y),   Gamma(x) = [0, F(x)],   F(k) = f(k) + (1 - d) k - g(k).
"""

import json
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .dp import ReducedFormModel, ScalarMap2
from .errors import NoCompactBound, SchemaError
from .nonsmooth import NEG_INF, ScalarMap1


# -- utilities ---------------------------------------------------------------

@dataclass(frozen=True)
class CRRA:
    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")


@dataclass(frozen=True)
class Kinked:
    """Concave piecewise-linear utility: ``breakpoints[i] = (c_i, slope_i)`` with c_0 = 0."""

    breakpoints: tuple

    def __post_init__(self):
        bp = tuple((float(c), float(s)) for c, s in self.breakpoints)
        object.__setattr__(self, "breakpoints", bp)
        cs = [c for c, _ in bp]
        ss = [s for _, s in bp]
        if not bp or cs[0] != 0.0:
            raise ValueError("the first breakpoint must sit at c = 0")
        if any(b <= a for a, b in zip(cs, cs[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(s <= 0 for s in ss):
            raise ValueError("slopes must be positive")
        if any(b >= a for a, b in zip(ss, ss[1:])):
            raise ValueError("slopes must be strictly decreasing (concavity)")


@dataclass(frozen=True)
class Custom:
    fn: ScalarMap1


def crra_utility(theta):
    """u(c) = log c for theta = 1, else (c**(1-theta) - 1)/(1-theta); NEG_INF for c < 0."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    theta = float(theta)

    def u(c):
        c = np.asarray(c, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if theta == 1.0:
                val = np.log(c)
            else:
                val = np.expm1((1.0 - theta) * np.log(c)) / (1.0 - theta)
        val = np.where(c < 0, NEG_INF, val)
        if theta < 1.0:
            val = np.where(c == 0, -1.0 / (1.0 - theta), val)
        return val if val.ndim else float(val)

    return ScalarMap1(u, domain=(0.0, np.inf), name=f"crra({theta:g})")


def kinked_utility(c_star, slope_hi, slope_lo):
    """Two-piece concave utility: slope ``slope_hi`` on [0, c_star], ``slope_lo`` beyond."""
    if not (slope_hi > slope_lo > 0 and c_star > 0):
        raise ValueError("need slope_hi > slope_lo > 0 and c_star > 0")
    return Kinked(((0.0, slope_hi), (c_star, slope_lo)))


def utility_map(spec):
    if isinstance(spec, ScalarMap1):
        return spec
    if isinstance(spec, CRRA):
        return crra_utility(spec.theta)
    if isinstance(spec, Custom):
        return spec.fn
    if isinstance(spec, Kinked):
        cs = np.array([c for c, _ in spec.breakpoints])
        ss = np.array([s for _, s in spec.breakpoints])
        # u at each breakpoint, u(0) = 0
        base = np.concatenate([[0.0], np.cumsum(ss[:-1] * np.diff(cs))])

        def u(c):
            c = np.asarray(c, dtype=float)
            i = np.clip(np.searchsorted(cs, c, side="right") - 1, 0, cs.size - 1)
            val = base[i] + ss[i] * (c - cs[i])
            val = np.where(c < 0, NEG_INF, val)
            return val if val.ndim else float(val)

        return ScalarMap1(u, domain=(0.0, np.inf), name="kinked")
    raise TypeError(f"unknown utility spec {spec!r}")


# -- technology --------------------------------------------------------------

@dataclass(frozen=True)
class CobbDouglas:
    a: float
    A: float = 1.0

    def __post_init__(self):
        if not (0 < self.a < 1 and self.A > 0):
            raise ValueError("Cobb-Douglas needs 0 < a < 1 and A > 0")


@dataclass(frozen=True)
class AK:
    A: float

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError("AK needs A > 0")


def piecewise_linear_rule(knots):
    """Government rule through points ``[(k, g), ...]``; linear beyond the last point, g(0) = 0."""
    pts = np.asarray(knots, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise ValueError("government rule needs [[k, g], ...] points")
    if pts[0, 0] != 0.0 or pts[0, 1] != 0.0:
        pts = np.vstack([[0.0, 0.0], pts])
    ks, gs = pts[:, 0], pts[:, 1]
    if np.any(np.diff(ks) <= 0):
        raise ValueError("government rule abscissas must be increasing")
    tail = (gs[-1] - gs[-2]) / (ks[-1] - ks[-2])

    def g(k):
        k = np.asarray(k, dtype=float)
        val = np.where(k <= ks[-1], np.interp(k, ks, gs), gs[-1] + tail * (k - ks[-1]))
        return val if val.ndim else float(val)

    return ScalarMap1(g, domain=(0.0, np.inf), name="g")


@dataclass(frozen=True)
class TechnologySpec:
    production: object
    d: float = 1.0
    government: ScalarMap1 = None

    def __post_init__(self):
        if not 0 <= self.d <= 1:
            raise ValueError("depreciation must lie in [0, 1]")


def production_map(prod):
    if isinstance(prod, ScalarMap1):
        return prod
    if isinstance(prod, CobbDouglas):
        a, A = prod.a, prod.A
        return ScalarMap1(lambda k: A * np.power(np.maximum(k, 0.0), a), (0.0, np.inf),
                          name=f"{A:g}*k^{a:g}")
    if isinstance(prod, AK):
        A = prod.A
        return ScalarMap1(lambda k: A * np.asarray(k, dtype=float), (0.0, np.inf), name=f"{A:g}*k")
    if isinstance(prod, Custom):
        return prod.fn
    raise TypeError(f"unknown production spec {prod!r}")


def transition_map(tech):
    """F(k) = f(k) + (1 - d) k - g(k)."""
    f = production_map(tech.production)
    d = tech.d
    g = tech.government

    def F(k):
        k = np.asarray(k, dtype=float)
        val = f(k) + (1.0 - d) * k
        if g is not None:
            val = val - g(k)
        return val

    return ScalarMap1(F, domain=(0.0, np.inf), name="F")


@dataclass(frozen=True)
class RCKSpec:
    utility: object
    technology: TechnologySpec
    delta: float
    k0: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not self.k0 > 0:
            raise ValueError("k0 must be positive")


# -- compactification -------------------------------------------------------

def compactify(F, k_hint=1.0, cap_doublings=60, tol=1e-12):
    """A level K* with F(k) <= k for every probed k >= K*.

    Doubling from ``k_hint`` finds a level with F(k) <= k; bisection on
    F(k) - k then moves K* down to the crossing when one is bracketed.  The
    result is checked at a geometric probe sequence above K*.
    """
    if not k_hint > 0:
        raise ValueError("k_hint must be positive")
    F1 = lambda k: float(F(np.float64(k)))
    k = float(k_hint)
    for _ in range(cap_doublings):
        if F1(k) <= k and _holds_beyond(F1, k):
            break
        k *= 2.0
    else:
        raise NoCompactBound(f"F(k) > k at every probe up to {k:.3g}")
    # search downwards for a level where F(k) > k to bracket the crossing
    lo = k
    for _ in range(cap_doublings):
        lo *= 0.5
        if F1(lo) > lo:
            break
    else:
        return float(k_hint) if F1(k_hint) <= k_hint else k
    hi = k
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if F1(mid) > mid:
            lo = mid
        else:
            hi = mid
    return hi


def _holds_beyond(F1, k, n=40):
    probes = k * np.concatenate([1.0 + 2.0 ** -np.arange(1, 20), 2.0 ** np.arange(1, n)])
    return all(F1(p) <= p for p in probes)


def feasibility_floor(F, lo_exp=-40, hi_exp=20, per_octave=16):
    """Largest probe eps on a geometric grid with F(k) > k at every probe in (0, eps], or None."""
    F0 = float(F(np.float64(0.0)))
    if abs(F0) > 1e-12:
        raise ValueError(f"feasibility_floor needs F(0) = 0, got {F0}")
    probes = 2.0 ** (np.arange(lo_exp * per_octave, hi_exp * per_octave + 1) / per_octave)
    ok = np.asarray(F(probes), dtype=float) > probes
    if not ok[0]:
        return None
    first_bad = np.flatnonzero(~ok)
    last = first_bad[0] - 1 if first_bad.size else probes.size - 1
    return float(probes[last])


# -- model construction ------------------------------------------------------

def build_rck(spec, k_hint=1.0):
    """Reduced-form model ``w(x, y) = u(F(x) - y)``, ``Gamma(x) = [0, F(x)]`` on ``[0, 1.05 K*]``."""
    u = utility_map(spec.utility)
    F = transition_map(spec.technology)
    K = compactify(F, k_hint=max(k_hint, spec.k0))
    top = 1.05 * K

    def w(x, y):
        return u(F(x) - y)

    model = ReducedFormModel(
        delta=spec.delta,
        w=ScalarMap2(w, name="u(F(x)-y)"),
        gamma_lo=ScalarMap1(lambda x: np.zeros_like(np.asarray(x, dtype=float)), name="0"),
        gamma_hi=F,
        state_domain=(0.0, top),
        name="rck",
        meta={"u": u, "F": F, "K_star": K, "spec": spec},
    )
    return model


def analytic_log_cobb_douglas(a, delta):
    """Closed-form value and policy for log utility, f(k) = k**a, full depreciation.

    V(k) = A + B log k with B = a/(1 - a delta) and
    A = [log(1 - a delta) + a delta/(1 - a delta) * log(a delta)] / (1 - delta);
    policy y(k) = a delta k**a.
    """
    if not (0 < a < 1 and 0 < delta < 1):
        raise ValueError("need 0 < a < 1 and 0 < delta < 1")
    ad = a * delta
    B = a / (1.0 - ad)
    A = (np.log(1.0 - ad) + ad / (1.0 - ad) * np.log(ad)) / (1.0 - delta)

    def V(k):
        k = np.asarray(k, dtype=float)
        with np.errstate(divide="ignore"):
            return A + B * np.log(k)

    V_map = ScalarMap1(V, domain=(0.0, np.inf), name="V_exact")
    pol = ScalarMap1(lambda k: ad * np.power(np.asarray(k, dtype=float), a), (0.0, np.inf),
                     name="policy_exact")
    V_map.coefficients = (A, B)
    return V_map, pol


def graph_midpoint_violation(model, n=400, seed=0):
    """Search for (x1,y1), (x2,y2) in the graph of Gamma whose midpoint is infeasible.

    Returns the witness triple or None.  Used to show nonconvex graphs (e.g.
    from kinked government rules).
    """
    lo, hi = model.state_domain
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, (n, 2))
    glo, ghi = model.gamma(x)
    y = glo + (ghi - glo) * rng.uniform(0, 1, (n, 2))
    # pairs on the upper and lower edges, where nonconvexity shows first
    q = n // 3
    y[:q], y[q:2 * q] = ghi[:q], glo[q:2 * q]
    xm, ym = x.mean(axis=1), y.mean(axis=1)
    mlo, mhi = model.gamma(xm)
    bad = (ym > mhi + 1e-12) | (ym < mlo - 1e-12)
    if not bad.any():
        return None
    i = int(np.flatnonzero(bad)[0])
    return ((x[i, 0], y[i, 0]), (x[i, 1], y[i, 1]), (xm[i], ym[i]))


# -- JSON model spec ---------------------------------------------------------

_G_SCHEMA = {
    "type": "object",
    "properties": {
        "type": {"const": "piecewise_linear"},
        "points": {"type": "array", "minItems": 1,
                   "items": {"type": "array", "items": {"type": "number"},
                             "minItems": 2, "maxItems": 2}},
    },
    "required": ["type", "points"],
    "additionalProperties": False,
}

MODEL_SCHEMA = {
    "type": "object",
    "properties": {
        "utility": {
            "oneOf": [
                {"type": "object",
                 "properties": {"type": {"const": "crra"},
                                "theta": {"type": "number", "exclusiveMinimum": 0}},
                 "required": ["type", "theta"], "additionalProperties": False},
                {"type": "object",
                 "properties": {"type": {"const": "kinked"},
                                "c_star": {"type": "number", "exclusiveMinimum": 0},
                                "slope_hi": {"type": "number", "exclusiveMinimum": 0},
                                "slope_lo": {"type": "number", "exclusiveMinimum": 0}},
                 "required": ["type", "c_star", "slope_hi", "slope_lo"],
                 "additionalProperties": False},
                {"type": "object",
                 "properties": {"type": {"const": "kinked"},
                                "breakpoints": {"type": "array", "minItems": 1,
                                                "items": {"type": "array",
                                                          "items": {"type": "number"},
                                                          "minItems": 2, "maxItems": 2}}},
                 "required": ["type", "breakpoints"], "additionalProperties": False},
            ]
        },
        "technology": {
            "oneOf": [
                {"type": "object",
                 "properties": {"type": {"const": "cobb_douglas"},
                                "a": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                                "A": {"type": "number", "exclusiveMinimum": 0},
                                "d": {"type": "number", "minimum": 0, "maximum": 1},
                                "g": _G_SCHEMA},
                 "required": ["type", "a"], "additionalProperties": False},
                {"type": "object",
                 "properties": {"type": {"const": "ak"},
                                "A": {"type": "number", "exclusiveMinimum": 0},
                                "d": {"type": "number", "minimum": 0, "maximum": 1},
                                "g": _G_SCHEMA},
                 "required": ["type", "A"], "additionalProperties": False},
            ]
        },
        "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "k0": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["utility", "technology", "delta"],
    "additionalProperties": False,
}


def spec_from_dict(doc):
    """Validate a JSON model document and turn it into an :class:`RCKSpec`."""
    try:
        jsonschema.validate(doc, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(exc.message) from None
    u = doc["utility"]
    try:
        if u["type"] == "crra":
            utility = CRRA(u["theta"])
        elif "breakpoints" in u:
            utility = Kinked(tuple(tuple(p) for p in u["breakpoints"]))
        else:
            utility = kinked_utility(u["c_star"], u["slope_hi"], u["slope_lo"])
        t = doc["technology"]
        prod = CobbDouglas(t["a"], t.get("A", 1.0)) if t["type"] == "cobb_douglas" else AK(t["A"])
        g = piecewise_linear_rule(t["g"]["points"]) if "g" in t else None
        tech = TechnologySpec(prod, t.get("d", 1.0), g)
        return RCKSpec(utility, tech, doc["delta"], doc.get("k0", 1.0))
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def load_spec(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
    return spec_from_dict(doc)
