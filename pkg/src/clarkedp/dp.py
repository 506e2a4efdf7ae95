"""Value iteration for one-dimensional reduced-form problems.

The problem is

    max  sum_t delta**t w(x_t, x_{t+1})   s.t.  x_{t+1} in [gamma_lo(x_t), gamma_hi(x_t)]

and the solver works with the Bellman operator

    (TV)(x) = max { w(x, y) + delta V(y) : y in Gamma(x) }

on a finite grid with piecewise-linear interpolation.  Inner maximization is a
coarse scan followed by golden-section refinement, vectorized over knots.
"""

import json
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptyFeasible, MaxIterExceeded, TooLarge
from .nonsmooth import NEG_INF, ScalarMap1, Verdict, as_map

log = logging.getLogger(__name__)

W_FLOOR = -1e12
_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


class ScalarMap2:
    """A real function of two variables; ``fn(x, y)`` must broadcast over numpy arrays."""

    def __init__(self, fn, name=None):
        self.fn = fn
        self.name = name or getattr(fn, "__name__", "w")

    def __call__(self, x, y):
        return np.asarray(self.fn(np.asarray(x, float), np.asarray(y, float)), dtype=float)

    def partial_x(self, y):
        """The section ``x -> w(x, y)`` as a :class:`ScalarMap1`."""
        return ScalarMap1(lambda x: self(x, y), name=f"{self.name}(., {y:.6g})")

    def partial_y(self, x):
        return ScalarMap1(lambda y: self(x, y), name=f"{self.name}({x:.6g}, .)")


@dataclass
class ReducedFormModel:
    delta: float
    w: ScalarMap2
    gamma_lo: ScalarMap1
    gamma_hi: ScalarMap1
    state_domain: tuple
    name: str = "model"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not isinstance(self.w, ScalarMap2):
            self.w = ScalarMap2(self.w)
        self.gamma_lo = as_map(self.gamma_lo)
        self.gamma_hi = as_map(self.gamma_hi)
        lo, hi = self.state_domain
        if not lo < hi:
            raise ValueError("state_domain must be a nondegenerate interval")
        self.state_domain = (float(lo), float(hi))

    @property
    def width(self):
        return self.state_domain[1] - self.state_domain[0]

    def gamma(self, x):
        x = np.asarray(x, float)
        return (np.broadcast_to(self.gamma_lo(x), x.shape).astype(float),
                np.broadcast_to(self.gamma_hi(x), x.shape).astype(float))

    def validate(self, n=257):
        """Probe the invariants: Gamma nonempty and mapping the state domain into itself."""
        lo, hi = self.state_domain
        xs = np.linspace(lo, hi, n)
        glo, ghi = self.gamma(xs)
        eps = 1e-9 * self.width
        problems = []
        if np.any(glo > ghi + eps):
            problems.append(f"Gamma empty at x={xs[np.argmax(glo - ghi)]:.6g}")
        if np.any(glo < lo - eps) or np.any(ghi > hi + eps):
            problems.append("Gamma leaves the state domain")
        return problems


@dataclass
class Grid:
    knots: np.ndarray

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        if self.knots.ndim != 1 or self.knots.size < 3:
            raise ValueError("a grid needs at least 3 knots")
        if np.any(np.diff(self.knots) <= 0):
            raise ValueError("grid knots must be strictly increasing")

    def __len__(self):
        return self.knots.size

    @property
    def lo(self):
        return float(self.knots[0])

    @property
    def hi(self):
        return float(self.knots[-1])

    @property
    def mesh(self):
        return float(np.diff(self.knots).max())

    def local_mesh(self, x):
        i = int(np.clip(np.searchsorted(self.knots, x), 1, len(self) - 1))
        lo, hi = max(i - 2, 0), min(i + 2, len(self) - 1)
        return float(np.diff(self.knots[lo:hi + 1]).max())

    @classmethod
    def uniform(cls, lo, hi, n):
        return cls(np.linspace(lo, hi, n))

    @classmethod
    def reciprocal(cls, lo, hi, n):
        """Knots uniform in 1/x (spacing grows like x**2); needs lo > 0."""
        if lo <= 0:
            raise ValueError("reciprocal grids need lo > 0")
        k = 1.0 / np.linspace(1.0 / lo, 1.0 / hi, n)
        k[0], k[-1] = lo, hi
        return cls(k)

    @classmethod
    def geometric_uniform(cls, lo, hi, n, k_min=None, switch=None):
        """Log-spaced knots near ``lo`` joined to uniform spacing up to ``hi``.

        With ``lo == 0`` the first knot is 0 itself, followed by a geometric run
        from ``k_min`` (default ``1e-3 * hi``).
        """
        switch = switch if switch is not None else lo + 0.25 * (hi - lo)
        k_min = k_min if k_min is not None else (lo if lo > 0 else 1e-3 * hi)
        n_left = max(n // 2, 2)
        if lo == 0:
            geo = np.geomspace(k_min, switch, n_left - 1, endpoint=False)
            left = np.concatenate([[0.0], geo])
        else:
            left = np.geomspace(k_min, switch, n_left, endpoint=False)
        right = np.linspace(switch, hi, n - left.size)
        return cls(np.concatenate([left, right]))


class ValueFunction:
    """Grid values with piecewise-linear interpolation; ``NEG_INF`` outside the grid span."""

    def __init__(self, grid, values, trusted=None, meta=None):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != grid.knots.shape:
            raise ValueError("values must match the grid")
        self.trusted = (np.isfinite(self.values) if trusted is None
                        else np.asarray(trusted, dtype=bool))
        self.meta = meta or {}

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        k, v = self.grid.knots, self.values
        i = np.clip(np.searchsorted(k, y, side="right") - 1, 0, k.size - 2)
        lam = (y - k[i]) / (k[i + 1] - k[i])
        va, vb = v[i], v[i + 1]
        with np.errstate(invalid="ignore"):
            out = va + lam * (vb - va)
        out = np.where(np.isfinite(va) & np.isfinite(vb), out, NEG_INF)
        out = np.where(lam == 0.0, va, out)
        out = np.where(lam == 1.0, vb, out)
        out = np.where((y < k[0]) | (y > k[-1]), NEG_INF, out)
        return out if out.ndim else float(out)

    def as_map(self):
        return ScalarMap1(self, domain=(self.grid.lo, self.grid.hi), name="V")

    def __neg__(self):
        return ValueFunction(self.grid, -self.values, self.trusted, dict(self.meta))

    @property
    def slopes(self):
        return np.diff(self.values) / np.diff(self.grid.knots)

    def lipschitz(self, lo=None, hi=None):
        """Largest adjacent |slope| over finite cells inside [lo, hi]."""
        k = self.grid.knots
        s = self.slopes
        mask = np.isfinite(s)
        if lo is not None:
            mask &= k[1:] >= lo
        if hi is not None:
            mask &= k[:-1] <= hi
        return float(np.abs(s[mask]).max()) if mask.any() else 0.0

    def trusted_range(self):
        idx = np.flatnonzero(self.trusted)
        if idx.size == 0:
            raise ValueError("no trusted knots")
        return float(self.grid.knots[idx[0]]), float(self.grid.knots[idx[-1]])


@dataclass(frozen=True)
class InnerConfig:
    """Inner maximization settings: scan size, golden tolerance (relative to domain width), floor for w."""

    n_scan: int = 65
    xtol_rel: float = 1e-10
    w_floor: float = None

    def __post_init__(self):
        if self.n_scan < 65:
            raise ValueError("the coarse scan needs at least 65 points")


@dataclass
class PolicySet:
    knots: np.ndarray
    sets: list
    eta: float
    values: np.ndarray = None

    def nearest_index(self, x):
        return int(np.argmin(np.abs(self.knots - x)))

    def at(self, x):
        return self.sets[self.nearest_index(x)]

    def selection(self, rule="smallest"):
        pick = np.min if rule == "smallest" else np.max
        return np.array([pick(s) if len(s) else np.nan for s in self.sets])


@dataclass
class SolveReport:
    iterations: int
    sup_residual: float
    contraction_estimate: float
    wall_time: float
    changes: list = field(default_factory=list)

    def to_dict(self, include_time=True):
        return {
            "iterations": self.iterations,
            "sup_residual": self.sup_residual,
            "contraction_estimate": self.contraction_estimate,
            "wall_time_ms": round(1000 * self.wall_time, 3) if include_time else None,
        }

    def to_json(self, include_time=True):
        return json.dumps(self.to_dict(include_time), indent=2, sort_keys=True)


def golden_max(fun, a, b, xtol):
    """Vectorized golden-section maximization of ``fun`` on brackets ``[a, b]``.

    Returns ``(x, f(x))`` arrays; the better of the two final interior points.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fun(c), fun(d)
    span = float(np.max(b - a)) if a.size else 0.0
    n_iter = int(np.ceil(np.log(max(span, xtol) / xtol) / np.log(1.0 / _INV_PHI))) + 1
    for _ in range(n_iter):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = np.where(left, b - _INV_PHI * (b - a), d)
        d_new = np.where(left, c, a + _INV_PHI * (b - a))
        probe = np.where(left, c_new, d_new)
        fp = fun(probe)
        fd, fc = np.where(left, fc, fp), np.where(left, fp, fd)
        c, d = c_new, d_new
    best_c = fc >= fd
    return np.where(best_c, c, d), np.where(best_c, fc, fd)


def _feasible_bounds(model, V, xs):
    glo, ghi = model.gamma(xs)
    if np.any(glo > ghi):
        i = int(np.argmax(glo - ghi))
        raise EmptyFeasible(f"Gamma({xs[i]:.6g}) = [{glo[i]:.6g}, {ghi[i]:.6g}] is empty")
    lo = np.maximum(glo, V.grid.lo)
    hi = np.minimum(ghi, V.grid.hi)
    if np.any(lo > hi):
        i = int(np.argmax(lo - hi))
        raise EmptyFeasible(f"Gamma({xs[i]:.6g}) does not meet the grid span")
    return lo, hi


def _objective(model, V, inner):
    def obj(X, Y):
        wv = model.w(X, Y)
        if inner.w_floor is not None:
            wv = np.maximum(np.where(np.isnan(wv), NEG_INF, wv), inner.w_floor)
        with np.errstate(invalid="ignore"):
            out = wv + model.delta * V(Y)
        return np.where(np.isnan(out), NEG_INF, out)
    return obj


def _xtol(model, V, inner):
    width = model.width if np.isfinite(model.width) else V.grid.hi - V.grid.lo
    return inner.xtol_rel * width


def maximize_at(model, V, xs, inner=None):
    """Value and one maximizer of ``y -> w(x, y) + delta V(y)`` for each state in ``xs``.

    Candidates where the objective is NEG_INF are excluded; states where every
    candidate is excluded get value NEG_INF and maximizer NaN.
    """
    inner = inner or InnerConfig()
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    lo, hi = _feasible_bounds(model, V, xs)
    obj = _objective(model, V, inner)
    s = np.linspace(0.0, 1.0, inner.n_scan)
    Y = lo[:, None] + (hi - lo)[:, None] * s[None, :]
    F = obj(xs[:, None], Y)
    j = np.argmax(F, axis=1)
    rows = np.arange(xs.size)
    best_y, best_f = Y[rows, j], F[rows, j]
    dead = ~np.isfinite(best_f)
    a = Y[rows, np.maximum(j - 1, 0)]
    b = Y[rows, np.minimum(j + 1, inner.n_scan - 1)]
    live = ~dead & (b > a)
    if live.any():
        xl = xs[live]
        yg, fg = golden_max(lambda y: obj(xl, y), a[live], b[live], _xtol(model, V, inner))
        better = fg > best_f[live]
        best_y[live] = np.where(better, yg, best_y[live])
        best_f[live] = np.where(better, fg, best_f[live])
    best_y[dead] = np.nan
    if dead.any():
        log.warning("AllNegInf: every candidate is NEG_INF at %d state(s), e.g. x=%g",
                    int(dead.sum()), xs[dead][0])
    return best_f, best_y


def bellman_apply(model, V, inner=None):
    """One application of the Bellman operator at every knot of ``V.grid``."""
    inner = inner or InnerConfig()
    vals, _ = maximize_at(model, V, V.grid.knots, inner)
    dead = np.flatnonzero(~np.isfinite(vals))
    return ValueFunction(V.grid, vals, meta={"all_neg_inf": dead.tolist()})


def _floor_regime(values, w_floor):
    return values <= 0.5 * w_floor


def trusted_mask(values, delta, w_floor=W_FLOOR):
    """Knots far from the clamped floor (and not still converging towards it)."""
    floor_value = w_floor / (1.0 - delta)
    return (np.isfinite(values)
            & (values > floor_value + 10.0 / (1.0 - delta))
            & ~_floor_regime(values, w_floor))


def solve_value_iteration(model, grid, tol=1e-6, max_iter=5000, inner=None, w_floor=W_FLOOR):
    """Iterate the Bellman operator from V = 0 until the knot change is at most tol*(1-delta)/delta.

    ``w`` is clamped below at ``w_floor``.  Knots stuck at the floor (e.g. zero
    capital under log utility) converge slowly towards ``w_floor/(1-delta)``;
    they are excluded from the stopping rule and marked untrusted.
    """
    inner = replace(inner or InnerConfig(), w_floor=w_floor)
    delta = model.delta
    threshold = tol * (1.0 - delta) / delta
    V = ValueFunction(grid, np.zeros(len(grid)))
    changes = []
    t_start = time.perf_counter()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        V_new = bellman_apply(model, V, inner)
        keep = ~_floor_regime(V_new.values, w_floor) & ~_floor_regime(V.values, w_floor)
        diff = np.abs(V_new.values - V.values)[keep]
        change = float(diff.max()) if diff.size else 0.0
        changes.append(change)
        V = V_new
        if change <= threshold:
            converged = True
            break
    V.trusted = trusted_mask(V.values, delta, w_floor)
    contraction = (changes[-1] / changes[-2]) if len(changes) > 1 and changes[-2] > 0 else 0.0
    residual = bellman_residual(model, V, inner)
    report = SolveReport(it, residual, float(contraction), time.perf_counter() - t_start, changes)
    if not converged:
        raise MaxIterExceeded(f"no convergence after {max_iter} iterations "
                              f"(last change {changes[-1]:.3g})", partial=(V, report))
    return V, report


def bellman_residual(model, V, inner=None):
    """max |V - TV| over trusted finite knots."""
    inner = inner or InnerConfig(w_floor=W_FLOOR)
    TV = bellman_apply(model, V, inner)
    mask = V.trusted & np.isfinite(V.values) & np.isfinite(TV.values)
    if not mask.any():
        return 0.0
    return float(np.abs(V.values - TV.values)[mask].max())


def maximizer_sets(model, V, xs, eta=1e-6, inner=None, merge_tol=None):
    """All eta-maximizers of ``y -> w(x, y) + delta V(y)`` for each state in ``xs``.

    Every local maximum of the coarse scan is refined by golden section; those
    within ``eta`` of the best are kept and points closer than ``merge_tol``
    are merged.
    """
    inner = inner or InnerConfig()
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    lo, hi = _feasible_bounds(model, V, xs)
    obj = _objective(model, V, inner)
    m = inner.n_scan
    s = np.linspace(0.0, 1.0, m)
    Y = lo[:, None] + (hi - lo)[:, None] * s[None, :]
    F = obj(xs[:, None], Y)
    left = np.concatenate([np.full((xs.size, 1), NEG_INF), F[:, :-1]], axis=1)
    right = np.concatenate([F[:, 1:], np.full((xs.size, 1), NEG_INF)], axis=1)
    is_peak = np.isfinite(F) & (F >= left) & (F >= right)
    ri, ci = np.nonzero(is_peak)
    a = Y[ri, np.maximum(ci - 1, 0)]
    b = Y[ri, np.minimum(ci + 1, m - 1)]
    yc, fc = Y[ri, ci], F[ri, ci]
    if ri.size:
        yg, fg = golden_max(lambda y: obj(xs[ri], y), a, b, _xtol(model, V, inner))
        better = fg > fc
        yc, fc = np.where(better, yg, yc), np.where(better, fg, fc)
    merge_tol = merge_tol if merge_tol is not None else 1e-6 * _xtol(model, V, inner) / inner.xtol_rel
    out, vals = [], np.full(xs.size, NEG_INF)
    for i in range(xs.size):
        sel = ri == i
        if not sel.any():
            out.append(np.array([]))
            continue
        ys, fs = yc[sel], fc[sel]
        top = fs.max()
        vals[i] = top
        keep = fs >= top - eta
        ys, fs = ys[keep], fs[keep]
        order = np.argsort(ys)
        ys, fs = ys[order], fs[order]
        merged = []
        start = 0
        for k in range(1, ys.size + 1):
            if k == ys.size or ys[k] - ys[k - 1] > merge_tol:
                j = start + int(np.argmax(fs[start:k]))
                merged.append(ys[j])
                start = k
        out.append(np.array(merged))
    return out, vals


def extract_policy(model, V, eta=1e-6, inner=None):
    """The eta-argmax correspondence at every knot of ``V.grid``."""
    sets, vals = maximizer_sets(model, V, V.grid.knots, eta, inner)
    return PolicySet(V.grid.knots.copy(), sets, eta, vals)


def finite_horizon_oracle(model, x0, horizon, oracle_grid, return_path=False):
    """Exact best discounted ``horizon``-period return over grid-valued feasible paths.

    Enumerates all paths x_1..x_T on the oracle grid (x_{t+1} in Gamma(x_t))
    with memoization over (period, knot).  Independent of the value-iteration
    code path.
    """
    K = oracle_grid.knots
    if horizon > 8 or K.size > 40:
        raise TooLarge(f"oracle limited to horizon <= 8 and <= 40 knots (got {horizon}, {K.size})")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if horizon == 0:
        return (0.0, [float(x0)]) if return_path else 0.0
    delta = model.delta
    eps = 1e-12 * max(1.0, float(np.abs(K).max()))

    def row(x):
        glo, ghi = model.gamma(np.array([x]))
        feas = (K >= glo[0] - eps) & (K <= ghi[0] + eps)
        r = np.where(feas, model.w(np.full(K.size, x), K), NEG_INF)
        return np.where(np.isnan(r), NEG_INF, r)

    W = np.array([row(x) for x in K])
    memo = {horizon: np.zeros(K.size)}
    choice = {}
    for t in range(horizon - 1, 0, -1):
        cand = W + delta * memo[t + 1][None, :]
        choice[t] = np.argmax(cand, axis=1)
        memo[t] = cand[np.arange(K.size), choice[t]]
    first = row(float(x0)) + delta * memo[1]
    j = int(np.argmax(first))
    value = float(first[j])
    if not return_path:
        return value
    path = [float(x0), float(K[j])]
    for t in range(1, horizon):
        j = int(choice[t][j])
        path.append(float(K[j]))
    return value, path


def oracle_sandwich(V_x0, oracle_value, delta, horizon, tail_lo, tail_hi, slack):
    """Bracket implied by truncating at ``horizon`` periods.

    ``tail_lo``/``tail_hi`` bound the continuation value at any reachable state.
    Returns ``Verdict`` with the interval ``[lower, upper]`` for V(x0).
    """
    lower = oracle_value + delta**horizon * tail_lo - slack
    upper = oracle_value + delta**horizon * tail_hi + slack
    ok = lower <= V_x0 <= upper
    return Verdict(bool(ok), {"lower": lower, "upper": upper, "value": V_x0,
                              "oracle": oracle_value, "slack": slack})


def simulate_path(policy, x0, steps, tie_rule="smallest"):
    """Follow the policy from ``x0``, using the nearest knot's maximizer set."""
    if tie_rule not in ("smallest", "largest"):
        raise ValueError("tie_rule must be 'smallest' or 'largest'")
    pick = min if tie_rule == "smallest" else max
    path = [float(x0)]
    x = float(x0)
    for _ in range(steps):
        s = policy.at(x)
        if len(s) == 0:
            break
        x = float(pick(s))
        path.append(x)
    return path


def _policy_lipschitz_proxy(policy, idx):
    """Median slope of the smallest selection over strides of a quarter window.

    Long strides see through the staircase a snapped argmax produces, and an
    isolated jump is crossed by fewer than half of the strided pairs.
    """
    sel = policy.selection("smallest")[idx]
    k = policy.knots[idx]
    ok = np.isfinite(sel)
    sel, k = sel[ok], k[ok]
    if sel.size < 2:
        return 0.0
    s = max(1, sel.size // 4)
    slopes = np.abs((sel[s:] - sel[:-s]) / (k[s:] - k[:-s]))
    return float(np.median(slopes))


def uhc_probe(policy, x_bar, radius, n=8, dist_tol=None):
    """Sampled upper-hemicontinuity check of the policy correspondence at ``x_bar``.

    ``G(x_bar)`` is the maximizer set at the knot nearest ``x_bar``; the probes
    are the ``n`` other knots closest to it within ``radius``.  The verdict is
    true iff every maximizer at every probe lies within ``dist_tol`` of
    ``G(x_bar)``.  The default tolerance is ``10 * radius * L`` plus two local
    meshes, with ``L`` a jump-robust slope of the smallest selection over the
    window, so an isolated jump is not absorbed into the tolerance.
    """
    i0 = policy.nearest_index(x_bar)
    base = policy.sets[i0]
    d = np.abs(policy.knots - policy.knots[i0])
    window = np.flatnonzero(d <= radius)
    probes = [j for j in window[np.argsort(d[window], kind="stable")] if j != i0][:n]
    span = float(policy.knots[-1] - policy.knots[0])
    if dist_tol is None:
        h = float(np.diff(policy.knots[max(i0 - 2, 0):i0 + 3]).max())
        dist_tol = 10.0 * radius * _policy_lipschitz_proxy(policy, window) + 2.0 * h + 1e-6 * span
    worst, worst_at = 0.0, None
    if len(base) == 0:
        return Verdict(False, {"reason": "empty maximizer set at x_bar", "x_bar": x_bar})
    for j in probes:
        for y in policy.sets[j]:
            gap = float(np.min(np.abs(base - y)))
            if gap > worst:
                worst, worst_at = gap, float(policy.knots[j])
    return Verdict(worst <= dist_tol, {
        "x_bar": float(x_bar), "knot": float(policy.knots[i0]), "radius": radius,
        "dist_tol": dist_tol, "worst_gap": worst, "worst_probe": worst_at,
        "n_probes": len(probes),
    })
