"""Numerical certificates for envelope relations of the value function.

Given a solved value function V and policy correspondence G, the checks here
compare the Clarke interval of V at a state with the partial Clarke interval
of the return ``w`` in its first argument at the optimal choices, and audit the
local hypotheses (interior feasibility, Lipschitz return, regularity, upper
hemicontinuity) under which the inclusion is expected.
"""

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .dp import maximizer_sets, uhc_probe
from .errors import ClarkeDPError, NonFinite, UntrustedRegion
from .models import graph_midpoint_violation
from .nonsmooth import (DEFAULT_TOL, Interval, SamplingSchedule, Verdict, clarke_interval,
                        classical_dir_deriv, dir_deriv_upper_2d, is_regular,
                        is_strongly_differentiable)

# -- Clarke intervals of V and of w in x ----------------------------------

def value_schedule(V, x_bar, seed=0, rho=0.8, num_scales=6, finest_ball=2.05):
    """Sampling schedule matched to the grid of ``V`` near ``x_bar``.

    The finest ball is ``finest_ball`` local meshes so every scale sees
    several linear pieces of the interpolant; steps never exceed one mesh.
    """
    h = V.grid.local_mesh(x_bar)
    return SamplingSchedule(t0=h, rho=rho, num_scales=num_scales, samples_per_scale=64,
                            ball_factor=finest_ball / rho ** (num_scales - 1),
                            step_depth=4, seed=seed)


def _reach(sched):
    return sched.radius(0) + sched.t0


def clarke_of_value(V, x_bar, sched=None, tol=DEFAULT_TOL):
    """Clarke interval of the interpolant ``V`` at ``x_bar``.

    Raises UntrustedRegion when an untrusted knot lies within one mesh of
    ``x_bar`` or inside the sampled window.
    """
    x_bar = float(x_bar)
    sched = sched or value_schedule(V, x_bar)
    k = V.grid.knots
    reach = max(_reach(sched), V.grid.local_mesh(x_bar))
    near = (k >= x_bar - reach) & (k <= x_bar + reach)
    if not (V.grid.lo < x_bar < V.grid.hi):
        raise UntrustedRegion(f"x={x_bar} is not interior to the grid")
    if np.any(near & ~V.trusted):
        bad = k[near & ~V.trusted]
        raise UntrustedRegion(f"untrusted knot {bad[0]:.6g} within {reach:.3g} of x={x_bar}")
    if x_bar - reach < V.grid.lo or x_bar + reach > V.grid.hi:
        raise UntrustedRegion(f"sampling window around x={x_bar} leaves the grid")
    return clarke_interval(V.as_map(), x_bar, sched, tol)


def clarke_of_w_in_x(model, x_bar, y_bar, sched=None, tol=DEFAULT_TOL):
    """Clarke interval of ``x -> w(x, y_bar)`` at ``x_bar``."""
    return clarke_interval(model.w.partial_x(float(y_bar)), float(x_bar), sched, tol)


def w_schedule(model, x_bar, seed=0):
    """Default schedule for partial maps of ``w``: ball ~1e-3 of the state width."""
    scale = 2.5e-4 * model.width if np.isfinite(model.width) else 1e-2 * max(1.0, abs(x_bar))
    return SamplingSchedule(t0=scale, seed=seed)


# -- envelope inclusion ---------------------------------------------------

@dataclass
class PolicyEntry:
    y_bar: float
    dw: Interval
    inclusion_ok: bool
    margin: float


@dataclass
class EnvelopeReport:
    x_bar: float
    dV: Interval
    per_policy: list
    overall: bool
    universal: bool = False
    hull_ok: bool = False
    status: str = "checked"
    notes: dict = field(default_factory=dict)

    def best(self):
        """The entry with the largest margin (None if no maximizer was found)."""
        return max(self.per_policy, key=lambda e: e.margin) if self.per_policy else None

    def to_dict(self):
        return _jsonable(asdict(self))

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def policy_at(model, V, G, x_bar, inner=None):
    """Maximizers at ``x_bar``: the stored set at a knot, otherwise recomputed at ``x_bar``."""
    i = G.nearest_index(x_bar)
    if G.knots[i] == x_bar:
        return np.asarray(G.sets[i], dtype=float)
    sets, _ = maximizer_sets(model, V, [x_bar], G.eta, inner)
    return sets[0]


def inclusion_margin(dV, dw):
    """Signed slack of dV inside dw; negative when dV sticks out."""
    return float(min(dV.lo - dw.lo, dw.hi - dV.hi))


def envelope_inclusion_check(model, V, G, x_bar, tol=1e-2, sched=None, w_sched=None, dV=None):
    """Compare the Clarke interval of V at ``x_bar`` with that of w in x at each maximizer.

    ``dw`` is inflated by ``tol`` on both ends, ``dV`` never shrinks.  The
    verdict ``overall`` is existential over the maximizers; ``universal``
    records whether every maximizer passes and ``hull_ok`` whether dV lies in
    the hull of the union of the dw intervals.
    """
    x_bar = float(x_bar)
    dV = dV if dV is not None else clarke_of_value(V, x_bar, sched, tol)
    w_sched = w_sched or w_schedule(model, x_bar, seed=getattr(sched, "seed", 0))
    entries = []
    for y in policy_at(model, V, G, x_bar):
        dw = clarke_of_w_in_x(model, x_bar, y, w_sched, tol)
        m = inclusion_margin(dV, dw)
        entries.append(PolicyEntry(float(y), dw, bool(m >= -tol), m))
    overall = any(e.inclusion_ok for e in entries)
    universal = bool(entries) and all(e.inclusion_ok for e in entries)
    hull_ok = False
    if entries:
        hull = Interval(min(e.dw.lo for e in entries), max(e.dw.hi for e in entries))
        hull_ok = inclusion_margin(dV, hull) >= -tol
    return EnvelopeReport(x_bar, dV, entries, overall, universal, hull_ok,
                          notes={"tol": tol, "n_maximizers": len(entries)})


# -- smooth and strong-differentiability checks -----------------------------

def _pairs_in_graph(model, lo, hi, n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, (n, 2))
    glo, ghi = model.gamma(x)
    y = glo + (ghi - glo) * rng.uniform(0.02, 0.98, (n, 2))
    return x, y


def concavity_witness(model, lo, hi, n=512, seed=0):
    """Search the graph over ``[lo, hi]`` for a midpoint-concavity violation of w or of the graph."""
    bad = graph_midpoint_violation(replace(model, state_domain=(lo, hi)), n, seed)
    if bad is not None:
        (x1, y1), (x2, y2), (xm, ym) = bad
        return {"kind": "graph_not_convex", "x": [float(x1), float(x2)],
                "y": [float(y1), float(y2)], "midpoint": [float(xm), float(ym)]}
    x, y = _pairs_in_graph(model, lo, hi, n, seed)
    xm, ym = x.mean(axis=1), y.mean(axis=1)
    w0, w1, wm = model.w(x[:, 0], y[:, 0]), model.w(x[:, 1], y[:, 1]), model.w(xm, ym)
    ok = np.isfinite(w0) & np.isfinite(w1) & np.isfinite(wm)
    excess = 0.5 * (w0 + w1) - wm - 1e-10 * (1.0 + np.abs(w0) + np.abs(w1))
    excess = np.where(ok, excess, -np.inf)
    j = int(np.argmax(excess))
    if excess[j] > 0:
        return {"kind": "w_not_concave", "x": x[j].tolist(), "y": y[j].tolist(),
                "excess": float(excess[j])}
    return None


def central_slope(V, x_bar, h=None):
    h = h or 2.0 * V.grid.local_mesh(x_bar)
    return float((V(x_bar + h) - V(x_bar - h)) / (2.0 * h))


def partial_x_numeric(model, x_bar, y_bar, h=None):
    h = h or 1e-6 * max(1.0, abs(x_bar))
    w = model.w
    return float((w(x_bar + h, y_bar) - w(x_bar - h, y_bar)) / (2.0 * h))


def bs_smooth_check(model, V, G, x_bar, tol=1e-2, sched=None, domain=None, seed=0):
    """Smooth envelope equality V'(x) = w_x(x, y) at ``x_bar``.

    Gated on sampled concavity of w and convexity of the graph over ``domain``
    (default: the trusted range of V) and on interior maximizers; when a gate
    fails the verdict is false with ``status = "NotApplicable"``.
    """
    x_bar = float(x_bar)
    lo, hi = domain or V.trusted_range()
    bad = concavity_witness(model, lo, hi, seed=seed)
    if bad is not None:
        return Verdict(False, {"status": "NotApplicable", "x_bar": x_bar, "reason": bad})
    ys = policy_at(model, V, G, x_bar)
    glo, ghi = model.gamma(np.array([x_bar]))
    if len(ys) == 0 or not np.all((ys > glo[0]) & (ys < ghi[0])):
        return Verdict(False, {"status": "NotApplicable", "x_bar": x_bar,
                               "reason": "maximizer not interior", "maximizers": list(map(float, ys))})
    slope = central_slope(V, x_bar)
    wx = partial_x_numeric(model, x_bar, float(ys[0]))
    dV = clarke_of_value(V, x_bar, sched, tol)
    ok = abs(slope - wx) <= tol and dV.width <= tol
    return Verdict(bool(ok), {"status": "pass" if ok else "fail", "x_bar": x_bar,
                              "y_bar": float(ys[0]), "slope": slope, "w_x": wx,
                              "dV": [dV.lo, dV.hi], "dV_width": dV.width})


def strong_diff_value_check(model, V, G, x_bar, tol=1e-2, sched=None, w_sched=None):
    """Singleton Clarke interval of V at ``x_bar``, given some maximizer with strongly differentiable w_y."""
    x_bar = float(x_bar)
    w_sched = w_sched or w_schedule(model, x_bar)
    ys = policy_at(model, V, G, x_bar)
    chosen = None
    for y in ys:
        sd, _ = is_strongly_differentiable(model.w.partial_x(float(y)), x_bar, tol, w_sched)
        if sd:
            chosen = float(y)
            break
    if chosen is None:
        return Verdict(False, {"status": "NotApplicable", "x_bar": x_bar,
                               "reason": "no maximizer with strongly differentiable w_y"})
    dV = clarke_of_value(V, x_bar, sched, tol)
    ok = dV.width <= tol
    return Verdict(bool(ok), {"status": "pass" if ok else "fail", "x_bar": x_bar, "y_bar": chosen,
                              "dV": [dV.lo, dV.hi], "dV_width": dV.width})


# -- hypothesis audit -----------------------------------------------------

@dataclass
class AuditReport:
    x_bar: float
    h1_interior_overlap: Verdict
    h2_lipschitz: Verdict
    h3_regular: Verdict
    h4_uhc_and_inside_W: Verdict
    notes: dict = field(default_factory=dict)

    FLAGS = ("h1_interior_overlap", "h2_lipschitz", "h3_regular", "h4_uhc_and_inside_W")

    @property
    def flags(self):
        return tuple(bool(getattr(self, f)) for f in self.FLAGS)

    @property
    def all_ok(self):
        return all(self.flags)

    def to_dict(self):
        out = {"x_bar": self.x_bar, "notes": self.notes, "all_ok": self.all_ok}
        for f in self.FLAGS:
            v = getattr(self, f)
            out[f] = {"ok": bool(v), "witness": v.witness}
        return _jsonable(out)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def interior_h(model, x, y):
    """H(x, y) = -(y - gamma_lo(x)) (gamma_hi(x) - y); H < 0 means y is interior to Gamma(x)."""
    glo, ghi = model.gamma(np.atleast_1d(x))
    return float(-(y - glo[0]) * (ghi[0] - y))


def lipschitz_lower_bound_2d(w, x_box, y_box, n_pairs=256, seed=0):
    """Largest sampled slope |w(p) - w(q)| / |p - q| over pairs in a box."""
    off = np.random.default_rng(seed).random(4)
    i = np.arange(1, n_pairs + 1)[:, None]
    g = np.array([1 / 1.22074408460575947536 ** k for k in range(1, 5)])
    u = np.mod(off + i * g, 1.0)
    (xl, xh), (yl, yh) = x_box, y_box
    p = np.column_stack([xl + (xh - xl) * u[:, 0], yl + (yh - yl) * u[:, 1]])
    q = np.column_stack([xl + (xh - xl) * u[:, 2], yl + (yh - yl) * u[:, 3]])
    wp, wq = np.asarray(w(p[:, 0], p[:, 1])), np.asarray(w(q[:, 0], q[:, 1]))
    if not (np.all(np.isfinite(wp)) and np.all(np.isfinite(wq))):
        raise NonFinite("w not finite on the probe box")
    d = np.hypot(*(p - q).T)
    keep = d > 0
    return float((np.abs(wp - wq)[keep] / d[keep]).max())


def _audit_h1(model, V, G, x_bar, ys, radii, margin, inner):
    worst = None
    glo0, ghi0 = model.gamma(np.array([x_bar]))
    sign_test = []
    for y in ys:
        H = interior_h(model, x_bar, y)
        ok = glo0[0] + margin < y < ghi0[0] - margin
        sign_test.append({"y_bar": float(y), "H": H, "ok": bool(ok)})
    sign_ok = bool(ys.size) and all(r["ok"] for r in sign_test)
    for r in radii:
        xs = x_bar + r * np.linspace(-1.0, 1.0, 9)
        xs = xs[(xs >= V.grid.lo) & (xs <= V.grid.hi)]
        sets, _ = maximizer_sets(model, V, xs, G.eta, inner)
        glo, ghi = model.gamma(xs)
        for i, s in enumerate(sets):
            for j in range(xs.size):
                hit = np.any((s >= glo[j]) & (s <= ghi[j])) if len(s) else False
                if not hit:
                    worst = {"radius": float(r), "x": float(xs[i]), "x_prime": float(xs[j]),
                             "maximizers": list(map(float, s))}
                    break
            if worst:
                break
        if worst:
            break
    ok = sign_ok and worst is None
    return Verdict(ok, {"sign_test": sign_test, "margin": margin, "overlap_failure": worst,
                        "radii": list(map(float, radii)),
                        "reading": "probe pairs range over a neighborhood W' of x_bar"})


def _audit_h2(model, x_bar, ys, radii, seed):
    records, ok = [], bool(len(ys))
    for y in ys:
        r = radii[0]
        try:
            lo = lipschitz_lower_bound_2d(model.w, (x_bar - r, x_bar + r), (y - r, y + r), 128, seed)
            hi = lipschitz_lower_bound_2d(model.w, (x_bar - r, x_bar + r), (y - r, y + r), 1024, seed)
        except NonFinite as exc:
            records.append({"y_bar": float(y), "error": str(exc)})
            ok = False
            continue
        ratio = hi / lo if lo > 0 else (1.0 if hi == 0 else np.inf)
        good = bool(np.isfinite(hi) and ratio <= 2.0)
        ok &= good
        records.append({"y_bar": float(y), "L_coarse": lo, "L_fine": hi, "ratio": ratio,
                        "radius": float(r), "ok": good})
    return Verdict(ok, {"probes": records})


def _audit_h3(model, x_bar, ys, tol, sched):
    records, ok = [], bool(len(ys))
    for y in ys:
        y = float(y)
        wy = model.w.partial_x(y)
        wx = model.w.partial_y(x_bar)
        try:
            rx = is_regular(wy, x_bar, tol, sched)
            ry = is_regular(wx, y, tol, SamplingSchedule(sched.t0, seed=sched.seed))
            joint = []
            for v in (1.0, -1.0):
                up = dir_deriv_upper_2d(model.w, x_bar, y, v, sched, tol).value
                cl = classical_dir_deriv(wy, x_bar, v, sched, tol).value
                joint.append({"v": v, "upper_2d": up, "classical": cl, "gap": abs(up - cl)})
            rj = all(j["gap"] <= tol for j in joint)
        except ClarkeDPError as exc:
            records.append({"y_bar": y, "error": f"{exc.code}: {exc}"})
            ok = False
            continue
        good = bool(rx) and bool(ry) and rj
        ok &= good
        records.append({"y_bar": y, "partial_x": rx.witness, "partial_x_ok": bool(rx),
                        "partial_y": ry.witness, "partial_y_ok": bool(ry),
                        "joint": joint, "joint_ok": rj, "ok": good})
    return Verdict(ok, {"probes": records})


def _audit_h4(model, G, x_bar, ys, radii):
    lo, hi = model.state_domain
    rounds = []
    ok = True
    for r in radii:
        v = uhc_probe(G, x_bar, r)
        rounds.append({"radius": float(r), "ok": bool(v), **v.witness})
        ok &= bool(v)
    inside = bool(len(ys)) and bool(np.all((ys > lo) & (ys < hi)))
    return Verdict(bool(ok and inside), {"uhc_rounds": rounds, "inside_W": inside,
                                         "maximizers": list(map(float, ys))})


def default_radii(V, x_bar, rounds=3):
    h = V.grid.local_mesh(x_bar)
    return [20.0 * h * 0.5**i for i in range(rounds)]


def hypothesis_audit(model, V, G, x_bar, radii=None, tols=None, seed=0, inner=None):
    """Probe the four local hypotheses at ``x_bar``.  Never raises on a failed probe.

    ``tols`` may override ``regular`` (regularity tolerance) and ``margin``
    (interiority margin for the sign test of H, default two meshes).
    """
    x_bar = float(x_bar)
    tols = dict(tols or {})
    radii = list(radii or default_radii(V, x_bar))
    tol_reg = tols.get("regular", DEFAULT_TOL)
    margin = tols.get("margin", 2.0 * V.grid.local_mesh(x_bar))
    ys = np.asarray(policy_at(model, V, G, x_bar, inner), dtype=float)
    sched = w_schedule(model, x_bar, seed)
    h1 = _audit_h1(model, V, G, x_bar, ys, radii, margin, inner)
    h2 = _audit_h2(model, x_bar, ys, radii, seed)
    h3 = _audit_h3(model, x_bar, ys, tol_reg, sched)
    h4 = _audit_h4(model, G, x_bar, ys, radii)
    return AuditReport(x_bar, h1, h2, h3, h4, notes={"maximizers": ys.tolist(), "radii": radii})


# -- gated verification and sweeps ----------------------------------------

@dataclass
class PointResult:
    x_bar: float
    audit: AuditReport
    envelope: EnvelopeReport

    @property
    def applicable(self):
        return self.audit.all_ok

    @property
    def verdict(self):
        """'true' / 'false' when the hypotheses hold, 'NotApplicable' otherwise."""
        if not self.applicable:
            return "NotApplicable"
        return "true" if self.envelope.overall else "false"


def verify_point(model, V, G, x_bar, tol=1e-2, seed=0, inner=None):
    """Audit the hypotheses at ``x_bar``, then run the inclusion check.

    The inclusion check is always computed; when a hypothesis fails its
    status becomes NotApplicable.
    """
    x_bar = float(x_bar)
    audit = hypothesis_audit(model, V, G, x_bar, seed=seed, inner=inner)
    try:
        env = envelope_inclusion_check(model, V, G, x_bar, tol,
                                       sched=value_schedule(V, x_bar, seed))
    except ClarkeDPError as exc:
        env = EnvelopeReport(x_bar, None, [], False, status=exc.code,
                             notes={"tol": tol, "error": str(exc)})
    if not audit.all_ok:
        env.status = "NotApplicable"
    return PointResult(float(x_bar), audit, env)


def thread_count(n_tasks):
    """Worker count from ENVELOPE_DP_THREADS (unset or 0 = automatic)."""
    raw = os.environ.get("ENVELOPE_DP_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"ENVELOPE_DP_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("ENVELOPE_DP_THREADS must be >= 0")
    if n == 0:
        n = min(os.cpu_count() or 1, 8)
    return max(1, min(n, n_tasks))


def sweep(model, V, G, points, tol=1e-2, seed=0, inner=None, tol_scale=None):
    """``verify_point`` over many states, fanned out over threads; results in input order.

    ``tol_scale(x)`` multiplies ``tol`` per point (e.g. a local Lipschitz
    constant, since ``tol`` is meant for unit-scale slopes).
    """
    points = [float(p) for p in points]
    n = thread_count(len(points))
    scale = tol_scale or (lambda x: 1.0)
    run = lambda p: verify_point(model, V, G, p, tol * scale(p), seed, inner)
    if n == 1:
        return [run(p) for p in points]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(run, points))


SWEEP_COLUMNS = ("x_bar", "dV_lo", "dV_hi", "dw_lo", "dw_hi", "inclusion_ok", "h1", "h2", "h3", "h4")


def sweep_rows(results):
    rows = []
    for r in results:
        b = r.envelope.best()
        nan = float("nan")
        dw = (b.dw.lo, b.dw.hi) if b else (nan, nan)
        dV = (r.envelope.dV.lo, r.envelope.dV.hi) if r.envelope.dV is not None else (nan, nan)
        rows.append((r.x_bar, dV[0], dV[1], dw[0], dw[1], r.verdict,
                     *(str(f).lower() for f in r.audit.flags)))
    return rows


def sweep_csv(results):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SWEEP_COLUMNS)
    for row in sweep_rows(results):
        wr.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Interval):
        return {"lo": float(obj.lo), "hi": float(obj.hi), "clamped": obj.clamped}
    if isinstance(obj, Verdict):
        return {"ok": bool(obj.ok), "witness": _jsonable(obj.witness)}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj
