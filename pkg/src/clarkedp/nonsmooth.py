"""Numerical Clarke calculus for functions of one real variable.

The generalized directional derivative

    f°(x; v) = limsup_{y -> x, t -> 0+} [f(y + t v) - f(y)] / t

is discretized on a ladder of shrinking base-point balls.  At scale ``k`` the
base points ``y`` fill the ball of radius ``ball_factor * t0 * rho**k`` around
``x`` (low-discrepancy, seeded) and each base point is paired with a ladder of
``step_depth`` steps starting at ``t0 * rho**k``.  The supremum over that box is
the per-scale value; the estimate is the larger of the two finest per-scale
suprema.

In one dimension the Clarke differential is the interval
``[-f°(x; -1), f°(x; +1)]``.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainEscape, EstimatorInconsistent, NonFinite, NotConvex

NEG_INF = -np.inf
DEFAULT_TOL = 5e-3

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
# plastic-number additive recurrence, used for 2-d low-discrepancy pairs
_PLASTIC = 1.324717957244746
_R2 = np.array([1.0 / _PLASTIC, 1.0 / _PLASTIC**2])


class ScalarMap1:
    """A real function of one variable with a declared closed domain.

    ``fn`` should accept numpy arrays; pass ``vectorized=False`` for scalar-only
    callables.  ``fn`` may return ``NEG_INF`` (e.g. log utility at zero
    consumption) but never ``+inf`` or NaN.
    """

    def __init__(self, fn, domain=(-np.inf, np.inf), vectorized=True, name=None):
        self.fn = fn
        self.domain = (float(domain[0]), float(domain[1]))
        self.vectorized = vectorized
        self.name = name or getattr(fn, "__name__", "f")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.vectorized:
            out = self.fn(x)
        else:
            out = np.vectorize(self.fn, otypes=[float])(x)
        return np.asarray(out, dtype=float) if np.ndim(out) else float(out)

    def __neg__(self):
        return ScalarMap1(lambda x: -self(x), self.domain, name=f"-{self.name}")

    def __repr__(self):
        return f"ScalarMap1({self.name}, domain={self.domain})"


def as_map(f):
    """Wrap a plain callable as an unrestricted :class:`ScalarMap1`."""
    return f if isinstance(f, ScalarMap1) else ScalarMap1(f)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    clamped: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise NonFinite(f"interval endpoints must be finite, got [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def mid(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, p, tol=0.0):
        return self.lo - tol <= p <= self.hi + tol

    def __contains__(self, p):
        return self.contains(p)

    def subset_of(self, other, tol=0.0):
        """True iff self lies inside ``other`` inflated by ``tol`` at both ends."""
        return other.lo - tol <= self.lo and self.hi <= other.hi + tol

    def __neg__(self):
        return Interval(-self.hi, -self.lo, self.clamped)

    def scaled(self, a):
        lo, hi = sorted((a * self.lo, a * self.hi))
        return Interval(lo, hi, self.clamped)

    def distance(self, other):
        """Largest endpoint discrepancy between two intervals."""
        return max(abs(self.lo - other.lo), abs(self.hi - other.hi))


@dataclass(frozen=True)
class SamplingSchedule:
    t0: float
    rho: float = 0.5
    num_scales: int = 8
    samples_per_scale: int = 64
    ball_factor: float = 4.0
    step_depth: int = 24
    seed: int = 0

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.num_scales < 3:
            raise ValueError("num_scales must be >= 3")
        if self.samples_per_scale < 8:
            raise ValueError("samples_per_scale must be >= 8")
        if not self.ball_factor > 0:
            raise ValueError("ball_factor must be positive")
        if self.step_depth < 1:
            raise ValueError("step_depth must be >= 1")

    @classmethod
    def default(cls, x=0.0, seed=0):
        return cls(t0=1e-2 * max(1.0, abs(float(x))), seed=seed)

    def radius(self, k):
        return self.ball_factor * self.t0 * self.rho**k

    def steps(self, k):
        return self.t0 * self.rho ** (k + np.arange(self.step_depth))

    @property
    def finest_step(self):
        return self.t0 * self.rho ** (self.num_scales + self.step_depth - 2)

    def rescaled(self, a):
        """Schedule for direction ``a*v`` producing the same sample set as ``self`` for ``v``."""
        return replace(self, t0=self.t0 / a, ball_factor=self.ball_factor * a)

    def check(self, x):
        floor = 64 * np.finfo(float).eps * max(1.0, abs(x))
        if self.finest_step <= floor:
            raise ValueError(
                f"finest step {self.finest_step:.3g} is below the cancellation floor {floor:.3g}"
            )

    def offsets(self):
        return np.random.default_rng(self.seed).random((self.num_scales, 2))


@dataclass
class DirDerivEstimate:
    value: float
    per_scale_sup: list
    converged: bool
    tol: float = DEFAULT_TOL
    kind: str = "upper"


@dataclass
class Verdict:
    """Boolean verdict carrying the measurements that produced it."""

    ok: bool
    witness: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.ok)


def _eval_checked(f, pts):
    vals = np.asarray(f(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = np.asarray(pts)[~np.isfinite(vals)]
        raise NonFinite(f"{getattr(f, 'name', 'f')} is not finite at {bad.ravel()[:3]}")
    return vals


def _base_window(f, x, r, tv_lo, tv_hi):
    dlo, dhi = f.domain
    if not dlo <= x <= dhi:
        raise DomainEscape(f"x={x} outside domain {f.domain}")
    lo = max(x - r, dlo - tv_lo)
    hi = min(x + r, dhi - tv_hi)
    if hi < lo:
        raise DomainEscape(f"no base point near x={x} keeps y and y+tv inside {f.domain}")
    return lo, hi


def scale_quotients(f, x, v, sched=None):
    """Difference quotients for every scale of the schedule.

    Returns a list of ``(steps, quotients)`` with ``quotients`` of shape
    ``(samples_per_scale, step_depth)``.
    """
    f = as_map(f)
    x, v = float(x), float(v)
    sched = sched or SamplingSchedule.default(x)
    sched.check(x)
    offsets = sched.offsets()
    idx = np.arange(1, sched.samples_per_scale + 1)
    out = []
    for k in range(sched.num_scales):
        t = sched.steps(k)
        tv = t * v
        lo, hi = _base_window(f, x, sched.radius(k), min(0.0, tv.min()), max(0.0, tv.max()))
        u = np.mod(offsets[k, 0] + idx * _GOLDEN, 1.0)
        y = lo + (hi - lo) * u
        fy = _eval_checked(f, y)
        fyt = _eval_checked(f, y[:, None] + tv[None, :])
        out.append((t, (fyt - fy[:, None]) / t[None, :]))
    return out


def _estimate(per_scale, kind, tol):
    last2 = per_scale[-2:]
    value = max(last2) if kind == "upper" else min(last2)
    return DirDerivEstimate(
        value=float(value),
        per_scale_sup=[float(s) for s in per_scale],
        converged=bool(abs(last2[1] - last2[0]) <= tol),
        tol=tol,
        kind=kind,
    )


def dir_deriv_upper(f, x, v, sched=None, tol=DEFAULT_TOL):
    """Estimate the generalized directional derivative f°(x; v)."""
    if v == 0:
        return DirDerivEstimate(0.0, [0.0], True, tol)
    per = [q.max() for _, q in scale_quotients(f, x, v, sched)]
    return _estimate(per, "upper", tol)


def dir_deriv_lower(f, x, v, sched=None, tol=DEFAULT_TOL):
    """Estimate the liminf counterpart f*(x; v); equals -dir_deriv_upper(-f, x, v) sample for sample."""
    if v == 0:
        return DirDerivEstimate(0.0, [0.0], True, tol, kind="lower")
    per = [q.min() for _, q in scale_quotients(f, x, v, sched)]
    return _estimate(per, "lower", tol)


def _interval_from_bounds(lo, hi, tol, what):
    if lo <= hi:
        return Interval(lo, hi)
    if lo - hi <= 2 * tol:
        m = 0.5 * (lo + hi)
        return Interval(m, m, clamped=True)
    raise EstimatorInconsistent(
        f"{what}: lower end {lo:.6g} exceeds upper end {hi:.6g} by more than 2*tol"
    )


def clarke_interval(f, x, sched=None, tol=DEFAULT_TOL):
    """The one-dimensional Clarke differential ``[-f°(x;-1), f°(x;+1)]``."""
    hi = dir_deriv_upper(f, x, 1.0, sched, tol).value
    lo = -dir_deriv_upper(f, x, -1.0, sched, tol).value
    return _interval_from_bounds(lo, hi, tol, "clarke_interval")


def superdifferential_interval(f, x, sched=None, tol=DEFAULT_TOL):
    """``{p : p*v >= f*(x; v) for v = +-1}`` built from the liminf estimator."""
    lo = dir_deriv_lower(f, x, 1.0, sched, tol).value
    hi = -dir_deriv_lower(f, x, -1.0, sched, tol).value
    return _interval_from_bounds(lo, hi, tol, "superdifferential_interval")


def classical_dir_deriv(f, x, v, sched=None, tol=DEFAULT_TOL):
    """One-sided derivative f'(x; v) from quotients anchored at ``x`` itself.

    ``converged`` is False when the two finest quotients disagree by more than
    ``tol``, which is how a missing limit is reported.
    """
    f = as_map(f)
    x, v = float(x), float(v)
    sched = sched or SamplingSchedule.default(x)
    sched.check(x)
    t = sched.t0 * sched.rho ** np.arange(sched.num_scales + sched.step_depth - 1)
    if v == 0:
        return DirDerivEstimate(0.0, [0.0], True, tol, kind="classical")
    dlo, dhi = f.domain
    if not (dlo <= x <= dhi and dlo <= x + t[0] * v <= dhi):
        raise DomainEscape(f"x + t v leaves {f.domain} at x={x}, v={v}")
    fx = _eval_checked(f, np.array([x]))[0]
    q = (_eval_checked(f, x + t * v) - fx) / t
    last2 = q[-2:]
    return DirDerivEstimate(
        value=float(last2.max()),
        per_scale_sup=[float(s) for s in q],
        converged=bool(abs(last2[1] - last2[0]) <= tol),
        tol=tol,
        kind="classical",
    )


def is_regular(f, x, tol=DEFAULT_TOL, sched=None):
    """Regularity at ``x``: f°(x; v) == f'(x; v) for v = +-1 up to ``tol``."""
    worst = None
    for v in (1.0, -1.0):
        up = dir_deriv_upper(f, x, v, sched, tol)
        cl = classical_dir_deriv(f, x, v, sched, tol)
        gap = abs(up.value - cl.value)
        rec ={"direction": v, "upper": up.value, "classical": cl.value,
               "gap": gap, "classical_converged": cl.converged}
        if worst is None or gap > worst["gap"]:
            worst = rec
    ok = worst["gap"] <= tol and worst["classical_converged"]
    return Verdict(bool(ok), worst)


def is_strongly_differentiable(f, x, tol=DEFAULT_TOL, sched=None):
    """Returns ``(verdict, candidate derivative)``; singleton Clarke interval <=> strong derivative."""
    iv = clarke_interval(f, x, sched, tol)
    return iv.width <= tol, iv.mid


def midpoint_convexity_probe(f, center, radius, n=64, seed=0):
    """Check f((a+b)/2) <= (f(a)+f(b))/2 on sampled pairs; return the worst violating triple or None."""
    f = as_map(f)
    lo = max(center - radius, f.domain[0])
    hi = min(center + radius, f.domain[1])
    rng_off = np.random.default_rng(seed).random(2)
    i = np.arange(1, n + 1)[:, None]
    u = np.mod(rng_off + i * _R2, 1.0)
    a = np.concatenate([[lo], lo + (hi - lo) * u[:, 0]])
    b = np.concatenate([[hi], lo + (hi - lo) * u[:, 1]])
    m = 0.5 * (a + b)
    fa, fb, fm = _eval_checked(f, a), _eval_checked(f, b), _eval_checked(f, m)
    slack = 1e-12 * (1.0 + np.abs(fa) + np.abs(fb))
    excess = fm - 0.5 * (fa + fb) - slack
    j = int(np.argmax(excess))
    if excess[j] > 0:
        return (float(a[j]), float(m[j]), float(b[j]), float(excess[j]))
    return None


def convex_subdifferential(f, x, sched=None):
    """``[f'(x; -1) negated, f'(x; +1)]`` for convex ``f``, from the finest one-sided quotients.

    Raises NotConvex when the sampled midpoint probe finds a violation.
    """
    f = as_map(f)
    x = float(x)
    sched = sched or SamplingSchedule.default(x)
    sched.check(x)
    bad = midpoint_convexity_probe(f, x, sched.radius(0), seed=sched.seed)
    if bad is not None:
        raise NotConvex(f"midpoint convexity fails at triple {bad[:3]} (excess {bad[3]:.3g})")
    t = sched.finest_step
    fx = _eval_checked(f, np.array([x]))[0]
    right = (_eval_checked(f, np.array([x + t]))[0] - fx) / t
    left = (fx - _eval_checked(f, np.array([x - t]))[0]) / t
    return _interval_from_bounds(left, right, DEFAULT_TOL, "convex_subdifferential")


def lipschitz_lower_bound(f, c, n_pairs=256, seed=0):
    """Largest sampled slope |f(x)-f(y)|/|x-y| over pairs in the interval ``c``."""
    f = as_map(f)
    lo, hi = (c.lo, c.hi) if isinstance(c, Interval) else (float(c[0]), float(c[1]))
    if lo < f.domain[0] or hi > f.domain[1]:
        raise DomainEscape(f"[{lo}, {hi}] not inside {f.domain}")
    off = np.random.default_rng(seed).random(2)
    i = np.arange(1, n_pairs + 1)[:, None]
    u = np.mod(off + i * _R2, 1.0)
    a = np.concatenate([[lo], lo + (hi - lo) * u[:, 0]])
    b = np.concatenate([[hi], lo + (hi - lo) * u[:, 1]])
    keep = a != b
    a, b = a[keep], b[keep]
    slopes = np.abs(_eval_checked(f, a) - _eval_checked(f, b)) / np.abs(a - b)
    return float(slopes.max()) if slopes.size else 0.0


def stationarity_check(f, x_star, tol=DEFAULT_TOL, sched=None):
    """True iff 0 lies in the Clarke interval at ``x_star`` inflated by ``tol``."""
    return clarke_interval(f, x_star, sched, tol).contains(0.0, tol)


def scale_table(f, x, v, sched=None):
    """Rows ``(scale_index, t, sup_quotient, inf_quotient)`` for diagnostic dumps."""
    rows = []
    for k, (t, q) in enumerate(scale_quotients(f, x, v, sched)):
        rows.append((k, float(t[0]), float(q.max()), float(q.min())))
    return rows


SCALE_COLUMNS = ("scale_index", "t", "sup_quotient", "inf_quotient")


def write_scale_csv(path, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(SCALE_COLUMNS)
        for k, t, s, i in rows:
            wr.writerow([k, repr(t), repr(s), repr(i)])


def dir_deriv_upper_2d(w, x, y, v, sched=None, tol=DEFAULT_TOL):
    """Generalized directional derivative of a bivariate ``w`` at (x, y) along (v, 0).

    Base points fill a disc of the scale's radius around (x, y); steps move
    only the first argument.
    """
    x, y, v = float(x), float(y), float(v)
    sched = sched or SamplingSchedule.default(max(abs(x), abs(y)))
    sched.check(max(abs(x), abs(y)))
    offsets = sched.offsets()
    n = 2 * sched.samples_per_scale
    i = np.arange(1, n + 1)[:, None]
    per = []
    for k in range(sched.num_scales):
        r = sched.radius(k)
        u = np.mod(offsets[k] + i * _R2, 1.0) * 2.0 - 1.0
        u = u[np.hypot(u[:, 0], u[:, 1]) <= 1.0]
        bx, by = x + r * u[:, 0], y + r * u[:, 1]
        t = sched.steps(k)
        w0 = np.asarray(w(bx, by), dtype=float)
        w1 = np.asarray(w(bx[:, None] + t[None, :] * v, by[:, None]), dtype=float)
        if not (np.all(np.isfinite(w0)) and np.all(np.isfinite(w1))):
            raise NonFinite(f"w not finite near ({x}, {y})")
        per.append(((w1 - w0[:, None]) / t[None, :]).max())
    return _estimate(per, "upper", tol)
