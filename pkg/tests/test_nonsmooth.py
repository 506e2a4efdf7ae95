import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clarkedp import (DomainEscape, EstimatorInconsistent, Interval, NonFinite, NotConvex,
                      SamplingSchedule, ScalarMap1, clarke_interval, classical_dir_deriv,
                      convex_subdifferential, dir_deriv_lower, dir_deriv_upper, is_regular,
                      is_strongly_differentiable, lipschitz_lower_bound, stationarity_check,
                      superdifferential_interval)
from clarkedp.nonsmooth import (DEFAULT_TOL, SCALE_COLUMNS, dir_deriv_upper_2d, scale_table,
                                write_scale_csv)

from funclib import CASE_POINTS, KINKS, LIBRARY, X2SIN

TOL = DEFAULT_TOL
ABS = ScalarMap1(np.abs, name="abs")
SQ = ScalarMap1(np.square, name="square")


# -- worked examples -------------------------------------------------------

def test_upper_examples():
    assert dir_deriv_upper(ABS, 0.0, -1.0).value == pytest.approx(1.0, abs=TOL)
    assert dir_deriv_upper(X2SIN, 0.0, 1.0).value == pytest.approx(1.0, abs=TOL)
    assert dir_deriv_upper(SQ, 1.0, 1.0).value == pytest.approx(2.0, abs=TOL)


def test_lower_examples():
    assert dir_deriv_lower(ABS, 0.0, 1.0).value == pytest.approx(-1.0, abs=TOL)
    assert dir_deriv_lower(SQ, 1.0, 1.0).value == pytest.approx(2.0, abs=TOL)
    assert dir_deriv_lower(X2SIN, 0.0, 1.0).value == pytest.approx(-1.0, abs=TOL)


def test_lower_is_negated_upper_of_negation_sample_for_sample():
    for f, x in [(X2SIN, 0.0), (ABS, 0.2), (SQ, -0.4)]:
        for v in (1.0, -1.0, 0.5):
            s = SamplingSchedule.default(x, seed=3)
            assert dir_deriv_lower(f, x, v, s).value == -dir_deriv_upper(-f, x, v, s).value


def test_clarke_interval_examples():
    iv = clarke_interval(X2SIN, 0.0)
    assert iv.lo == pytest.approx(-1.0, abs=TOL) and iv.hi == pytest.approx(1.0, abs=TOL)
    iv = clarke_interval(ABS, 0.0)
    assert (iv.lo, iv.hi) == pytest.approx((-1.0, 1.0), abs=TOL)
    iv = clarke_interval(SQ, 1.0)
    assert (iv.lo, iv.hi) == pytest.approx((2.0, 2.0), abs=TOL)


def test_classical_examples():
    assert classical_dir_deriv(ABS, 0.0, -1.0).value == pytest.approx(1.0, abs=1e-12)
    assert classical_dir_deriv(SQ, 3.0, 1.0).value == pytest.approx(6.0, abs=TOL)
    est = classical_dir_deriv(X2SIN, 0.0, 1.0)
    assert est.value == pytest.approx(0.0, abs=TOL)


def test_classical_flags_missing_limit():
    # x sin(1/x) has no one-sided derivative at 0
    f = ScalarMap1(lambda x: np.where(x == 0, 0.0, x * np.sin(1.0 / np.where(x == 0, 1, x))))
    assert not classical_dir_deriv(f, 0.0, 1.0).converged


def test_regularity_examples():
    assert is_regular(ABS, 0.0)
    v = is_regular(-ABS, 0.0)
    assert not v
    assert v.witness["upper"] == pytest.approx(1.0, abs=TOL)
    assert v.witness["classical"] == pytest.approx(-1.0, abs=TOL)
    assert is_regular(SQ, 1.0)


def test_strong_differentiability_examples():
    ok, d = is_strongly_differentiable(SQ, 1.0)
    assert ok and d == pytest.approx(2.0, abs=TOL)
    assert not is_strongly_differentiable(X2SIN, 0.0)[0]
    assert not is_strongly_differentiable(ABS, 0.0)[0]


def test_convex_subdifferential_examples():
    assert convex_subdifferential(ABS, 0.0) == Interval(-1.0, 1.0)
    iv = convex_subdifferential(ScalarMap1(lambda x: np.maximum(x, 2 * x)), 0.0)
    assert (iv.lo, iv.hi) == pytest.approx((1.0, 2.0), abs=1e-12)
    iv = convex_subdifferential(SQ, 0.5)
    assert (iv.lo, iv.hi) == pytest.approx((1.0, 1.0), abs=TOL)


def test_convex_subdifferential_rejects_nonconvex():
    with pytest.raises(NotConvex):
        convex_subdifferential(-ABS, 0.0)


def test_lipschitz_lower_bound_examples():
    L = lipschitz_lower_bound(ABS, Interval(-1, 1), 64)
    assert 0 < L <= 1.0
    assert 0 < lipschitz_lower_bound(SQ, (0.0, 3.0)) <= 6.0
    for M in (0.5, 1.0, 3.0):
        assert lipschitz_lower_bound(X2SIN, (-M, M), 512) <= 2 * M + 1


def test_stationarity_examples():
    assert stationarity_check(SQ, 0.0)
    assert stationarity_check(ABS, 0.0)
    assert not stationarity_check(ScalarMap1(lambda x: x), 0.0)


def test_errors():
    half = ScalarMap1(np.sqrt, domain=(0.0, np.inf))
    with pytest.raises(DomainEscape):
        dir_deriv_upper(half, -1.0, 1.0)
    logf = ScalarMap1(np.log, domain=(0.0, np.inf))
    with pytest.raises(NonFinite):
        dir_deriv_upper(ScalarMap1(lambda x: np.where(x < 0.01, -np.inf, x)), 0.01, -1.0)
    with pytest.raises(ValueError):
        SamplingSchedule(t0=1e-18, num_scales=8).check(1.0)
    # near a domain edge the ball is cut to one side
    assert clarke_interval(logf, 1e-3 + 1e-6).lo > 0


def test_inverted_bounds_clamp_or_raise():
    from clarkedp.nonsmooth import _interval_from_bounds
    iv = _interval_from_bounds(1.004, 1.0, TOL, "t")
    assert iv.clamped and iv.lo == iv.hi == pytest.approx(1.002)
    with pytest.raises(EstimatorInconsistent):
        _interval_from_bounds(1.2, 1.0, TOL, "t")


def test_estimate_uses_two_finest_scales():
    est = dir_deriv_upper(X2SIN, 0.0, 1.0)
    assert est.value == max(est.per_scale_sup[-2:])
    assert len(est.per_scale_sup) == SamplingSchedule.default().num_scales


def test_determinism():
    a = clarke_interval(X2SIN, 0.0, SamplingSchedule.default(0.0, seed=7))
    b = clarke_interval(X2SIN, 0.0, SamplingSchedule.default(0.0, seed=7))
    assert a == b


def test_scale_table_csv(tmp_path):
    rows = scale_table(ABS, 0.0, 1.0)
    p = tmp_path / "s.csv"
    write_scale_csv(p, rows)
    lines = p.read_text().splitlines()
    assert lines[0] == ",".join(SCALE_COLUMNS)
    assert len(lines) == len(rows) + 1


def test_bivariate_upper_along_first_axis():
    w = lambda x, y: np.abs(x) + y
    assert dir_deriv_upper_2d(w, 0.0, 3.0, 1.0).value == pytest.approx(1.0, abs=TOL)
    w = lambda x, y: x * y
    assert dir_deriv_upper_2d(w, 2.0, 3.0, 1.0).value == pytest.approx(3.0, abs=TOL)


def test_x2sin_seeds():
    for seed in range(5):
        iv = clarke_interval(X2SIN, 0.0, SamplingSchedule.default(0.0, seed))
        assert iv.lo == pytest.approx(-1, abs=0.05) and iv.hi == pytest.approx(1, abs=0.05)


# -- property suite over the function library -----------------------------

@pytest.mark.parametrize("case,x", CASE_POINTS, ids=[f"{c.name}@{x:.3g}" for c, x in CASE_POINTS])
def test_library_point(case, x):
    f = case.f
    iv = clarke_interval(f, x)
    # known intervals
    if (case.name, x) in KINKS:
        lo, hi = KINKS[case.name, x]
        assert iv.lo == pytest.approx(lo, abs=2 * TOL) and iv.hi == pytest.approx(hi, abs=2 * TOL)
    # sign symmetry
    neg = clarke_interval(-f, x)
    assert neg.lo == pytest.approx(-iv.hi, abs=2 * TOL) and neg.hi == pytest.approx(-iv.lo, abs=2 * TOL)
    # sub/super coincidence
    sup = superdifferential_interval(f, x)
    assert sup.distance(iv) <= 2 * TOL
    # Lipschitz bound
    for v in (1.0, -1.0, 2.0):
        assert abs(dir_deriv_upper(f, x, v).value) <= case.lip * abs(v) + TOL
    # convex coincidence
    if case.convex:
        assert convex_subdifferential(f, x).distance(iv) <= 2 * TOL
    # smooth points
    if case.deriv is not None:
        ok, d = is_strongly_differentiable(f, x)
        assert ok and d == pytest.approx(case.deriv(x), abs=TOL)
        assert iv.contains(case.deriv(x), TOL)
    if is_strongly_differentiable(f, x)[0]:
        assert is_regular(f, x)


@pytest.mark.parametrize("case,x", CASE_POINTS, ids=[f"{c.name}@{x:.3g}" for c, x in CASE_POINTS])
def test_library_subadditivity(case, x):
    dirs = (1.0, -1.0, 0.5, -2.0)
    up = {v: dir_deriv_upper(case.f, x, v).value for v in dirs}
    for v in dirs:
        for w in dirs:
            if v + w == 0:
                continue
            s = dir_deriv_upper(case.f, x, v + w).value
            assert s <= up[v] + up[w] + 2 * TOL


@pytest.mark.parametrize("case,x", CASE_POINTS, ids=[f"{c.name}@{x:.3g}" for c, x in CASE_POINTS])
def test_library_homogeneity(case, x):
    sched = SamplingSchedule.default(x, seed=1)
    for a in (0.25, 0.5, 2.0, 4.0):
        for v in (1.0, -1.0):
            base = dir_deriv_upper(case.f, x, v, sched).value
            scaled = dir_deriv_upper(case.f, x, a * v, sched.rescaled(a)).value
            assert scaled == pytest.approx(a * base, rel=1e-9, abs=1e-12)
            if not case.oscillatory:
                indep = dir_deriv_upper(case.f, x, a * v).value
                assert indep == pytest.approx(a * base, abs=1e-3 * max(1.0, a))


# -- randomized properties -------------------------------------------------

finite = st.floats(-1.2, 1.2, allow_nan=False)
case_idx = st.integers(0, len(LIBRARY) - 1)


@settings(max_examples=40, deadline=None)
@given(case_idx, finite, st.integers(0, 2**16))
def test_interval_nonempty_and_symmetric(i, x, seed):
    f = LIBRARY[i].f
    s = SamplingSchedule.default(x, seed)
    iv = clarke_interval(f, x, s)
    assert iv.lo <= iv.hi
    neg = clarke_interval(-f, x, s)
    assert neg.lo == pytest.approx(-iv.hi, abs=2 * TOL)
    assert neg.hi == pytest.approx(-iv.lo, abs=2 * TOL)


@settings(max_examples=40, deadline=None)
@given(case_idx, finite, st.floats(0.1, 8.0), st.sampled_from([1.0, -1.0]))
def test_exact_rescaling(i, x, a, v):
    f = LIBRARY[i].f
    s = SamplingSchedule.default(x, seed=11)
    base = dir_deriv_upper(f, x, v, s).value
    assert dir_deriv_upper(f, x, a * v, s.rescaled(a)).value == pytest.approx(a * base, rel=1e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(0.1, 3), st.floats(-1, 1))
def test_random_kink_interval(c, slope_gap, x0):
    # max of two lines through (c, 0): Clarke interval at c is [s1, s2]
    s1 = x0
    s2 = x0 + slope_gap
    f = ScalarMap1(lambda x: np.maximum(s1 * (x - c), s2 * (x - c)))
    iv = clarke_interval(f, c)
    assert iv.lo == pytest.approx(s1, abs=TOL) and iv.hi == pytest.approx(s2, abs=TOL)
    assert convex_subdifferential(f, c).distance(iv) <= 2 * TOL
    assert is_regular(f, c)
    assert not is_regular(-f, c)
