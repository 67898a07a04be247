import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from wwrxva.errors import CalibrationError, DataError, DomainError, InputError
from wwrxva.market import (
    CdsCurve, FundingCurve, HazardCurve, HistoryStore, NormalVolSurface, ZeroCurve,
    bootstrap_hazard, discount_factor, forward_default_prob, par_spread, survival,
)

from conftest import make_snapshot


def test_discount_factor_closed_forms():
    assert discount_factor(ZeroCurve.flat(0.0), 10.0) == 1.0
    assert discount_factor(ZeroCurve.flat(0.02), 5.0) == pytest.approx(math.exp(-0.10), abs=1e-15)
    assert discount_factor(ZeroCurve.flat(0.02), 0.0) == 1.0


def test_discount_factor_matches_quadrature_of_forwards():
    curve = ZeroCurve(np.array([2.0, 7.0]), np.array([0.01, 0.03]))
    # forwards implied by log-linear discount factors
    f1 = 0.01
    f2 = (0.03 * 7.0 - 0.01 * 2.0) / 5.0
    fwd = lambda t: f1 if t < 2.0 else f2
    for t in (0.5, 2.0, 4.0, 7.0, 12.0):
        integral, _ = quad(fwd, 0.0, t, points=[2.0], epsabs=1e-14)
        assert discount_factor(curve, t) == pytest.approx(math.exp(-integral), abs=1e-12)


def test_negative_time_is_domain_error():
    with pytest.raises(DomainError):
        discount_factor(ZeroCurve.flat(0.01), -0.1)
    with pytest.raises(DomainError):
        survival(HazardCurve.flat(0.01), -1.0)
    with pytest.raises(DomainError):
        forward_default_prob(HazardCurve.flat(0.01), 1.0, 0.0)


def test_credit_triangle_single_pillar():
    h = bootstrap_hazard(CdsCurve(np.array([5.0]), np.array([0.05]), recovery=0.4))
    assert h.hazard(3.0) == pytest.approx(0.05 / 0.6, rel=1e-12)
    discounted = bootstrap_hazard(CdsCurve(np.array([5.0]), np.array([0.05]), 0.4), ZeroCurve.flat(0.03))
    assert discounted.hazard(1.0) == pytest.approx(0.05 / 0.6, rel=1e-10)


def test_zero_spreads_give_zero_hazard():
    h = bootstrap_hazard(CdsCurve(np.array([1.0, 5.0]), np.array([0.0, 0.0])))
    assert np.all(h.hazards == 0.0)
    assert survival(h, 30.0) == 1.0


def _oracle_hazards(tenors, spreads, recovery, rate):
    """Solve each segment's par equation with numerical quadrature."""
    lgd = 1.0 - recovery
    solved = []

    def lam_fn(hs):
        def lam(t):
            for end, h in zip(tenors, hs):
                if t < end:
                    return h
            return hs[-1]
        return lam

    def cum(hs, t):
        return quad(lam_fn(hs), 0.0, t, points=list(tenors[:len(hs)]), limit=200)[0]

    for k, (T, s) in enumerate(zip(tenors, spreads)):
        def gap(h):
            hs = solved + [h]
            lam = lam_fn(hs)
            pts = list(tenors[: k + 1])
            ann = quad(lambda t: math.exp(-rate * t - cum(hs, t)), 0.0, T, points=pts, limit=200)[0]
            prot = quad(lambda t: lam(t) * math.exp(-rate * t - cum(hs, t)), 0.0, T, points=pts, limit=200)[0]
            return s * ann - lgd * prot
        solved.append(brentq(gap, 0.0, 2.0, xtol=1e-14))
    return np.array(solved)


def test_three_pillar_bootstrap_matches_root_find_oracle():
    tenors = np.array([1.0, 3.0, 5.0])
    spreads = np.array([0.006, 0.010, 0.013])
    got = bootstrap_hazard(CdsCurve(tenors, spreads, 0.4), ZeroCurve.flat(0.02)).hazards
    want = _oracle_hazards(tenors, spreads, 0.4, 0.02)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-10)


def test_unattainable_spread_names_pillar():
    cds = CdsCurve(np.array([1.0, 2.0]), np.array([0.05, 0.001]))
    with pytest.raises(CalibrationError, match="2"):
        bootstrap_hazard(cds)


def test_survival_and_forward_default_closed_forms():
    h = HazardCurve.flat(0.0833)
    assert survival(h, 1.0) == pytest.approx(math.exp(-0.0833), rel=1e-14)
    assert survival(h, 0.0) == 1.0
    assert forward_default_prob(HazardCurve.flat(0.0), 2.0, 1.0) == 0.0
    p = forward_default_prob(HazardCurve.flat(0.05), 1.0, 0.5)
    assert p == pytest.approx(math.exp(-0.05) - math.exp(-0.075), abs=1e-15)
    assert p == pytest.approx(0.0234859, abs=1e-7)


def test_piecewise_survival_segment_sum():
    h = HazardCurve(np.array([1.0, 3.0, 7.0]), np.array([0.01, 0.03, 0.02]))
    t = 5.0
    segsum = 0.01 * 1.0 + 0.03 * 2.0 + 0.02 * 2.0
    assert survival(h, t) == pytest.approx(math.exp(-segsum), rel=1e-14)
    # flat extension beyond the last pillar
    assert survival(h, 10.0) == pytest.approx(math.exp(-(0.01 + 0.06 + 0.08 + 0.06)), rel=1e-14)


def test_partition_telescopes():
    h = HazardCurve(np.array([1.0, 3.0, 7.0]), np.array([0.01, 0.03, 0.02]))
    edges = np.linspace(0.0, 30.0, 121)
    total = sum(forward_default_prob(h, a, b - a) for a, b in zip(edges[:-1], edges[1:]))
    assert total == pytest.approx(1.0 - survival(h, 30.0), abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0.0, 0.08), min_size=1, max_size=4),
    st.floats(0.0, 0.06),
)
def test_monotone_and_in_unit_interval(hazards, rate):
    tenors = np.arange(1, len(hazards) + 1, dtype=float) * 2.0
    h = HazardCurve(tenors, np.array(hazards))
    z = ZeroCurve(tenors, np.full(len(hazards), rate))
    t = np.linspace(0.0, 15.0, 61)
    for vals in (h.survival(t), z.discount_factor(t)):
        assert np.all(vals > 0.0) and np.all(vals <= 1.0)
        assert np.all(np.diff(vals) <= 0.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0005, 0.05), min_size=3, max_size=3).map(sorted), st.floats(0.0, 0.05))
def test_bootstrap_round_trip_for_upward_curves(spreads, rate):
    cds = CdsCurve(np.array([1.0, 3.0, 5.0]), np.array(spreads))
    zc = ZeroCurve.flat(rate)
    h = bootstrap_hazard(cds, zc)
    for T, s in zip(cds.tenors, cds.spreads):
        assert par_spread(h, T, zc) == pytest.approx(s, rel=1e-8)


def test_funding_curve_flat_quote_is_flat_spread():
    f = FundingCurve(np.array([5.0]), np.array([0.01]))
    assert f.spread(7.0) == pytest.approx(0.01, rel=1e-12)
    assert f.discount(2.0) == pytest.approx(math.exp(-0.02), rel=1e-12)


def test_vol_surface_bilinear_and_flat_outside():
    vs = NormalVolSurface(np.array([1.0, 2.0]), np.array([5.0, 10.0]), np.array([[0.01, 0.02], [0.03, 0.04]]))
    assert vs.vol(1.5, 7.5) == pytest.approx(0.025)
    assert vs.vol(0.1, 1.0) == 0.01
    assert vs.vol(50.0, 50.0) == 0.04
    with pytest.raises(InputError):
        NormalVolSurface(np.array([1.0]), np.array([1.0]), np.array([[-0.01]]))


def test_curves_are_bit_deterministic():
    a = make_snapshot().hazard_curve.survival(np.linspace(0, 30, 7))
    b = make_snapshot().hazard_curve.survival(np.linspace(0, 30, 7))
    assert a.tobytes() == b.tobytes()


def test_history_store_validates_order_and_schema():
    s1 = make_snapshot(dt.date(2020, 1, 2))
    s2 = make_snapshot(dt.date(2020, 1, 3))
    h = HistoryStore([s1, s2])
    assert h.dates == [s1.date, s2.date]
    assert len(h.window(dt.date(2020, 1, 3), dt.date(2020, 1, 9))) == 1
    with pytest.raises(DataError):
        HistoryStore([s2, s1])
    with pytest.raises(DataError):
        HistoryStore([s1, s1])


def test_fixing_injection_redates():
    s = make_snapshot(fixing=0.01)
    asof = make_snapshot(dt.date(2021, 5, 5), fixing=0.03)
    injected = s.with_fixings(asof.fixings)
    assert injected.fixing(0.5) == 0.03
    assert injected.fixings[0].date == s.date
