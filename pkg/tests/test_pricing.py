import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wwrxva.errors import DataError, InputError
from wwrxva.market import CdsCurve, FundingCurve, MarketSnapshot, NormalVolSurface, ZeroCurve
from wwrxva.oracle import exposure_mc
from wwrxva.pricing import (
    Direction, IrsTrade, Portfolio, annuity, bachelier_swaption, default_trade_grid, exposure_profile,
    forward_swap_rate, horizon_grid, read_portfolio, swap_value, write_portfolio,
)

from conftest import make_snapshot


def flat_snapshot(rate=0.02, vol=0.01, fixing=None):
    import datetime as dt
    from wwrxva.market import Fixing
    return MarketSnapshot(
        dt.date(2020, 1, 2), ZeroCurve.flat(rate), CdsCurve(np.array([5.0]), np.array([0.01])),
        FundingCurve(np.array([5.0]), np.array([0.0])), NormalVolSurface.flat(vol),
        () if fixing is None else (Fixing(0.5, dt.date(2020, 1, 2), fixing),),
    )


def test_atm_swap_is_worth_zero(snap):
    t = IrsTrade(1.0, 0.0, 10.0)
    k = forward_swap_rate(t, snap)
    assert abs(swap_value(IrsTrade(1.0, k, 10.0), snap)) < 1e-15


def test_flat_curve_par_swap():
    s = flat_snapshot(0.02)
    k = forward_swap_rate(IrsTrade(1e6, 0.0, 7.0), s)
    # annual-compounding par rate of a flat 2% cc curve
    assert k == pytest.approx(math.exp(0.02) - 1.0, rel=1e-12)
    assert abs(swap_value(IrsTrade(1e6, k, 7.0), s)) < 1e-10 * 1e6


def test_receive_fixed_formula_and_sign(snap):
    t = IrsTrade(2.0, 0.03, 5.0, Direction.RECEIVE_FIXED)
    s0 = forward_swap_rate(t, snap)
    a = annuity(t, snap)
    assert swap_value(t, snap) == pytest.approx(2.0 * a * (0.03 - s0), rel=1e-13)
    flt = IrsTrade(2.0, 0.03, 5.0, Direction.RECEIVE_FLOAT)
    assert swap_value(flt, snap) == -swap_value(t, snap)


def test_two_period_swap_against_hand_cash_flows(snap):
    fixing = 0.011
    s = snap.with_fixings(make_snapshot(fixing=fixing).fixings)
    t = IrsTrade(1.0, 0.02, 1.0, Direction.RECEIVE_FIXED, fixed_freq=2, float_freq=2)
    d = s.zero_curve.discount_factor
    fixed = 0.5 * 0.02 * (d(0.5) + d(1.0))
    floating = 0.5 * fixing * d(0.5) + (d(0.5) - d(1.0))
    assert swap_value(t, s) == pytest.approx(fixed - floating, abs=1e-12)


def test_short_first_stub():
    t = IrsTrade(1.0, 0.01, 2.25, fixed_freq=1, float_freq=2)
    starts, ends = t.fixed_periods
    np.testing.assert_allclose(ends, [0.25, 1.25, 2.25])
    np.testing.assert_allclose(starts, [0.0, 0.25, 1.25])


def test_trade_validation():
    with pytest.raises(InputError):
        IrsTrade(0.0, 0.01, 5.0)
    with pytest.raises(InputError):
        IrsTrade(1.0, 0.01, 5.0, start=5.0)
    with pytest.raises(InputError):
        IrsTrade(1.0, 0.01, 5.0, fixed_freq=3)
    with pytest.raises(InputError):
        Portfolio(())


def test_bachelier_closed_forms():
    assert bachelier_swaption(0.01, 0.01, 0.01, 1.0, 1.0) == pytest.approx(0.01 / math.sqrt(2 * math.pi), rel=1e-14)
    assert bachelier_swaption(0.03, 0.01, 0.0, 2.0, 3.0) == pytest.approx(0.06)
    assert bachelier_swaption(0.01, 0.03, 0.0, 2.0, 3.0, "receiver") == pytest.approx(0.06)
    k = np.linspace(-0.02, 0.05, 29)
    payer = bachelier_swaption(0.012, k, 0.009, 3.0, 4.2, "payer")
    receiver = bachelier_swaption(0.012, k, 0.009, 3.0, 4.2, "receiver")
    np.testing.assert_allclose(payer - receiver, 4.2 * (0.012 - k), rtol=0, atol=1e-14)
    with pytest.raises(InputError):
        bachelier_swaption(0.01, 0.01, 0.01, 1.0, 1.0, "straddle")


def test_horizon_grid():
    np.testing.assert_allclose(horizon_grid(1.0), [0, 0.25, 0.5, 0.75, 1.0])
    assert horizon_grid(30.0).size == 121
    np.testing.assert_allclose(horizon_grid(0.6, 0.25), [0, 0.25, 0.5, 0.6])


def test_expired_horizon_is_zero(snap):
    t = IrsTrade(1.0, 0.02, 5.0)
    p = exposure_profile(t, snap, [0.0, 2.5, 5.0, 6.0])
    for name in ("ee", "ene", "sd_pos", "sd_net", "m2_pos_sq", "sd_pos_sq", "m2_net_sq", "sd_net_sq"):
        assert getattr(p, name)[2] == 0.0 and getattr(p, name)[3] == 0.0


def test_atm_short_horizon_limit():
    s = flat_snapshot(0.02, 0.01, fixing=math.exp(0.01) * 2 - 2)
    t = IrsTrade(1.0, 0.0, 10.0, Direction.RECEIVE_FIXED)
    k = forward_swap_rate(t, s)
    t = IrsTrade(1.0, k, 10.0, Direction.RECEIVE_FIXED)
    eps = 1e-6
    p = exposure_profile(t, s, [0.0, eps])
    assert abs(p.ene[1]) < 1e-12
    a = annuity(t, s, eps)
    assert p.ee[1] == pytest.approx(a * 0.01 * math.sqrt(eps) / math.sqrt(2 * math.pi), rel=1e-6)
    assert p.ee[1] < 1e-4


def test_ee_is_the_matching_swaption(snap):
    t = IrsTrade(1.0, 0.025, 20.0, Direction.RECEIVE_FIXED)
    grid = horizon_grid(20.0)
    p = exposure_profile(t, snap, grid)
    for tau in (1.0, 7.5, 13.25):
        i = int(np.searchsorted(grid, tau))
        a = annuity(t, snap, tau)
        f = forward_swap_rate(t, snap, tau)
        vol = snap.vol_surface.vol(tau, 20.0 - tau)
        assert p.ee[i] == pytest.approx(bachelier_swaption(f, 0.025, vol, tau, a, "receiver"), rel=1e-12)


@pytest.mark.parametrize("direction", list(Direction))
def test_exposure_against_monte_carlo(snap, direction):
    t = IrsTrade(1.0, forward_swap_rate(IrsTrade(1.0, 0.0, 10.0), snap), 10.0, direction)
    grid = horizon_grid(10.0, 0.5)
    p = exposure_profile(t, snap, grid)
    mc = exposure_mc(t, snap, grid, n_paths=200_000, seed=3)
    big = p.ee > 1e-4
    assert np.all(np.abs(p.ee[big] - mc.ee[big]) < 4 * mc.ee_se[big] + 1e-12)
    np.testing.assert_allclose(p.ene, mc.ene, atol=4 * mc.ee_se.max() * 3)


def test_offsetting_trades_net_to_zero(snap):
    a = IrsTrade(1.0, 0.02, 10.0, Direction.RECEIVE_FIXED)
    b = IrsTrade(1.0, 0.02, 10.0, Direction.RECEIVE_FLOAT)
    p = exposure_profile(Portfolio((a, b)), snap)
    assert np.all(p.ee == 0.0) and np.all(p.sd_net == 0.0)


def test_netting_adds_means_and_sensitivities(snap):
    a = IrsTrade(1.0, 0.02, 10.0, Direction.RECEIVE_FIXED)
    b = IrsTrade(0.5, 0.01, 5.0, Direction.RECEIVE_FIXED)
    grid = horizon_grid(10.0)
    pa, pb = exposure_profile(a, snap, grid), exposure_profile(b, snap, grid)
    pn = exposure_profile(Portfolio((a, b)), snap, grid)
    np.testing.assert_allclose(pn.ene, pa.ene + pb.ene, rtol=1e-14, atol=1e-16)
    # same-sign sensitivities add in SD under one rate factor
    np.testing.assert_allclose(pn.sd_net, pa.sd_net + pb.sd_net, rtol=1e-13, atol=1e-16)


def test_bad_grid_rejected(snap):
    with pytest.raises(InputError):
        exposure_profile(IrsTrade(1.0, 0.02, 5.0), snap, [1.0, 0.5])


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.01, 0.05), st.sampled_from([5.0, 10.0, 20.0]), st.floats(0.001, 0.02))
def test_profile_invariants(k, maturity, vol):
    s = flat_snapshot(0.015, vol)
    grid = horizon_grid(maturity, 0.5)
    fix = exposure_profile(IrsTrade(1.0, k, maturity, Direction.RECEIVE_FIXED), s, grid)
    flt = exposure_profile(IrsTrade(1.0, k, maturity, Direction.RECEIVE_FLOAT), s, grid)
    tol = 1e-14
    assert np.all(fix.ee >= np.maximum(fix.ene, 0.0) - tol)
    assert np.all(fix.m2_pos_sq >= fix.ee**2 * (1 - 1e-12) - tol)
    assert np.all(fix.sd_pos >= 0) and np.all(fix.sd_pos_sq >= 0) and np.all(fix.sd_net_sq >= 0)
    np.testing.assert_allclose(flt.ene, -fix.ene, atol=1e-15)
    np.testing.assert_allclose(fix.ee - flt.ee, fix.ene, atol=1e-12)
    higher = exposure_profile(IrsTrade(1.0, k + 0.001, maturity, Direction.RECEIVE_FIXED), s, grid)
    assert np.all(higher.ee >= fix.ee - tol)


def test_portfolio_csv_round_trip(tmp_path):
    trades = default_trade_grid()
    path = tmp_path / "p.csv"
    write_portfolio(trades, path)
    back = read_portfolio(path)
    assert [(t.trade_id, t.direction, t.fixed_rate, t.maturity) for t in back] == \
        [(t.trade_id, t.direction, t.fixed_rate, t.maturity) for t in trades]
    assert len(trades) == 40


def test_missing_portfolio_names_path(tmp_path):
    with pytest.raises(DataError, match="nope.csv"):
        read_portfolio(tmp_path / "nope.csv")


def test_malformed_portfolio_row(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("trade_id,direction,notional,fixed_rate,start_years,maturity_years,fixed_freq,float_freq\n"
                    "x,Sideways,1,0.01,0,5,1,2\n")
    with pytest.raises(DataError, match=":2"):
        read_portfolio(path)
