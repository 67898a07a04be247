import datetime as dt

import numpy as np
import pytest

from wwrxva.market import CdsCurve, Fixing, FundingCurve, MarketSnapshot, NormalVolSurface, ZeroCurve


def make_snapshot(date=dt.date(2020, 1, 2), rate=0.02, cds=0.01, fund=0.005, vol=0.008, fixing=None):
    zero = ZeroCurve(np.array([1.0, 5.0, 10.0, 30.0]), np.array([rate, rate + 0.002, rate + 0.004, rate + 0.006]))
    fixings = () if fixing is None else (Fixing(0.5, date, fixing),)
    return MarketSnapshot(
        date=date,
        zero_curve=zero,
        counterparty_cds=CdsCurve(np.array([1.0, 5.0, 10.0]), np.array([cds, cds * 1.2, cds * 1.4])),
        funding_cds=FundingCurve(np.array([5.0]), np.array([fund])),
        vol_surface=NormalVolSurface(np.array([1.0, 10.0]), np.array([1.0, 30.0]),
                                     np.array([[vol, vol * 0.9], [vol * 1.1, vol]])),
        fixings=fixings,
    )


@pytest.fixture
def snap():
    return make_snapshot()


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the summary prints them all at the end."""
    def record(label, passed, detail=""):
        _CRITERIA.append((label, bool(passed), detail))
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label:<34s} {detail}")
