"""Assemble market-implied and calibrated inputs, price, and write reports.

Expectations and exposure moments come from the asof snapshot. SDs and
correlations come from the calibration set. Report values are in bps of
notional.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .accounting import AcctInputs, AcctResult, accounting_xva
from .calibration import CalibrationSet
from .errors import DataError, InputError
from .market import MarketSnapshot
from .moments import MomentPair, min_square_correlation
from .pricing import DEFAULT_STEP, ExposureProfile, Portfolio, exposure_profile, horizon_grid
from .regulatory import RegInputs, RegResult, crisis_rescale, regulatory_cva

log = logging.getLogger(__name__)

BPS = 1.0e4
REG_HEADER = ["tenor", "strike", "direction", "cva_indep_bps", "ww_bps", "ww_crisis_bps"]
ACCT_HEADER = [
    "tenor", "strike", "direction", "cva_indep", "cva_ww1", "cva_ww2",
    "fva_indep", "fva_ww1", "fva_ww2", "cva_total", "fva_total",
]
NET_LABEL = "PORTFOLIO"


def pricing_grid(calib: CalibrationSet, portfolio: Portfolio, step: float = DEFAULT_STEP) -> np.ndarray:
    grid = horizon_grid(portfolio.maturity, step)
    if grid.shape != calib.grid.shape or np.any(np.abs(grid - calib.grid) > 1e-12):
        raise InputError(
            f"calibration {calib.label!r} grid ({calib.grid.size} points to {calib.grid[-1]:g}y) does not "
            f"match the pricing grid ({grid.size} points to {grid[-1]:g}y, step {step:g})"
        )
    return grid


def market_expectations(snap: MarketSnapshot, grid: np.ndarray) -> dict[str, np.ndarray]:
    h = snap.hazard_curve
    surv = h.survival(grid)
    fund_df = snap.funding_cds.discount(grid)
    return {
        "e_default": h.lgd * h.hazard(grid) * surv,
        "e_surv": surv,
        "e_fund_df": fund_df,
        "e_fund_carry": snap.funding_cds.spread(grid) * fund_df,
    }


def reg_inputs(calib: CalibrationSet, snap: MarketSnapshot, prof: ExposureProfile) -> RegInputs:
    mkt = market_expectations(snap, prof.grid)
    return RegInputs(
        grid=prof.grid,
        e_default=mkt["e_default"],
        sd_default=calib.sd_default,
        e_exposure=prof.ee,
        sd_exposure=prof.sd_pos,
        rho=calib.rho_reg,
    )


def acct_inputs(calib: CalibrationSet, snap: MarketSnapshot, prof: ExposureProfile) -> AcctInputs:
    mkt = market_expectations(snap, prof.grid)
    sd_df = calib.sd_fund_df.values
    sd_carry = calib.sd_fund_carry.values
    inp = AcctInputs(
        grid=prof.grid,
        e_exp_pos=prof.ee,
        e_exp_net=prof.ene,
        sd_exp_pos=prof.sd_pos,
        sd_exp_net=prof.sd_net,
        m2_pos_sq=prof.m2_pos_sq,
        sd_pos_sq=prof.sd_pos_sq,
        m2_net_sq=prof.m2_net_sq,
        sd_net_sq=prof.sd_net_sq,
        e_default=mkt["e_default"],
        sd_default=calib.sd_default,
        e_surv=mkt["e_surv"],
        sd_surv=calib.sd_surv,
        e_fund_df=mkt["e_fund_df"],
        sd_fund_df=calib.sd_fund_df,
        e_fund_carry=mkt["e_fund_carry"],
        sd_fund_carry=calib.sd_fund_carry,
        # second moments: market-implied mean squared plus historical variance
        m2_fund_df_sq=mkt["e_fund_df"] ** 2 + sd_df**2,
        sd_fund_df_sq=calib.sd_fund_df_sq,
        m2_fund_carry_sq=mkt["e_fund_carry"] ** 2 + sd_carry**2,
        sd_fund_carry_sq=calib.sd_fund_carry_sq,
        c1=calib.c1,
        c2=calib.c2,
        c2_1=calib.c2_1,
        f1=calib.f1,
        f2=calib.f2,
        f2_1=calib.f2_1,
    )
    return feasible_square_correlations(inp, calib.label)


def feasible_square_correlations(inp: AcctInputs, label: str = "") -> AcctInputs:
    """Lift ``c2_1`` and ``f2_1`` to the smallest value the market moments admit.

    Historical correlations of squared series need not be compatible with
    market-implied marginals; deep out-of-the-money books put almost all of
    ``(X^+)^2`` in a thin tail and a negative historical ``c2_1`` can then
    imply ``E[a^2 b^2] < E[ab]^2``. Buckets already consistent are untouched.
    """
    out = {}
    for name, pair, sd_a2, sd_b2, m_a2, m_b2 in (
        ("c2_1", MomentPair(inp.e_fund_df, inp.e_exp_pos, inp.sd_fund_df, inp.sd_exp_pos, inp.c1),
         inp.sd_fund_df_sq, inp.sd_pos_sq, inp.m2_fund_df_sq, inp.m2_pos_sq),
        ("f2_1", MomentPair(inp.e_fund_carry, inp.e_exp_net, inp.sd_fund_carry, inp.sd_exp_net, inp.f1),
         inp.sd_fund_carry_sq, inp.sd_net_sq, inp.m2_fund_carry_sq, inp.m2_net_sq),
    ):
        rho = getattr(inp, name)
        floor = min_square_correlation(pair, sd_a2, sd_b2, m_a2, m_b2)
        lift = rho < floor
        if np.any(lift):
            log.warning("%s: %s raised to the feasible bound in %d bucket(s)", label, name, int(lift.sum()))
            out[name] = np.where(lift, np.minimum(floor, 1.0), rho)
    return replace(inp, **out) if out else inp


@dataclass(frozen=True)
class RowKey:
    tenor: str
    strike: str
    direction: str
    notional: float

    @classmethod
    def of(cls, portfolio: Portfolio) -> RowKey:
        if len(portfolio.trades) == 1:
            t = portfolio.trades[0]
            return cls(f"{t.maturity:g}", f"{t.fixed_rate * 100:g}", t.direction.short, t.notional)
        return cls(f"{portfolio.maturity:g}", "", "NET", sum(t.notional for t in portfolio.trades))


@dataclass(frozen=True)
class RegRow:
    key: RowKey
    cva_indep_bps: float
    ww_bps: float
    ww_crisis_bps: float

    def cells(self) -> list[str]:
        k = self.key
        return [k.tenor, k.strike, k.direction, repr(self.cva_indep_bps), repr(self.ww_bps), repr(self.ww_crisis_bps)]


@dataclass(frozen=True)
class AcctRow:
    key: RowKey
    cva_indep: float
    cva_ww1: float
    cva_ww2: float
    fva_indep: float
    fva_ww1: float
    fva_ww2: float

    @property
    def cva_total(self) -> float:
        return self.cva_indep + self.cva_ww1 + self.cva_ww2

    @property
    def fva_total(self) -> float:
        return self.fva_indep + self.fva_ww1 + self.fva_ww2

    def cells(self) -> list[str]:
        k = self.key
        vals = (self.cva_indep, self.cva_ww1, self.cva_ww2, self.fva_indep, self.fva_ww1, self.fva_ww2,
                self.cva_total, self.fva_total)
        return [k.tenor, k.strike, k.direction] + [repr(v) for v in vals]


def price_regulatory(calib: CalibrationSet, snap: MarketSnapshot, portfolio: Portfolio,
                     step: float = DEFAULT_STEP) -> tuple[RegResult, RegResult]:
    """Base result and the one with crisis-window default volatility."""
    grid = pricing_grid(calib, portfolio, step)
    inp = reg_inputs(calib, snap, exposure_profile(portfolio, snap, grid))
    base = regulatory_cva(inp)
    crisis = regulatory_cva(crisis_rescale(inp, calib.sd_default_crisis, calib.sd_default_recent))
    return base, crisis


def price_accounting(calib: CalibrationSet, snap: MarketSnapshot, portfolio: Portfolio,
                     step: float = DEFAULT_STEP) -> AcctResult:
    grid = pricing_grid(calib, portfolio, step)
    return accounting_xva(acct_inputs(calib, snap, exposure_profile(portfolio, snap, grid)))


def reg_row(calib, snap, portfolio, step=DEFAULT_STEP) -> RegRow:
    base, crisis = price_regulatory(calib, snap, portfolio, step)
    key = RowKey.of(portfolio)
    s = BPS / key.notional
    return RegRow(key, base.cva_indep * s, base.cva_wwr * s, crisis.cva_wwr * s)


def acct_row(calib, snap, portfolio, step=DEFAULT_STEP) -> AcctRow:
    r = price_accounting(calib, snap, portfolio, step)
    key = RowKey.of(portfolio)
    s = BPS / key.notional
    return AcctRow(key, r.cva.indep * s, r.cva.ww1 * s, r.cva.ww2 * s, r.fva.indep * s, r.fva.ww1 * s, r.fva.ww2 * s)


def match_sets(calibs: Sequence[CalibrationSet], portfolios: dict[str, Portfolio]) -> list[tuple[CalibrationSet, Portfolio]]:
    by_label = {c.label: c for c in calibs}
    missing = [k for k in portfolios if k not in by_label]
    if missing:
        raise DataError(f"no calibration set for {', '.join(missing[:5])}")
    return [(by_label[k], p) for k, p in portfolios.items()]


def price_report(calibs, snap, portfolios: dict[str, Portfolio], mode: str, step: float = DEFAULT_STEP,
                 zero_funding: bool = False):
    if mode not in ("reg", "acct"):
        raise InputError(f"mode must be reg or acct, got {mode!r}")
    if zero_funding:
        snap = snap.with_zero_funding()
    rows = []
    for calib, p in match_sets(calibs, portfolios):
        if zero_funding:
            calib = calib.without_funding()
        rows.append(reg_row(calib, snap, p, step) if mode == "reg" else acct_row(calib, snap, p, step))
    return rows


def write_report(rows, path: str | Path) -> Path:
    if not rows:
        raise InputError("nothing to write")
    header = REG_HEADER if isinstance(rows[0], RegRow) else ACCT_HEADER
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(r.cells() for r in rows)
    return path
