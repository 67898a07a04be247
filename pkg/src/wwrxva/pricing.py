"""Vanilla swap pricing and analytic exposure profiles.

The discounted net value of the portfolio at horizon ``tau`` is taken to be
Normal. Its mean is today's forward value of the flows paid after ``tau``.
Its SD comes from the ATM normal vol for (expiry ``tau``, tenor ``T - tau``)
with the remaining annuity frozen. Every exposure statistic then has a
closed form, and EE at ``tau`` is the value of the matching swaption.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import DataError, InputError
from .market import MarketSnapshot
from .moments import _positive_part_table, normal_raw_moments

PORTFOLIO_HEADER = [
    "trade_id",
    "direction",
    "notional",
    "fixed_rate",
    "start_years",
    "maturity_years",
    "fixed_freq",
    "float_freq",
]

DEFAULT_STEP = 0.25


class Direction(str, Enum):
    RECEIVE_FIXED = "ReceiveFixed"
    RECEIVE_FLOAT = "ReceiveFloat"

    @classmethod
    def parse(cls, text: str) -> Direction:
        key = text.strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "receivefixed": cls.RECEIVE_FIXED,
            "recfix": cls.RECEIVE_FIXED,
            "receiver": cls.RECEIVE_FIXED,
            "receivefloat": cls.RECEIVE_FLOAT,
            "recflt": cls.RECEIVE_FLOAT,
            "payer": cls.RECEIVE_FLOAT,
        }
        try:
            return aliases[key]
        except KeyError:
            raise InputError(f"unknown swap direction {text!r}") from None

    @property
    def sign(self) -> float:
        """+1 when the trade gains from higher rates."""
        return 1.0 if self is Direction.RECEIVE_FLOAT else -1.0

    @property
    def short(self) -> str:
        return "RecFix" if self is Direction.RECEIVE_FIXED else "RecFlt"


def _schedule(start: float, maturity: float, freq: int) -> tuple[np.ndarray, np.ndarray]:
    """Period (starts, ends) rolled back from maturity; first period may be short."""
    step = 1.0 / freq
    n = max(1, math.ceil((maturity - start) / step - 1e-9))
    ends = maturity - step * np.arange(n - 1, -1, -1, dtype=float)
    starts = np.concatenate(([start], ends[:-1]))
    return starts, ends


@dataclass(frozen=True, eq=False)
class IrsTrade:
    notional: float
    fixed_rate: float
    maturity: float
    direction: Direction = Direction.RECEIVE_FIXED
    start: float = 0.0
    fixed_freq: int = 1
    float_freq: int = 2
    trade_id: str = ""

    def __post_init__(self) -> None:
        if isinstance(self.direction, str) and not isinstance(self.direction, Direction):
            object.__setattr__(self, "direction", Direction.parse(self.direction))
        if not self.notional > 0:
            raise InputError(f"trade {self.trade_id!r}: notional must be positive")
        if not 0.0 <= self.start < self.maturity:
            raise InputError(f"trade {self.trade_id!r}: need 0 <= start < maturity")
        for name in ("fixed_freq", "float_freq"):
            if getattr(self, name) not in (1, 2, 4):
                raise InputError(f"trade {self.trade_id!r}: {name} must be 1, 2 or 4")

    @cached_property
    def fixed_periods(self) -> tuple[np.ndarray, np.ndarray]:
        return _schedule(self.start, self.maturity, self.fixed_freq)

    @cached_property
    def float_periods(self) -> tuple[np.ndarray, np.ndarray]:
        return _schedule(self.start, self.maturity, self.float_freq)


@dataclass(frozen=True)
class Portfolio:
    trades: tuple[IrsTrade, ...]
    counterparty: str = "CPTY"

    def __post_init__(self) -> None:
        object.__setattr__(self, "trades", tuple(self.trades))
        if not self.trades:
            raise InputError("portfolio must contain at least one trade")

    @property
    def maturity(self) -> float:
        return max(t.maturity for t in self.trades)


@dataclass(frozen=True, eq=False)
class ExposureProfile:
    """Moments of the discounted portfolio value ``X = D_r Pi`` per horizon."""

    grid: np.ndarray
    ee: np.ndarray
    ene: np.ndarray
    sd_pos: np.ndarray
    sd_net: np.ndarray
    m2_pos_sq: np.ndarray
    sd_pos_sq: np.ndarray
    m2_net_sq: np.ndarray
    sd_net_sq: np.ndarray


def _leg_values(trade: IrsTrade, snap: MarketSnapshot, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Remaining fixed-leg annuity and float-leg value per horizon, discounted to 0."""
    zc = snap.zero_curve
    f_start, f_end = trade.fixed_periods
    fixed_pv = (f_end - f_start) * zc.discount_factor(f_end)
    fl_start, fl_end = trade.float_periods
    df_end = zc.discount_factor(fl_end)
    coupons = zc.discount_factor(fl_start) - df_end
    fixing = snap.fixing(1.0 / trade.float_freq)
    set_today = fl_start <= 0.0
    if fixing is not None and np.any(set_today):
        coupons = np.where(set_today, (fl_end - fl_start) * fixing * df_end, coupons)
    alive_fixed = f_end[None, :] > grid[:, None]
    alive_float = fl_end[None, :] > grid[:, None]
    annuity = alive_fixed @ fixed_pv
    float_pv = alive_float @ coupons
    return annuity, float_pv


def trade_moments(trade: IrsTrade, snap: MarketSnapshot, grid) -> tuple[np.ndarray, np.ndarray]:
    """Mean and signed rate sensitivity (per sqrt(year)) of the trade at each horizon."""
    grid = np.asarray(grid, dtype=float)
    annuity, float_pv = _leg_values(trade, snap, grid)
    sign = trade.direction.sign
    mean = sign * trade.notional * (float_pv - trade.fixed_rate * annuity)
    vol = snap.vol_surface.vol(grid, np.maximum(trade.maturity - grid, 0.0))
    sens = sign * trade.notional * annuity * vol
    return mean, sens


def swap_value(trade: IrsTrade, snap: MarketSnapshot) -> float:
    """Present value; receive-fixed is ``N A (K - S0)``."""
    mean, _ = trade_moments(trade, snap, np.array([0.0]))
    return float(mean[0])


def forward_swap_rate(trade: IrsTrade, snap: MarketSnapshot, tau: float = 0.0) -> float:
    annuity, float_pv = _leg_values(trade, snap, np.array([tau]))
    if annuity[0] <= 0.0:
        raise InputError("no fixed flows remain after tau")
    return float(float_pv[0] / annuity[0])


def annuity(trade: IrsTrade, snap: MarketSnapshot, tau: float = 0.0) -> float:
    a, _ = _leg_values(trade, snap, np.array([tau]))
    return float(a[0])


def bachelier_swaption(F, K, sigma_n, T, annuity, kind: str = "payer"):
    """Bachelier price ``A [(F-K) N(d) + s phi(d)]``, ``s = sigma sqrt(T)``."""
    F, K, sigma_n, T, annuity = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (F, K, sigma_n, T, annuity))
    )
    if kind == "payer":
        m = F - K
    elif kind == "receiver":
        m = K - F
    else:
        raise InputError(f"kind must be payer or receiver, got {kind!r}")
    s = sigma_n * np.sqrt(T)
    pos = s > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(pos, m / np.where(pos, s, 1.0), 0.0)
    phi = np.exp(-0.5 * d * d) / math.sqrt(2.0 * math.pi)
    price = np.where(pos, m * ndtr(d) + s * phi, np.maximum(m, 0.0))
    out = annuity * price
    return float(out) if out.ndim == 0 else out


def horizon_grid(maturity: float, step: float = DEFAULT_STEP) -> np.ndarray:
    """Uniform horizons on [0, maturity], maturity included."""
    if step <= 0:
        raise InputError("grid step must be positive")
    n = int(math.floor(maturity / step + 1e-9))
    grid = np.round(step * np.arange(n + 1), 12)
    if maturity - grid[-1] > 1e-9:
        grid = np.append(grid, maturity)
    return grid


def portfolio_moments(portfolio: Portfolio, snap: MarketSnapshot, grid) -> tuple[np.ndarray, np.ndarray]:
    """Net mean and SD under one driving rate factor (perfect intra-book correlation)."""
    grid = np.asarray(grid, dtype=float)
    mean = np.zeros(grid.shape)
    sens = np.zeros(grid.shape)
    for trade in portfolio.trades:
        m, s = trade_moments(trade, snap, grid)
        mean += m
        sens += s
    return mean, np.abs(sens) * np.sqrt(grid)


def profile_from_moments(grid, mean, sd) -> ExposureProfile:
    table = _positive_part_table(mean, sd, 4)
    ee, m2, m4 = table[1], table[2], table[4]
    sd_pos = np.sqrt(np.maximum(m2 - ee * ee, 0.0))
    sd_pos_sq = np.sqrt(np.maximum(m4 - m2 * m2, 0.0))
    _, n2, _, _ = normal_raw_moments(mean, sd)
    var_sq = 4.0 * mean * mean * sd * sd + 2.0 * sd**4
    return ExposureProfile(
        grid=np.asarray(grid, dtype=float),
        ee=ee,
        ene=np.asarray(mean, dtype=float),
        sd_pos=sd_pos,
        sd_net=np.asarray(sd, dtype=float),
        m2_pos_sq=m2,
        sd_pos_sq=sd_pos_sq,
        m2_net_sq=n2,
        sd_net_sq=np.sqrt(var_sq),
    )


def exposure_profile(portfolio: Portfolio | IrsTrade, snap: MarketSnapshot, grid=None) -> ExposureProfile:
    if isinstance(portfolio, IrsTrade):
        portfolio = Portfolio((portfolio,))
    if grid is None:
        grid = horizon_grid(portfolio.maturity)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(grid < 0.0) or np.any(np.diff(grid) <= 0.0):
        raise InputError("grid must be non-negative and strictly increasing")
    mean, sd = portfolio_moments(portfolio, snap, grid)
    return profile_from_moments(grid, mean, sd)


def read_portfolio(path: str | Path) -> list[IrsTrade]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"portfolio file not found: {path}")
    trades = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(PORTFOLIO_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                trades.append(
                    IrsTrade(
                        trade_id=row["trade_id"],
                        direction=Direction.parse(row["direction"]),
                        notional=float(row["notional"]),
                        fixed_rate=float(row["fixed_rate"]),
                        start=float(row["start_years"]),
                        maturity=float(row["maturity_years"]),
                        fixed_freq=int(row["fixed_freq"]),
                        float_freq=int(row["float_freq"]),
                    )
                )
            except (ValueError, InputError) as exc:
                raise DataError(f"{path}:{line}: {exc}") from exc
    if not trades:
        raise DataError(f"{path}: no trades")
    return trades


def write_portfolio(trades: Iterable[IrsTrade], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PORTFOLIO_HEADER)
        for t in trades:
            w.writerow(
                [t.trade_id, t.direction.value, repr(t.notional), repr(t.fixed_rate),
                 repr(t.start), repr(t.maturity), t.fixed_freq, t.float_freq]
            )


DEFAULT_TENORS = (5.0, 10.0, 20.0, 30.0)
DEFAULT_STRIKES = (-0.0025, 0.0, 0.005, 0.01, 0.02)


def default_trade_grid(
    tenors: Sequence[float] = DEFAULT_TENORS,
    strikes: Sequence[float] = DEFAULT_STRIKES,
    notional: float = 1.0,
) -> list[IrsTrade]:
    """EUR-style vanilla swaps: annual fixed, semi-annual float, both directions."""
    trades = []
    for direction in (Direction.RECEIVE_FLOAT, Direction.RECEIVE_FIXED):
        for tenor in tenors:
            for k in strikes:
                tid = f"{direction.short}_{tenor:g}y_{k * 100:+.2f}"
                trades.append(IrsTrade(notional, k, tenor, direction, trade_id=tid))
    return trades
