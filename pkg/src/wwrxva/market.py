"""Curves and market snapshots.

All times are ACT/365-fixed year fractions measured from the snapshot date.
Zero curves interpolate log-linearly on discount factors (piecewise-constant
forwards); hazard curves are piecewise-constant. Every curve extrapolates
flat in its forward quantity beyond the last pillar.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import CalibrationError, DataError, DomainError, InputError

_MAX_HAZARD = 1.0e4


def _as_time(t, name: str = "t") -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if np.any(arr < 0.0):
        raise DomainError(f"{name} must be non-negative, got {t!r}")
    return arr


def _scalar_or_array(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


def _check_pillars(tenors: np.ndarray, values: np.ndarray, what: str) -> None:
    if tenors.ndim != 1 or tenors.size == 0:
        raise InputError(f"{what}: need at least one pillar")
    if tenors.shape != values.shape:
        raise InputError(f"{what}: {tenors.size} tenors but {values.size} values")
    if not (np.all(np.isfinite(tenors)) and np.all(np.isfinite(values))):
        raise InputError(f"{what}: pillars must be finite")
    if tenors[0] <= 0.0 or np.any(np.diff(tenors) <= 0.0):
        raise InputError(f"{what}: tenors must be positive and strictly increasing")


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """Right-continuous step function on [0, inf) with flat extension.

    Segment k covers [ends[k-1], ends[k]) with ends[-1] := 0; the last value
    continues beyond ends[-1].
    """

    ends: np.ndarray
    values: np.ndarray

    @cached_property
    def _starts(self) -> np.ndarray:
        return np.concatenate(([0.0], self.ends))

    @cached_property
    def _cumulative(self) -> np.ndarray:
        widths = np.diff(self._starts)
        return np.concatenate(([0.0], np.cumsum(self.values * widths)))

    def _segment(self, t: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.ends, t, side="right")

    def value(self, t: np.ndarray) -> np.ndarray:
        k = np.minimum(self._segment(t), self.ends.size - 1)
        return self.values[k]

    def integral(self, t: np.ndarray) -> np.ndarray:
        """Integral of the step function from 0 to t."""
        k = self._segment(t)
        v = self.values[np.minimum(k, self.ends.size - 1)]
        return self._cumulative[k] + v * (t - self._starts[k])


@dataclass(frozen=True, eq=False)
class ZeroCurve:
    """Continuously-compounded zero curve."""

    tenors: np.ndarray
    rates: np.ndarray

    def __post_init__(self) -> None:
        tenors = np.asarray(self.tenors, dtype=float)
        rates = np.asarray(self.rates, dtype=float)
        _check_pillars(tenors, rates, "ZeroCurve")
        object.__setattr__(self, "tenors", tenors)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def flat(cls, rate: float, tenor: float = 50.0) -> ZeroCurve:
        return cls(np.array([tenor]), np.array([rate]))

    @cached_property
    def forwards(self) -> PiecewiseConstant:
        log_df = np.concatenate(([0.0], self.rates * self.tenors))
        knots = np.concatenate(([0.0], self.tenors))
        return PiecewiseConstant(self.tenors, np.diff(log_df) / np.diff(knots))

    def discount_factor(self, t):
        arr = _as_time(t)
        return _scalar_or_array(np.exp(-self.forwards.integral(arr)), t)

    def forward_rate(self, t):
        """Instantaneous forward rate (right limit at knots)."""
        arr = _as_time(t)
        return _scalar_or_array(self.forwards.value(arr), t)

    def shifted(self, shift: float) -> ZeroCurve:
        return ZeroCurve(self.tenors, self.rates + shift)


def discount_factor(curve: ZeroCurve, t):
    """Discount factor ``exp(-integral of r)`` from 0 to ``t``."""
    return curve.discount_factor(t)


@dataclass(frozen=True, eq=False)
class CdsCurve:
    """Par CDS spreads (decimal per year) by maturity, with a recovery rate."""

    tenors: np.ndarray
    spreads: np.ndarray
    recovery: float = 0.4

    def __post_init__(self) -> None:
        tenors = np.asarray(self.tenors, dtype=float)
        spreads = np.asarray(self.spreads, dtype=float)
        _check_pillars(tenors, spreads, type(self).__name__)
        if np.any(spreads < 0.0):
            raise InputError(f"{type(self).__name__}: spreads must be non-negative")
        if not 0.0 <= self.recovery < 1.0:
            raise InputError(f"recovery must lie in [0, 1), got {self.recovery}")
        object.__setattr__(self, "tenors", tenors)
        object.__setattr__(self, "spreads", spreads)

    @property
    def lgd(self) -> float:
        return 1.0 - self.recovery


@dataclass(frozen=True, eq=False)
class HazardCurve:
    """Piecewise-constant hazard rates; ``tenors`` are segment end points."""

    tenors: np.ndarray
    hazards: np.ndarray
    lgd: float = 0.6

    def __post_init__(self) -> None:
        tenors = np.asarray(self.tenors, dtype=float)
        hazards = np.asarray(self.hazards, dtype=float)
        _check_pillars(tenors, hazards, "HazardCurve")
        if np.any(hazards < 0.0):
            raise InputError("HazardCurve: hazards must be non-negative")
        if not 0.0 < self.lgd <= 1.0:
            raise InputError(f"lgd must lie in (0, 1], got {self.lgd}")
        object.__setattr__(self, "tenors", tenors)
        object.__setattr__(self, "hazards", hazards)

    @classmethod
    def flat(cls, hazard: float, lgd: float = 0.6, tenor: float = 50.0) -> HazardCurve:
        return cls(np.array([tenor]), np.array([hazard]), lgd)

    @cached_property
    def _steps(self) -> PiecewiseConstant:
        return PiecewiseConstant(self.tenors, self.hazards)

    def hazard(self, t):
        arr = _as_time(t)
        return _scalar_or_array(self._steps.value(arr), t)

    def cumulative_hazard(self, t):
        arr = _as_time(t)
        return _scalar_or_array(self._steps.integral(arr), t)

    def survival(self, t):
        arr = _as_time(t)
        return _scalar_or_array(np.exp(-self._steps.integral(arr)), t)

    def default_density(self, t):
        """``lambda(t) * survival(t)``, the instantaneous forward default density."""
        arr = _as_time(t)
        out = self._steps.value(arr) * np.exp(-self._steps.integral(arr))
        return _scalar_or_array(out, t)

    def forward_default_prob(self, tau, dt):
        tau_arr = _as_time(tau, "tau")
        dt_arr = np.asarray(dt, dtype=float)
        if np.any(~np.isfinite(dt_arr)) or np.any(dt_arr <= 0.0):
            raise DomainError(f"dt must be positive, got {dt!r}")
        out = np.exp(-self._steps.integral(tau_arr)) - np.exp(
            -self._steps.integral(tau_arr + dt_arr)
        )
        return float(out) if out.ndim == 0 else out


def survival(h: HazardCurve, t):
    return h.survival(t)


def forward_default_prob(h: HazardCurve, tau, dt):
    """Probability of default in ``(tau, tau + dt]``."""
    return h.forward_default_prob(tau, dt)


def _leg_integral(rate_plus_hazard: float, width: float) -> float:
    """Integral of ``exp(-x u)`` for u in [0, width]."""
    x = rate_plus_hazard
    if x == 0.0:
        return width
    return -np.expm1(-x * width) / x


def _segment_grid(t0: float, t1: float, discount: ZeroCurve | None) -> list[tuple[float, float, float]]:
    """Split (t0, t1] at discount-forward knots: (start, width, forward rate)."""
    if discount is None:
        return [(t0, t1 - t0, 0.0)]
    inner = discount.tenors[(discount.tenors > t0) & (discount.tenors < t1)]
    knots = np.concatenate(([t0], inner, [t1]))
    return [
        (float(a), float(b - a), float(discount.forward_rate(a)))
        for a, b in zip(knots[:-1], knots[1:])
    ]


def _legs(
    tenors: np.ndarray,
    hazards: Sequence[float],
    discount: ZeroCurve | None,
    upto: int,
) -> tuple[float, float]:
    """Risky annuity and hazard-weighted protection integrals to ``tenors[upto]``."""
    annuity = 0.0
    protection = 0.0
    log_weight = 0.0
    prev = 0.0
    for k in range(upto + 1):
        h = hazards[k]
        for start, width, r in _segment_grid(prev, float(tenors[k]), discount):
            piece = np.exp(-log_weight) * _leg_integral(r + h, width)
            annuity += piece
            protection += h * piece
            log_weight += (r + h) * width
        prev = float(tenors[k])
    return annuity, protection


def bootstrap_hazard(cds: CdsCurve, discount: ZeroCurve | None = None) -> HazardCurve:
    """Piecewise-constant hazards repricing every par spread.

    Uses the continuous-premium approximation: the par spread to maturity T is
    ``lgd * int(lambda D S) / int(D S)`` over [0, T]. Without a discount curve
    the integrals are undiscounted; a flat spread then gives the credit
    triangle ``s / (1 - R)`` either way.
    """
    lgd = cds.lgd
    hazards: list[float] = []
    for k, (tenor, spread) in enumerate(zip(cds.tenors, cds.spreads)):
        prev_ann, prev_prot = (0.0, 0.0)
        if k:
            prev_ann, prev_prot = _legs(cds.tenors, hazards, discount, k - 1)
        t0 = float(cds.tenors[k - 1]) if k else 0.0
        pieces = _segment_grid(t0, float(tenor), discount)
        w0 = _start_weight(cds.tenors, hazards, discount, k)

        def par_gap(h: float) -> float:
            ann = 0.0
            logw = 0.0
            for _, width, r in pieces:
                ann += np.exp(-logw) * _leg_integral(r + h, width)
                logw += (r + h) * width
            ann *= w0
            return lgd * (prev_prot + h * ann) - spread * (prev_ann + ann)

        at_zero = par_gap(0.0)
        scale = max(spread * (prev_ann + w0 * (tenor - t0)), 1e-300)
        if at_zero > 1e-13 * scale:
            raise CalibrationError(
                f"CDS pillar {tenor:g}y (spread {spread:.6g}) needs a negative hazard"
            )
        if at_zero >= 0.0:
            hazards.append(0.0)
            continue
        hi = 2.0 * spread / lgd + 1e-4
        while par_gap(hi) <= 0.0:
            hi *= 2.0
            if hi > _MAX_HAZARD:
                raise CalibrationError(
                    f"CDS pillar {tenor:g}y (spread {spread:.6g}) is unattainable"
                )
        hazards.append(brentq(par_gap, 0.0, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500))
    return HazardCurve(cds.tenors.copy(), np.array(hazards), lgd)


def _start_weight(
    tenors: np.ndarray, hazards: Sequence[float], discount: ZeroCurve | None, k: int
) -> float:
    """Discounted survival ``D(t) S(t)`` at the start of segment k."""
    if k == 0:
        return 1.0
    t0 = float(tenors[k - 1])
    cum_h = float(np.dot(hazards, np.diff(np.concatenate(([0.0], tenors[:k])))))
    df = 1.0 if discount is None else float(discount.discount_factor(t0))
    return df * np.exp(-cum_h)


def par_spread(h: HazardCurve, maturity: float, discount: ZeroCurve | None = None) -> float:
    """Continuous-premium par spread of a CDS to ``maturity`` under ``h``."""
    if maturity <= 0.0:
        raise DomainError("maturity must be positive")
    ends = h.tenors[h.tenors < maturity]
    tenors = np.concatenate((ends, [maturity]))
    hazards = [float(h.hazard(t0)) for t0 in np.concatenate(([0.0], ends))]
    annuity, protection = _legs(tenors, hazards, discount, tenors.size - 1)
    return h.lgd * protection / annuity


@dataclass(frozen=True, eq=False)
class FundingCurve(CdsCurve):
    """Bank funding spread over riskless, quoted like a CDS curve.

    The instantaneous funding spread is the bootstrapped forward CDS spread
    ``lgd * hazard(t)``, so a flat quote ``s`` gives ``s_F(t) = s``.
    """

    @cached_property
    def _forward(self) -> HazardCurve:
        return bootstrap_hazard(self)

    def spread(self, t):
        return self.lgd * self._forward.hazard(t)

    def discount(self, t):
        """``D_{s_F}(t) = exp(-int_0^t s_F)``."""
        arr = _as_time(t)
        out = np.exp(-self.lgd * np.asarray(self._forward.cumulative_hazard(arr)))
        return _scalar_or_array(out, t)


def _interp_weights(grid: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if grid.size == 1:
        zeros = np.zeros(x.shape, dtype=int)
        return zeros, zeros, np.zeros(x.shape)
    xc = np.clip(x, grid[0], grid[-1])
    i0 = np.clip(np.searchsorted(grid, xc, side="right") - 1, 0, grid.size - 2)
    w = (xc - grid[i0]) / (grid[i0 + 1] - grid[i0])
    return i0, i0 + 1, w


@dataclass(frozen=True, eq=False)
class NormalVolSurface:
    """ATM normal (Bachelier) vols on an expiry x underlying-tenor grid."""

    expiries: np.ndarray
    tenors: np.ndarray
    vols: np.ndarray

    def __post_init__(self) -> None:
        expiries = np.asarray(self.expiries, dtype=float)
        tenors = np.asarray(self.tenors, dtype=float)
        vols = np.asarray(self.vols, dtype=float)
        for name, g in (("expiries", expiries), ("tenors", tenors)):
            if g.ndim != 1 or g.size == 0 or np.any(np.diff(g) <= 0.0) or np.any(g < 0.0):
                raise InputError(f"NormalVolSurface: {name} must be non-empty and strictly increasing")
        if vols.shape != (expiries.size, tenors.size):
            raise InputError(
                f"NormalVolSurface: vols shape {vols.shape} != ({expiries.size}, {tenors.size})"
            )
        if np.any(~np.isfinite(vols)) or np.any(vols < 0.0):
            raise InputError("NormalVolSurface: vols must be finite and non-negative")
        object.__setattr__(self, "expiries", expiries)
        object.__setattr__(self, "tenors", tenors)
        object.__setattr__(self, "vols", vols)

    @classmethod
    def flat(cls, vol: float) -> NormalVolSurface:
        return cls(np.array([1.0]), np.array([1.0]), np.array([[vol]]))

    def vol(self, expiry, tenor):
        """Bilinear inside the grid, flat outside."""
        e = np.asarray(expiry, dtype=float)
        u = np.asarray(tenor, dtype=float)
        e, u = np.broadcast_arrays(e, u)
        i0, i1, wi = _interp_weights(self.expiries, e)
        j0, j1, wj = _interp_weights(self.tenors, u)
        v = self.vols
        out = (
            (1 - wi) * (1 - wj) * v[i0, j0]
            + (1 - wi) * wj * v[i0, j1]
            + wi * (1 - wj) * v[i1, j0]
            + wi * wj * v[i1, j1]
        )
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Fixing:
    index_tenor: float
    date: dt.date
    rate: float


@dataclass(frozen=True, eq=False)
class MarketSnapshot:
    """One dated set of curves."""

    date: dt.date
    zero_curve: ZeroCurve
    counterparty_cds: CdsCurve
    funding_cds: FundingCurve
    vol_surface: NormalVolSurface
    fixings: tuple[Fixing, ...] = field(default=())

    @cached_property
    def hazard_curve(self) -> HazardCurve:
        try:
            return bootstrap_hazard(self.counterparty_cds, self.zero_curve)
        except CalibrationError as exc:
            raise CalibrationError(f"{self.date}: {exc}") from exc

    @property
    def lgd(self) -> float:
        return self.counterparty_cds.lgd

    def fixing(self, index_tenor: float) -> float | None:
        """Latest fixing for ``index_tenor`` on or before the snapshot date."""
        best = None
        for f in self.fixings:
            if abs(f.index_tenor - index_tenor) < 1e-9 and f.date <= self.date:
                if best is None or f.date >= best.date:
                    best = f
        return None if best is None else best.rate

    def with_fixings(self, fixings: Sequence[Fixing]) -> MarketSnapshot:
        """Copy with ``fixings`` replacing same-tenor fixings, re-dated to this snapshot."""
        injected = tuple(Fixing(f.index_tenor, self.date, f.rate) for f in fixings)
        tenors = {round(f.index_tenor, 9) for f in injected}
        kept = tuple(f for f in self.fixings if round(f.index_tenor, 9) not in tenors)
        return replace(self, fixings=kept + injected)

    def with_zero_funding(self) -> MarketSnapshot:
        zero = FundingCurve(self.funding_cds.tenors, np.zeros_like(self.funding_cds.spreads),
                            self.funding_cds.recovery)
        return replace(self, funding_cds=zero)

    def schema(self) -> tuple:
        return (
            tuple(self.zero_curve.tenors),
            tuple(self.counterparty_cds.tenors),
            tuple(self.funding_cds.tenors),
            tuple(self.vol_surface.expiries),
            tuple(self.vol_surface.tenors),
        )


class HistoryStore(Sequence[MarketSnapshot]):
    """Date-ordered snapshots sharing one pillar schema."""

    def __init__(self, snapshots: Sequence[MarketSnapshot]):
        snaps = tuple(snapshots)
        if not snaps:
            raise DataError("history is empty")
        for a, b in zip(snaps[:-1], snaps[1:]):
            if b.date <= a.date:
                raise DataError(f"history dates not strictly increasing at {b.date}")
        schema = snaps[0].schema()
        for s in snaps[1:]:
            if s.schema() != schema:
                raise DataError(f"snapshot {s.date} has a different pillar schema")
        self._snaps = snaps
        self._index = {s.date: i for i, s in enumerate(snaps)}

    def __len__(self) -> int:
        return len(self._snaps)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return HistoryStore(self._snaps[i])
        return self._snaps[i]

    def __iter__(self) -> Iterator[MarketSnapshot]:
        return iter(self._snaps)

    @property
    def dates(self) -> list[dt.date]:
        return [s.date for s in self._snaps]

    def get(self, date: dt.date) -> MarketSnapshot:
        try:
            return self._snaps[self._index[date]]
        except KeyError:
            raise DataError(f"no snapshot dated {date}") from None

    def window(self, start: dt.date, end: dt.date) -> HistoryStore:
        chosen = [s for s in self._snaps if start <= s.date <= end]
        if not chosen:
            raise DataError(f"window {start}..{end} contains no snapshots")
        return HistoryStore(chosen)

    def window_mask(self, start: dt.date, end: dt.date) -> np.ndarray:
        return np.array([start <= d <= end for d in self.dates])
