"""Reproducible synthetic market history with configurable regimes.

Rates, counterparty CDS and funding spreads each move by parallel shifts
following a Gaussian random walk with per-segment drift and volatility.
Funding shifts load on the CDS shifts with a per-segment beta plus their own
noise. The vol surface is held at its configured levels and the 6m fixing is
the curve-implied forward for the first period.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InputError
from .market import CdsCurve, Fixing, FundingCurve, HistoryStore, MarketSnapshot, NormalVolSurface, ZeroCurve


@dataclass(frozen=True)
class Segment:
    days: int
    rate_drift: float = 0.0
    rate_vol: float = 0.0
    cds_drift: float = 0.0
    cds_vol: float = 0.0
    fund_beta: float = 0.0
    fund_vol: float = 0.0
    name: str = ""

    def __post_init__(self) -> None:
        if self.days <= 0:
            raise InputError(f"segment {self.name!r}: days must be positive")
        for v in ("rate_vol", "cds_vol", "fund_vol"):
            if getattr(self, v) < 0.0:
                raise InputError(f"segment {self.name!r}: {v} must be non-negative")


def _default_segments() -> tuple[Segment, ...]:
    # cumulative crisis moves: rates -300bp, CDS +500bp over 1.5 years
    return (
        Segment(252, 0.0, 0.0040, 0.0, 0.0025, 0.25, 0.0015, "calm"),
        Segment(378, -0.02, 0.0030, 0.05 / 1.5, 0.0050, 0.30, 0.0030, "crisis"),
        Segment(378, 0.0, 0.0030, 0.0, 0.0035, 0.25, 0.0020, "post_crisis"),
        Segment(252, 0.0, 0.0020, 0.0, 0.0010, 0.20, 0.0015, "recent"),
    )


@dataclass(frozen=True)
class RegimeConfig:
    seed: int = 20080101
    start: dt.date = dt.date(2008, 1, 1)
    days_per_year: int = 252
    segments: tuple[Segment, ...] = field(default_factory=_default_segments)
    zero_tenors: tuple[float, ...] = (1.0, 2.0, 5.0, 10.0, 20.0, 30.0)
    zero_rates: tuple[float, ...] = (0.045, 0.045, 0.045, 0.045, 0.045, 0.045)
    cds_tenors: tuple[float, ...] = (1.0, 3.0, 5.0, 7.0, 10.0)
    cds_spreads: tuple[float, ...] = (0.03, 0.03, 0.03, 0.03, 0.03)
    recovery_cpty: float = 0.4
    fund_tenors: tuple[float, ...] = (1.0, 3.0, 5.0, 7.0, 10.0)
    fund_spreads: tuple[float, ...] = (0.006, 0.006, 0.006, 0.006, 0.006)
    recovery_fund: float = 0.4
    vol_expiries: tuple[float, ...] = (0.25, 1.0, 5.0, 10.0, 30.0)
    vol_tenors: tuple[float, ...] = (1.0, 5.0, 10.0, 30.0)
    vols: tuple[tuple[float, ...], ...] = ((0.0080,) * 4,) * 5
    fixing_tenor: float = 0.5
    rate_floor: float = -0.01
    cds_floor: float = 0.0005
    fund_floor: float = 0.0

    def __post_init__(self) -> None:
        if not self.segments:
            raise InputError("regime config needs at least one segment (zero-length span)")
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must be a 64-bit unsigned integer")
        if self.days_per_year <= 0:
            raise InputError("days_per_year must be positive")
        if self.cds_floor < 0.0 or self.fund_floor < 0.0:
            raise InputError("infeasible floors: spread floors must be non-negative")
        for name, levels, floor in (
            ("zero_rates", self.zero_rates, self.rate_floor),
            ("cds_spreads", self.cds_spreads, self.cds_floor),
            ("fund_spreads", self.fund_spreads, self.fund_floor),
        ):
            if min(levels) < floor:
                raise InputError(f"infeasible floors: base {name} start below the floor {floor}")

    @property
    def n_days(self) -> int:
        return sum(s.days for s in self.segments)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["start"] = self.start.isoformat()
        d["segments"] = [asdict(s) for s in self.segments]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RegimeConfig:
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        if "start" in d:
            d["start"] = dt.date.fromisoformat(d["start"])
        if "segments" in d:
            d["segments"] = tuple(Segment(**s) for s in d["segments"])
        for k, v in list(d.items()):
            if isinstance(v, list):
                d[k] = tuple(tuple(x) if isinstance(x, list) else x for x in v)
        try:
            return cls(**d)
        except TypeError as exc:
            raise InputError(f"bad regime config: {exc}") from None

    @classmethod
    def from_json(cls, path: str | Path) -> RegimeConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def business_days(start: dt.date, n: int) -> list[dt.date]:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def shift_paths(cfg: RegimeConfig) -> dict[str, np.ndarray]:
    """Cumulative parallel shifts (rates, cds, funding) for every day."""
    n = cfg.n_days
    dt_ = 1.0 / cfg.days_per_year
    seg = np.concatenate([np.full(s.days, i) for i, s in enumerate(cfg.segments)])
    params = np.array(
        [[s.rate_drift, s.rate_vol, s.cds_drift, s.cds_vol, s.fund_beta, s.fund_vol] for s in cfg.segments]
    )[seg[1:]]
    z = np.random.default_rng(cfg.seed).standard_normal((n - 1, 3))
    d_rate = params[:, 0] * dt_ + params[:, 1] * np.sqrt(dt_) * z[:, 0]
    d_cds = params[:, 2] * dt_ + params[:, 3] * np.sqrt(dt_) * z[:, 1]
    d_fund = params[:, 4] * d_cds + params[:, 5] * np.sqrt(dt_) * z[:, 2]
    pad = np.zeros(1)
    return {
        "rate": np.concatenate((pad, np.cumsum(d_rate))),
        "cds": np.concatenate((pad, np.cumsum(d_cds))),
        "fund": np.concatenate((pad, np.cumsum(d_fund))),
    }


def generate(cfg: RegimeConfig | None = None) -> HistoryStore:
    cfg = cfg or RegimeConfig()
    paths = shift_paths(cfg)
    dates = business_days(cfg.start, cfg.n_days)
    zt, zr = np.array(cfg.zero_tenors), np.array(cfg.zero_rates)
    ct, cs = np.array(cfg.cds_tenors), np.array(cfg.cds_spreads)
    ft, fs = np.array(cfg.fund_tenors), np.array(cfg.fund_spreads)
    vols = NormalVolSurface(np.array(cfg.vol_expiries), np.array(cfg.vol_tenors), np.array(cfg.vols))
    tenor = cfg.fixing_tenor
    snaps = []
    for k, date in enumerate(dates):
        zero = ZeroCurve(zt, np.maximum(zr + paths["rate"][k], cfg.rate_floor))
        fixing = (1.0 / zero.discount_factor(tenor) - 1.0) / tenor
        snaps.append(
            MarketSnapshot(
                date=date,
                zero_curve=zero,
                counterparty_cds=CdsCurve(ct, np.maximum(cs + paths["cds"][k], cfg.cds_floor), cfg.recovery_cpty),
                funding_cds=FundingCurve(ft, np.maximum(fs + paths["fund"][k], cfg.fund_floor), cfg.recovery_fund),
                vol_surface=vols,
                fixings=(Fixing(tenor, date, float(fixing)),),
            )
        )
    return HistoryStore(snaps)


def manifest(cfg: RegimeConfig, history: HistoryStore, files: dict[str, Path]) -> dict[str, Any]:
    digests = {name: hashlib.sha256(Path(p).read_bytes()).hexdigest() for name, p in sorted(files.items())}
    return {
        "seed": cfg.seed,
        "config_sha256": cfg.sha256(),
        "n_dates": len(history),
        "first_date": history.dates[0].isoformat(),
        "last_date": history.dates[-1].isoformat(),
        "files": digests,
        "config": cfg.to_dict(),
    }
