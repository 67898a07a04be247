"""Historical calibration of terminal correlations and variances.

The portfolio is held fixed and revalued against every snapshot in the
history, giving one conditional expectation per (date, horizon) for each
series. Correlations across dates per horizon bucket are the terminal
correlations; SDs across a trailing window are the historical variances.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, DomainError, InputError, WwrError
from .market import Fixing, HistoryStore, MarketSnapshot
from .moments import pearson, population_sd
from .pricing import DEFAULT_STEP, Portfolio, exposure_profile, horizon_grid
from .structures import TermStructure

log = logging.getLogger(__name__)

SCHEMA = "wwrxva.calibration"
SCHEMA_VERSION = 1

CREDIT_SERIES = ("default", "pd", "surv", "fund_df", "carry")
EXPOSURE_SERIES = ("ee", "ene", "m2_pos_sq", "m2_net_sq")

# label: (series a, series b)
CORRELATION_MAP = {
    "rho_reg": ("default", "ee"),
    "c1": ("fund_df", "ee"),
    "c2": ("default", "fund_df_ee"),
    "c2_1": ("fund_df_sq", "m2_pos_sq"),
    "f1": ("carry", "ene"),
    "f2": ("surv", "carry_ene"),
    "f2_1": ("carry_sq", "m2_net_sq"),
}
HISTORICAL_SD_MAP = {
    "sd_default": "default",
    "sd_surv": "surv",
    "sd_fund_df": "fund_df",
    "sd_fund_carry": "carry",
    "sd_fund_df_sq": "fund_df_sq",
    "sd_fund_carry_sq": "carry_sq",
}


@dataclass(frozen=True, eq=False)
class ProfilePanel:
    """Per-(date, horizon) series; rows are dates, columns horizon buckets."""

    dates: tuple[dt.date, ...]
    grid: np.ndarray
    series: Mapping[str, np.ndarray]
    skipped: tuple[tuple[dt.date, str], ...] = ()

    def __post_init__(self) -> None:
        shape = (len(self.dates), np.asarray(self.grid).size)
        for name, arr in self.series.items():
            if arr.shape != shape:
                raise InputError(f"panel series {name!r} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise InputError(f"panel series {name!r} has missing or non-finite cells")

    def __getitem__(self, name: str) -> np.ndarray:
        derived = {
            "fund_df_sq": lambda: self.series["fund_df"] ** 2,
            "carry_sq": lambda: self.series["carry"] ** 2,
            "fund_df_ee": lambda: self.series["fund_df"] * self.series["ee"],
            "carry_ene": lambda: self.series["carry"] * self.series["ene"],
        }
        if name in self.series:
            return self.series[name]
        if name in derived:
            return derived[name]()
        raise InputError(f"unknown panel series {name!r}")

    def mask(self, window: tuple[dt.date, dt.date] | None) -> np.ndarray:
        if window is None:
            return np.ones(len(self.dates), dtype=bool)
        start, end = window
        return np.array([start <= d <= end for d in self.dates], dtype=bool)


def credit_rows(snap: MarketSnapshot, grid: np.ndarray) -> dict[str, np.ndarray]:
    h = snap.hazard_curve
    surv = h.survival(grid)
    fund_df = snap.funding_cds.discount(grid)
    return {
        "default": h.lgd * h.hazard(grid) * surv,
        "pd": np.append(surv[:-1] - surv[1:], 0.0),
        "surv": surv,
        "fund_df": fund_df,
        "carry": snap.funding_cds.spread(grid) * fund_df,
    }


def exposure_rows(portfolio: Portfolio, snap: MarketSnapshot, grid: np.ndarray) -> dict[str, np.ndarray]:
    prof = exposure_profile(portfolio, snap, grid)
    return {"ee": prof.ee, "ene": prof.ene, "m2_pos_sq": prof.m2_pos_sq, "m2_net_sq": prof.m2_net_sq}


def _revalue(job):
    """One date for every portfolio; returns (rows..., None) or (None, reason)."""
    snap, portfolios, grids, fixings, zero_funding = job
    try:
        if fixings:
            snap = snap.with_fixings(fixings)
        if zero_funding:
            snap = snap.with_zero_funding()
        credit = {}
        out = []
        for p, g in zip(portfolios, grids):
            key = (g.size, float(g[-1]))
            if key not in credit:
                credit[key] = credit_rows(snap, g)
            out.append({**credit[key], **exposure_rows(p, snap, g)})
        return out, None
    except WwrError as exc:
        return None, str(exc)


def build_panels(
    portfolios: Sequence[Portfolio],
    history: HistoryStore,
    asof_fixings: Sequence[Fixing] = (),
    grids: Sequence[np.ndarray] | None = None,
    step: float = DEFAULT_STEP,
    skip_bad_dates: bool = False,
    workers: int = 1,
    zero_funding: bool = False,
) -> list[ProfilePanel]:
    """Revalue each fixed portfolio on every history date.

    Results are assembled in date order whatever the worker count, so the
    panels are bit-identical between serial and parallel runs.
    """
    if len(history) < 2:
        raise InputError("history needs at least two dates")
    portfolios = list(portfolios)
    if grids is None:
        grids = [horizon_grid(p.maturity, step) for p in portfolios]
    grids = [np.asarray(g, dtype=float) for g in grids]
    fixings = tuple(asof_fixings)
    jobs = [(snap, portfolios, grids, fixings, zero_funding) for snap in history]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_revalue, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        results = [_revalue(j) for j in jobs]

    dates, skipped, per_date = [], [], []
    for snap, (rows, reason) in zip(history, results):
        if rows is None:
            if not skip_bad_dates:
                raise DataError(f"snapshot {snap.date} failed: {reason}")
            log.warning("skipping %s: %s", snap.date, reason)
            skipped.append((snap.date, reason))
            continue
        dates.append(snap.date)
        per_date.append(rows)
    if len(dates) < 2:
        raise DataError("fewer than two usable snapshot dates")
    panels = []
    for i, g in enumerate(grids):
        names = per_date[0][i].keys()
        series = {n: np.vstack([rows[i][n] for rows in per_date]) for n in names}
        panels.append(ProfilePanel(tuple(dates), g, series, tuple(skipped)))
    return panels


def build_panel(portfolio: Portfolio, history: HistoryStore, asof_fixings: Sequence[Fixing] = (),
                grid=None, **kwargs) -> ProfilePanel:
    grids = None if grid is None else [np.asarray(grid, dtype=float)]
    return build_panels([portfolio], history, asof_fixings, grids, **kwargs)[0]


def terminal_correlation(panel: ProfilePanel, series_a: str, series_b: str,
                         window: tuple[dt.date, dt.date] | None = None) -> TermStructure:
    """Pearson correlation across dates in each horizon bucket."""
    m = panel.mask(window)
    if m.sum() < 2:
        raise InputError("terminal correlation needs at least two dates")
    rho = pearson(panel[series_a][m], panel[series_b][m], axis=0)
    return TermStructure(panel.grid, np.atleast_1d(rho), f"{series_a}~{series_b}")


def historical_sd(panel: ProfilePanel, series: str, window: tuple[dt.date, dt.date] | None = None) -> TermStructure:
    m = panel.mask(window)
    if m.sum() < 2:
        raise InputError(f"window {window} holds fewer than two dates")
    return TermStructure(panel.grid, population_sd(panel[series][m], axis=0), f"sd({series})")


def crossover_tenor(lambda1: float, lambda2: float) -> float:
    """Horizon where forward default densities of two flat hazards cross.

    ``log(l1/l2) / (l1 - l2)``, written as ``log1p(x)/x / l2`` so the
    equal-hazard limit ``1/l`` is reached continuously.
    """
    if not (lambda1 > 0.0 and lambda2 > 0.0) or not (math.isfinite(lambda1) and math.isfinite(lambda2)):
        raise DomainError("crossover needs two positive, finite hazard rates")
    x = lambda1 / lambda2 - 1.0
    if abs(x) < 1e-8:
        ratio = 1.0 - x / 2.0 + x * x / 3.0
    else:
        ratio = math.log1p(x) / x
    return ratio / lambda2


def zero_crossings(ts: TermStructure) -> list[float]:
    """Linearly interpolated horizons where the curve changes sign."""
    g, v = ts.grid, ts.values
    nz = np.flatnonzero(v != 0.0)
    out = []
    for i, j in zip(nz[:-1], nz[1:]):
        if np.sign(v[i]) == np.sign(v[j]):
            continue
        if j > i + 1:
            # passes through exact zeros; the first one is the crossing
            out.append(float(g[i + 1]))
        else:
            out.append(float(g[i] + (g[j] - g[i]) * v[i] / (v[i] - v[j])))
    return out


def trailing_window(dates: Sequence[dt.date], asof: dt.date, n: int) -> tuple[dt.date, dt.date]:
    eligible = [d for d in dates if d <= asof]
    if len(eligible) < 2:
        raise InputError(f"fewer than two dates on or before {asof}")
    return eligible[max(0, len(eligible) - n)], eligible[-1]


def crisis_window(history: HistoryStore, asof: dt.date, n: int) -> tuple[dt.date, dt.date]:
    """The ``n``-date window with the highest realised CDS volatility."""
    snaps = [s for s in history if s.date <= asof]
    if len(snaps) <= n:
        return snaps[0].date, snaps[-1].date
    level = np.array([np.mean(s.counterparty_cds.spreads) for s in snaps])
    sq = np.diff(level) ** 2
    csum = np.concatenate(([0.0], np.cumsum(sq)))
    # window of n dates spans n - 1 daily changes
    var = csum[n - 1:] - csum[: -(n - 1)]
    k = int(np.argmax(var))
    return snaps[k].date, snaps[k + n - 1].date


def _window_json(w: tuple[dt.date, dt.date] | None):
    return None if w is None else [w[0].isoformat(), w[1].isoformat()]


def _window_from_json(w):
    return None if w is None else (dt.date.fromisoformat(w[0]), dt.date.fromisoformat(w[1]))


@dataclass(frozen=True)
class CalibrationConfig:
    step: float = DEFAULT_STEP
    corr_window: tuple[dt.date, dt.date] | None = None
    sd_window: tuple[dt.date, dt.date] | None = None
    crisis_window: tuple[dt.date, dt.date] | None = None
    window_days: int = 252
    skip_bad_dates: bool = False
    workers: int = 1
    zero_funding: bool = False

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise InputError("grid step must be positive")
        if self.window_days < 2:
            raise InputError("window_days must be at least 2")
        for name in ("corr_window", "sd_window", "crisis_window"):
            w = getattr(self, name)
            if w is not None and w[0] > w[1]:
                raise InputError(f"{name}: start after end")


@dataclass(frozen=True, eq=False)
class CalibrationSet:
    label: str
    asof: dt.date
    grid: np.ndarray
    rho_reg: TermStructure
    c1: TermStructure
    c2: TermStructure
    c2_1: TermStructure
    f1: TermStructure
    f2: TermStructure
    f2_1: TermStructure
    sd_default: TermStructure
    sd_surv: TermStructure
    sd_fund_df: TermStructure
    sd_fund_carry: TermStructure
    sd_fund_df_sq: TermStructure
    sd_fund_carry_sq: TermStructure
    sd_default_crisis: TermStructure
    windows: Mapping[str, tuple[dt.date, dt.date]] = field(default_factory=dict)
    window_counts: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in self.structure_names():
            ts = getattr(self, name)
            if not ts.same_grid(self.grid):
                raise InputError(f"calibration {self.label!r}: {name} grid differs from the set grid")
            if name in CORRELATION_MAP and np.any(np.abs(ts.values) > 1.0):
                raise InputError(f"calibration {self.label!r}: {name} outside [-1, 1]")
            if name.startswith("sd_") and np.any(ts.values < 0.0):
                raise InputError(f"calibration {self.label!r}: {name} negative")

    @property
    def sd_default_recent(self) -> TermStructure:
        return self.sd_default

    @staticmethod
    def structure_names() -> tuple[str, ...]:
        return tuple(CORRELATION_MAP) + tuple(HISTORICAL_SD_MAP) + ("sd_default_crisis",)

    def without_funding(self) -> CalibrationSet:
        """Structures a history with zero funding spread would produce."""
        zero = TermStructure(self.grid, np.zeros(self.grid.size))
        kw = {n: zero for n in ("c1", "c2_1", "f1", "f2", "f2_1", "sd_fund_df", "sd_fund_carry",
                               "sd_fund_df_sq", "sd_fund_carry_sq")}
        return replace(self, c2=replace(self.rho_reg, label="c2"), **kw)

    def zero_correlations(self) -> CalibrationSet:
        zero = TermStructure(self.grid, np.zeros(self.grid.size))
        return replace(self, **{n: zero for n in CORRELATION_MAP})

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "asof": self.asof.isoformat(),
            "grid": [float(x) for x in self.grid],
            "windows": {k: _window_json(v) for k, v in sorted(self.windows.items())},
            "window_counts": dict(sorted(self.window_counts.items())),
            "structures": {n: [float(x) for x in getattr(self, n).values] for n in self.structure_names()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> CalibrationSet:
        try:
            grid = np.array(d["grid"], dtype=float)
            structs = {n: TermStructure(grid, np.array(d["structures"][n], dtype=float), n)
                       for n in cls.structure_names()}
            return cls(
                label=d["label"],
                asof=dt.date.fromisoformat(d["asof"]),
                grid=grid,
                windows={k: _window_from_json(v) for k, v in d.get("windows", {}).items()},
                window_counts=dict(d.get("window_counts", {})),
                **structs,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed calibration set: {exc!r}") from None


def write_calibration(sets: Sequence[CalibrationSet], path: str | Path) -> None:
    doc = {"schema": SCHEMA, "version": SCHEMA_VERSION, "sets": [s.to_dict() for s in sets]}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def read_calibration(path: str | Path) -> list[CalibrationSet]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read calibration file {path}: {exc}") from None
    if doc.get("schema") != SCHEMA:
        raise DataError(f"{path}: not a calibration file")
    if doc.get("version") != SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported calibration version {doc.get('version')!r}")
    return [CalibrationSet.from_dict(s) for s in doc["sets"]]


def resolve_windows(history: HistoryStore, asof: dt.date, cfg: CalibrationConfig) -> dict[str, tuple[dt.date, dt.date]]:
    first, last = history.dates[0], history.dates[-1]
    if not first <= asof <= last:
        raise InputError(f"asof {asof} outside history {first}..{last}")
    windows = {
        "correlation": cfg.corr_window or (first, asof),
        "sd": cfg.sd_window or trailing_window(history.dates, asof, cfg.window_days),
        "crisis": cfg.crisis_window or crisis_window(history, asof, cfg.window_days),
    }
    for name, (start, end) in windows.items():
        if start < first or end > last:
            raise InputError(f"{name} window {start}..{end} lies outside history {first}..{last}")
    return windows


def calibration_from_panel(panel: ProfilePanel, label: str, asof: dt.date,
                           windows: Mapping[str, tuple[dt.date, dt.date]]) -> CalibrationSet:
    counts = {k: int(panel.mask(w).sum()) for k, w in windows.items()}
    corr = {k: replace(terminal_correlation(panel, a, b, windows["correlation"]), label=k)
            for k, (a, b) in CORRELATION_MAP.items()}
    sds = {k: replace(historical_sd(panel, s, windows["sd"]), label=k) for k, s in HISTORICAL_SD_MAP.items()}
    crisis = replace(historical_sd(panel, "default", windows["crisis"]), label="sd_default_crisis")
    return CalibrationSet(label=label, asof=asof, grid=panel.grid, sd_default_crisis=crisis,
                          windows=dict(windows), window_counts=counts, **corr, **sds)


def calibrate_many(
    portfolios: Mapping[str, Portfolio],
    history: HistoryStore,
    cfg: CalibrationConfig | None = None,
    asof: dt.date | None = None,
) -> list[CalibrationSet]:
    """Calibrate several netting sets against one history, sharing the revaluation pass."""
    cfg = cfg or CalibrationConfig()
    asof = asof or history.dates[-1]
    windows = resolve_windows(history, asof, cfg)
    fixings = history.get(asof).fixings if asof in history.dates else ()
    labels = list(portfolios)
    panels = build_panels(
        [portfolios[k] for k in labels], history, fixings, step=cfg.step,
        skip_bad_dates=cfg.skip_bad_dates, workers=cfg.workers, zero_funding=cfg.zero_funding,
    )
    for name, w in windows.items():
        log.info("%s window %s..%s: %d dates", name, w[0], w[1], int(panels[0].mask(w).sum()))
    return [calibration_from_panel(p, k, asof, windows) for k, p in zip(labels, panels)]


def calibrate(portfolio: Portfolio, history: HistoryStore, cfg: CalibrationConfig | None = None,
              asof: dt.date | None = None) -> CalibrationSet:
    return calibrate_many({portfolio.counterparty: portfolio}, history, cfg, asof)[0]
