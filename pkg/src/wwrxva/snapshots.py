"""Long-format snapshot CSV: ``date,record_type,tenor_years,key,value``."""

from __future__ import annotations

import csv
import datetime as dt
import logging
from collections import defaultdict
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DataError, WwrError
from .market import CdsCurve, Fixing, FundingCurve, HistoryStore, MarketSnapshot, NormalVolSurface, ZeroCurve

log = logging.getLogger(__name__)

HEADER = ["date", "record_type", "tenor_years", "key", "value"]
RECORD_TYPES = ("ZERO", "CDS_CPTY", "CDS_FUND", "NVOL", "FIXING", "META")


def _num(x: float) -> str:
    return repr(float(x))


def snapshot_rows(s: MarketSnapshot) -> list[list[str]]:
    d = s.date.isoformat()
    rows = [[d, "ZERO", _num(t), "rate", _num(r)] for t, r in zip(s.zero_curve.tenors, s.zero_curve.rates)]
    for kind, curve in (("CDS_CPTY", s.counterparty_cds), ("CDS_FUND", s.funding_cds)):
        rows += [[d, kind, _num(t), "spread", _num(v)] for t, v in zip(curve.tenors, curve.spreads)]
    vs = s.vol_surface
    for i, e in enumerate(vs.expiries):
        for j, u in enumerate(vs.tenors):
            rows.append([d, "NVOL", _num(e), _num(u), _num(vs.vols[i, j])])
    for f in s.fixings:
        rows.append([d, "FIXING", _num(f.index_tenor), f.date.isoformat(), _num(f.rate)])
    rows.append([d, "META", "", "recovery_cpty", _num(s.counterparty_cds.recovery)])
    rows.append([d, "META", "", "recovery_fund", _num(s.funding_cds.recovery)])
    return rows


def write_history(history: Iterable[MarketSnapshot], path: str | Path) -> Path:
    """One concatenated file; parent directories are created."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for snap in history:
            w.writerows(snapshot_rows(snap))
    return path


def _files(path: Path) -> list[Path]:
    if path.is_dir():
        files = sorted(p for p in path.glob("*.csv") if p.is_file())
        if not files:
            raise DataError(f"no snapshot CSV files in {path}")
        return files
    if path.is_file():
        return [path]
    raise DataError(f"snapshot path not found: {path}")


def _read_rows(files: list[Path]) -> dict[dt.date, list[tuple[str, int, list[str]]]]:
    grouped: dict[dt.date, list] = defaultdict(list)
    for f in files:
        with f.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != HEADER:
                raise DataError(f"{f}: header must be {','.join(HEADER)}")
            for line, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 5:
                    raise DataError(f"{f}:{line}: expected 5 fields, got {len(row)}")
                try:
                    date = dt.date.fromisoformat(row[0])
                except ValueError:
                    raise DataError(f"{f}:{line}: bad date {row[0]!r}") from None
                grouped[date].append((str(f), line, row))
    return grouped


def _build(date: dt.date, rows: list[tuple[str, int, list[str]]]) -> MarketSnapshot:
    zero, cpty, fund, nvol, fixings, meta = {}, {}, {}, {}, [], {}
    for src, line, (_, kind, tenor, key, value) in rows:
        where = f"{src}:{line}"
        try:
            v = float(value)
            if kind == "ZERO":
                zero[float(tenor)] = v
            elif kind == "CDS_CPTY":
                cpty[float(tenor)] = v
            elif kind == "CDS_FUND":
                fund[float(tenor)] = v
            elif kind == "NVOL":
                nvol[(float(tenor), float(key))] = v
            elif kind == "FIXING":
                fdate = dt.date.fromisoformat(key) if key else date
                fixings.append(Fixing(float(tenor), fdate, v))
            elif kind == "META":
                meta[key] = v
            else:
                raise DataError(f"{where}: unknown record_type {kind!r}")
        except ValueError as exc:
            raise DataError(f"{where}: {exc}") from None
    for name, part in (("ZERO", zero), ("CDS_CPTY", cpty), ("CDS_FUND", fund), ("NVOL", nvol)):
        if not part:
            raise DataError(f"{date}: no {name} records")

    def recovery(side: str) -> float:
        if f"recovery_{side}" in meta:
            return meta[f"recovery_{side}"]
        if f"lgd_{side}" in meta:
            return 1.0 - meta[f"lgd_{side}"]
        return 0.4

    def pillars(d: dict) -> tuple[np.ndarray, np.ndarray]:
        keys = sorted(d)
        return np.array(keys), np.array([d[k] for k in keys])

    expiries = sorted({e for e, _ in nvol})
    tenors = sorted({u for _, u in nvol})
    if len(nvol) != len(expiries) * len(tenors):
        raise DataError(f"{date}: NVOL records do not form a full expiry x tenor grid")
    vols = np.array([[nvol[(e, u)] for u in tenors] for e in expiries])
    try:
        return MarketSnapshot(
            date=date,
            zero_curve=ZeroCurve(*pillars(zero)),
            counterparty_cds=CdsCurve(*pillars(cpty), recovery=recovery("cpty")),
            funding_cds=FundingCurve(*pillars(fund), recovery=recovery("fund")),
            vol_surface=NormalVolSurface(np.array(expiries), np.array(tenors), vols),
            fixings=tuple(fixings),
        )
    except WwrError as exc:
        raise DataError(f"{date}: {exc}") from exc


def read_history(path: str | Path, skip_bad_dates: bool = False) -> tuple[HistoryStore, list[tuple[dt.date, str]]]:
    """Parse a file or a directory of files; snapshots are grouped by date.

    Returns the history and the list of ``(date, reason)`` skipped, which is
    empty unless ``skip_bad_dates`` is set.
    """
    grouped = _read_rows(_files(Path(path)))
    snaps, skipped = [], []
    for date in sorted(grouped):
        try:
            snaps.append(_build(date, grouped[date]))
        except DataError as exc:
            if not skip_bad_dates:
                raise
            log.warning("skipping %s: %s", date, exc)
            skipped.append((date, str(exc)))
    if not snaps:
        raise DataError(f"{path}: no usable snapshots")
    return HistoryStore(snaps), skipped


def read_snapshot(path: str | Path, date: dt.date | None = None) -> MarketSnapshot:
    """A single snapshot; the last date in the file unless ``date`` is given."""
    history, _ = read_history(path)
    return history[-1] if date is None else history.get(date)
