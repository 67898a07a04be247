"""Deterministic curves of a scalar statistic over forward horizons."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, InputError


@dataclass(frozen=True, eq=False)
class TermStructure:
    grid: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise InputError(f"term structure {self.label!r}: grid and values must be equal-length 1-d")
        if grid.size > 1 and np.any(np.diff(grid) <= 0.0):
            raise InputError(f"term structure {self.label!r}: grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.grid.size

    def same_grid(self, grid, tol: float = 1e-12) -> bool:
        grid = np.asarray(grid, dtype=float)
        return grid.shape == self.grid.shape and bool(np.all(np.abs(grid - self.grid) <= tol))

    def scaled(self, k: float) -> TermStructure:
        return TermStructure(self.grid, self.values * k, self.label)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau_years", "value"])
            for t, v in zip(self.grid, self.values):
                w.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path: str | Path, label: str = "") -> TermStructure:
        path = Path(path)
        try:
            with path.open(newline="", encoding="utf-8") as fh:
                rows = list(csv.DictReader(fh))
            grid = [float(r["tau_years"]) for r in rows]
            vals = [float(r["value"]) for r in rows]
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot read term structure {path}: {exc}") from exc
        return cls(np.array(grid), np.array(vals), label or path.stem)


def as_values(x, grid: np.ndarray, name: str) -> np.ndarray:
    """Accept a TermStructure (grid-checked) or any array-like of grid length."""
    if isinstance(x, TermStructure):
        if not x.same_grid(grid):
            raise InputError(f"{name}: term-structure grid does not match the pricing grid")
        return x.values
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.shape, float(arr))
    if arr.shape != grid.shape:
        raise InputError(f"{name}: expected {grid.size} values, got {arr.size}")
    return arr
