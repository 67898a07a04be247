"""Regulatory CVA split into an independent part and one wrong-way term.

Per horizon the integrand ``E[LGD lambda D_lambda D_r Pi^+]`` is expanded with
the two-variable identity, giving an independent product of expectations
plus ``rho * SD(default) * SD(exposure)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError
from .structures import TermStructure, as_values


def trapezoid_weights(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InputError("grid must be a non-empty 1-d array")
    if grid.size == 1:
        return np.ones(1)
    dt = np.diff(grid)
    if np.any(dt <= 0.0):
        raise InputError("grid must be strictly increasing")
    w = np.zeros(grid.size)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


@dataclass(frozen=True, eq=False)
class RegInputs:
    grid: np.ndarray
    e_default: np.ndarray
    sd_default: np.ndarray
    e_exposure: np.ndarray
    sd_exposure: np.ndarray
    rho: np.ndarray
    weights: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        grid = np.atleast_1d(np.asarray(self.grid, dtype=float))
        object.__setattr__(self, "grid", grid)
        for name in ("e_default", "sd_default", "e_exposure", "sd_exposure", "rho"):
            object.__setattr__(self, name, as_values(getattr(self, name), grid, name))
        w = trapezoid_weights(grid) if self.weights is None else as_values(self.weights, grid, "weights")
        object.__setattr__(self, "weights", w)
        if np.any(np.abs(self.rho) > 1.0 + 1e-12):
            raise InputError("rho must lie in [-1, 1]")
        if np.any(self.sd_default < 0.0) or np.any(self.sd_exposure < 0.0):
            raise InputError("standard deviations must be non-negative")
        if np.any(self.e_default < 0.0):
            raise InputError("e_default must be non-negative")


@dataclass(frozen=True)
class RegResult:
    cva_indep: float
    cva_wwr: float
    cva_total: float


def regulatory_integrands(inp: RegInputs) -> tuple[np.ndarray, np.ndarray]:
    indep = inp.e_default * inp.e_exposure
    wwr = inp.rho * inp.sd_default * inp.sd_exposure
    return indep, wwr


def regulatory_cva(inp: RegInputs) -> RegResult:
    indep, wwr = regulatory_integrands(inp)
    cva_indep = float(np.dot(inp.weights, indep))
    cva_wwr = float(np.dot(inp.weights, wwr))
    return RegResult(cva_indep, cva_wwr, cva_indep + cva_wwr)


def crisis_ratio(crisis_sd, recent_sd, grid) -> np.ndarray:
    """Per-bucket ``crisis / recent``; 0/0 buckets keep ratio 1."""
    grid = np.asarray(grid, dtype=float)
    crisis = as_values(crisis_sd, grid, "crisis_sd")
    recent = as_values(recent_sd, grid, "recent_sd")
    bad = (recent <= 0.0) & (crisis > 0.0)
    if np.any(bad):
        taus = ", ".join(f"{t:g}" for t in grid[bad][:5])
        raise InputError(f"recent default SD is zero where crisis SD is not (tau = {taus})")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(recent > 0.0, crisis / np.where(recent > 0.0, recent, 1.0), 1.0)


def crisis_rescale(inp: RegInputs, crisis_sd: TermStructure, recent_sd: TermStructure) -> RegInputs:
    """Swap the recent default volatility for the crisis-window one, bucket by bucket."""
    ratio = crisis_ratio(crisis_sd, recent_sd, inp.grid)
    return replace(inp, sd_default=inp.sd_default * ratio)
