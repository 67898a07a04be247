"""Accounting CVA and FVA with two wrong-way terms each.

Both integrands are triple products expanded around the historically
calibrated factor::

    CVA:  a = LGD lambda D_lambda,  b = D_sF,         c = D_r Pi^+
    FVA:  a = D_lambda,             b = s_F D_sF,     c = D_r Pi

``indep = E[a]E[b]E[c]``, ``ww1 = E[a] rho_bc SD(b) SD(c)`` and
``ww2 = rho_{a,bc} SD(a) SD(bc)``. ``SD(bc)`` is never estimated jointly; it
comes from the variance expansion using separate moments of ``b`` and ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .errors import InputError
from .moments import MomentPair, var_product
from .regulatory import trapezoid_weights
from .structures import as_values

_CORRELATIONS = ("c1", "c2", "c2_1", "f1", "f2", "f2_1")
_NON_NEGATIVE = (
    "sd_exp_pos", "sd_exp_net", "sd_pos_sq", "sd_net_sq", "sd_default", "sd_surv",
    "sd_fund_df", "sd_fund_carry", "sd_fund_df_sq", "sd_fund_carry_sq",
)


@dataclass(frozen=True, eq=False)
class AcctInputs:
    grid: np.ndarray
    # market-implied exposure moments
    e_exp_pos: np.ndarray
    e_exp_net: np.ndarray
    sd_exp_pos: np.ndarray
    sd_exp_net: np.ndarray
    m2_pos_sq: np.ndarray
    sd_pos_sq: np.ndarray
    m2_net_sq: np.ndarray
    sd_net_sq: np.ndarray
    # default and funding moments
    e_default: np.ndarray
    sd_default: np.ndarray
    e_surv: np.ndarray
    sd_surv: np.ndarray
    e_fund_df: np.ndarray
    sd_fund_df: np.ndarray
    e_fund_carry: np.ndarray
    sd_fund_carry: np.ndarray
    m2_fund_df_sq: np.ndarray
    sd_fund_df_sq: np.ndarray
    m2_fund_carry_sq: np.ndarray
    sd_fund_carry_sq: np.ndarray
    # correlations
    c1: np.ndarray
    c2: np.ndarray
    c2_1: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f2_1: np.ndarray
    weights: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        grid = np.atleast_1d(np.asarray(self.grid, dtype=float))
        object.__setattr__(self, "grid", grid)
        for f in fields(self):
            if f.name in ("grid", "weights"):
                continue
            object.__setattr__(self, f.name, as_values(getattr(self, f.name), grid, f.name))
        w = trapezoid_weights(grid) if self.weights is None else as_values(self.weights, grid, "weights")
        object.__setattr__(self, "weights", w)
        for name in _CORRELATIONS:
            if np.any(np.abs(getattr(self, name)) > 1.0 + 1e-12):
                raise InputError(f"correlation {name} must lie in [-1, 1]")
        for name in _NON_NEGATIVE:
            if np.any(getattr(self, name) < 0.0):
                raise InputError(f"{name} must be non-negative")
        if np.any(self.e_surv <= 0.0) or np.any(self.e_surv > 1.0 + 1e-12):
            raise InputError("e_surv must lie in (0, 1]")
        if np.any(self.e_fund_df <= 0.0) or np.any(self.e_fund_df > 1.0 + 1e-12):
            raise InputError("e_fund_df must lie in (0, 1]")


@dataclass(frozen=True)
class XvaTerms:
    indep: float
    ww1: float
    ww2: float
    total: float


@dataclass(frozen=True)
class AcctResult:
    cva: XvaTerms
    fva: XvaTerms


def var_product_c(inp: AcctInputs) -> np.ndarray:
    """``Var(D_sF * D_r Pi^+)`` per bucket."""
    pair = MomentPair(inp.e_fund_df, inp.e_exp_pos, inp.sd_fund_df, inp.sd_exp_pos, inp.c1)
    return var_product(pair, inp.c2_1, inp.sd_fund_df_sq, inp.sd_pos_sq, inp.m2_fund_df_sq, inp.m2_pos_sq)


def var_product_f(inp: AcctInputs) -> np.ndarray:
    """``Var(s_F D_sF * D_r Pi)`` per bucket."""
    pair = MomentPair(inp.e_fund_carry, inp.e_exp_net, inp.sd_fund_carry, inp.sd_exp_net, inp.f1)
    return var_product(
        pair, inp.f2_1, inp.sd_fund_carry_sq, inp.sd_net_sq, inp.m2_fund_carry_sq, inp.m2_net_sq
    )


def cva_integrands(inp: AcctInputs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    indep = inp.e_default * inp.e_fund_df * inp.e_exp_pos
    ww1 = inp.c1 * inp.e_default * inp.sd_fund_df * inp.sd_exp_pos
    ww2 = inp.c2 * inp.sd_default * np.sqrt(var_product_c(inp))
    return indep, ww1, ww2


def fva_integrands(inp: AcctInputs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    indep = inp.e_surv * inp.e_fund_carry * inp.e_exp_net
    ww1 = inp.f1 * inp.e_surv * inp.sd_fund_carry * inp.sd_exp_net
    ww2 = inp.f2 * inp.sd_surv * np.sqrt(var_product_f(inp))
    return indep, ww1, ww2


def _integrate(w: np.ndarray, parts) -> XvaTerms:
    indep, ww1, ww2 = (float(np.dot(w, p)) for p in parts)
    return XvaTerms(indep, ww1, ww2, indep + ww1 + ww2)


def accounting_cva(inp: AcctInputs) -> XvaTerms:
    return _integrate(inp.weights, cva_integrands(inp))


def accounting_fva(inp: AcctInputs) -> XvaTerms:
    """Funding cost of the net exposure; negative exposure gives a benefit."""
    return _integrate(inp.weights, fva_integrands(inp))


def accounting_xva(inp: AcctInputs) -> AcctResult:
    return AcctResult(accounting_cva(inp), accounting_fva(inp))
