"""Exact moment algebra for products of random variables.

The identities here are exact given consistent inputs: feed them statistics
computed from one sample (population, 1/n normalisation) and they reproduce
the sample statistics of the product to floating-point accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.special import erfcx, ndtr

from .errors import DomainError, InconsistentMomentsError, InputError

NEGATIVE_VARIANCE_TOL = 1e-12

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_MILLER_START = 80
# d = mu / sigma below which the tail integrals come from the backward recurrence
_TAIL_SWITCH = -3.5
_UNDERFLOW = 38.5


@dataclass(frozen=True)
class MomentPair:
    mean_a: float
    mean_b: float
    sd_a: float
    sd_b: float
    rho: float

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.sd_a) < 0) or np.any(np.asarray(self.sd_b) < 0):
            raise InputError("standard deviations must be non-negative")
        if np.any(np.abs(np.asarray(self.rho)) > 1.0 + 1e-12):
            raise InputError("correlation must lie in [-1, 1]")


@dataclass(frozen=True)
class TripleMoments:
    mean_a: float
    mean_b: float
    mean_c: float
    sd_a: float
    sd_b: float
    sd_c: float
    rho_ab: Optional[float] = None
    rho_ac: Optional[float] = None
    rho_bc: Optional[float] = None
    rho_a_bc: Optional[float] = None
    rho_b_ac: Optional[float] = None
    rho_c_ab: Optional[float] = None
    sd_bc: Optional[float] = None
    sd_ac: Optional[float] = None
    sd_ab: Optional[float] = None


def product_mean_2(p: MomentPair):
    """``E[ab] = E[a]E[b] + rho SD(a) SD(b)``."""
    return p.mean_a * p.mean_b + p.rho * p.sd_a * p.sd_b


_PIVOTS = {
    # pivot: (pivot mean, pair rho, pair sds, pivot-vs-pair rho, pivot sd, pair-product sd)
    "a": ("mean_a", "rho_bc", ("sd_b", "sd_c"), "rho_a_bc", "sd_a", "sd_bc"),
    "b": ("mean_b", "rho_ac", ("sd_a", "sd_c"), "rho_b_ac", "sd_b", "sd_ac"),
    "c": ("mean_c", "rho_ab", ("sd_a", "sd_b"), "rho_c_ab", "sd_c", "sd_ab"),
}


def product_mean_3(t: TripleMoments, pivot: Literal["a", "b", "c"] = "a"):
    """``E[abc]`` expanded around ``pivot``.

    For pivot ``a``::

        E[a]E[b]E[c] + E[a] rho_bc SD(b) SD(c) + rho_{a,bc} SD(a) SD(bc)
    """
    try:
        mean_name, pair_rho, (s1, s2), cross_rho, piv_sd, pair_sd = _PIVOTS[pivot]
    except KeyError:
        raise InputError(f"pivot must be one of a, b, c; got {pivot!r}") from None
    needed = (pair_rho, cross_rho, pair_sd)
    missing = [name for name in needed if getattr(t, name) is None]
    if missing:
        raise InputError(f"pivot {pivot!r} needs {', '.join(missing)}")
    head = t.mean_a * t.mean_b * t.mean_c
    pair = getattr(t, mean_name) * getattr(t, pair_rho) * getattr(t, s1) * getattr(t, s2)
    cross = getattr(t, cross_rho) * getattr(t, piv_sd) * getattr(t, pair_sd)
    return head + pair + cross


def clamp_variance(var, scale=1.0):
    """Zero out round-off negatives; raise on material ones.

    The tolerance is ``NEGATIVE_VARIANCE_TOL * max(1, scale)`` so that it
    also behaves for inputs quoted in large currency units.
    """
    var = np.asarray(var, dtype=float)
    tol = NEGATIVE_VARIANCE_TOL * np.maximum(1.0, np.abs(scale))
    if np.any(var < -tol):
        worst = float(np.min(var))
        raise InconsistentMomentsError(f"moment inputs imply variance {worst:.3e} < 0")
    out = np.where(var < 0.0, 0.0, var)
    return float(out) if out.ndim == 0 else out


def var_product(p: MomentPair, rho_sq, sd_a2, sd_b2, mean_a2, mean_b2):
    """``Var(ab)`` from separate moments of ``a`` and ``b``.

    ``rho_sq`` is the correlation of ``a**2`` with ``b**2``; ``sd_a2`` and
    ``mean_a2`` are the SD and mean of ``a**2`` (likewise for ``b``).
    """
    cross = p.rho * p.sd_a * p.sd_b + p.mean_a * p.mean_b
    second = mean_a2 * mean_b2
    var = rho_sq * sd_a2 * sd_b2 + second - cross * cross
    return clamp_variance(var, second)


def min_square_correlation(p: MomentPair, sd_a2, sd_b2, mean_a2, mean_b2):
    """Smallest ``rho_sq`` for which :func:`var_product` is non-negative.

    Returns ``-inf`` where ``sd_a2 * sd_b2 == 0`` (no constraint).
    """
    cross = p.rho * p.sd_a * p.sd_b + p.mean_a * p.mean_b
    room = np.asarray(sd_a2, dtype=float) * np.asarray(sd_b2, dtype=float)
    need = cross * cross - np.asarray(mean_a2, dtype=float) * np.asarray(mean_b2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(room > 0.0, need / np.where(room > 0.0, room, 1.0), -np.inf)


def _tail_hh(x: np.ndarray, max_order: int) -> np.ndarray:
    """Scaled tail integrals ``int_0^inf u^n / n! exp(-x u - u^2/2) du``.

    Miller's backward recurrence ``H[n-1] = x H[n] + (n+1) H[n+1]``,
    normalised by ``H[0]`` = Mills ratio. Stable for x > 0.
    """
    h_next = np.zeros_like(x)
    h_cur = np.ones_like(x)
    kept = [None] * (max_order + 1)
    for m in range(_MILLER_START, 0, -1):
        h_prev = x * h_cur + (m + 1) * h_next
        h_next, h_cur = h_cur, h_prev
        if m - 1 <= max_order:
            kept[m - 1] = h_cur
        # rescale to keep the recurrence in range
        big = np.abs(h_cur) > 1e200
        if np.any(big):
            f = np.where(big, 1e-200, 1.0)
            h_cur = h_cur * f
            h_next = h_next * f
            kept = [None if k is None else k * f for k in kept]
    mills = erfcx(x / math.sqrt(2.0)) * math.sqrt(math.pi / 2.0)
    scale = mills / kept[0]
    return np.stack([k * scale for k in kept])


def _positive_part_table(mu, sigma, max_order: int = 4) -> np.ndarray:
    """``E[(X^+)^k]`` for k = 0..max_order, X ~ N(mu, sigma^2); sigma may be 0."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    mu, sigma = np.broadcast_arrays(mu, sigma)
    shape = mu.shape
    mu, sigma = mu.reshape(-1), sigma.reshape(-1)
    out = np.empty((max_order + 1,) + mu.shape)
    degenerate = sigma <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(degenerate, 0.0, mu / np.where(degenerate, 1.0, sigma))

    # direct partial moments I_k = int_{-d}^inf z^k phi(z) dz
    phi = np.exp(-0.5 * d * d) / _SQRT_2PI
    partial = [ndtr(d), phi]
    for k in range(2, max_order + 1):
        partial.append((-d) ** (k - 1) * phi + (k - 1) * partial[k - 2])
    for n in range(max_order + 1):
        acc = np.zeros(mu.shape)
        for k in range(n + 1):
            acc = acc + math.comb(n, k) * mu ** (n - k) * sigma**k * partial[k]
        out[n] = acc

    tail = (~degenerate) & (d < _TAIL_SWITCH)
    if np.any(tail):
        x = -d[tail]
        live = x < _UNDERFLOW
        vals = np.zeros((max_order + 1, x.size))
        if np.any(live):
            hh = _tail_hh(x[live], max_order)
            phi_x = np.exp(-0.5 * x[live] ** 2) / _SQRT_2PI
            s = sigma[tail][live]
            for n in range(max_order + 1):
                vals[n, live] = math.factorial(n) * phi_x * hh[n] * s**n
        out[:, tail] = vals

    if np.any(degenerate):
        pos = np.maximum(mu[degenerate], 0.0)
        for n in range(max_order + 1):
            out[n][degenerate] = np.where(pos > 0.0, pos**n, 1.0 if n == 0 else 0.0)
    return out.reshape((max_order + 1,) + shape)


def normal_plus_moments(mu, sigma, order: int):
    """``E[(X^+)^order]`` for ``X ~ Normal(mu, sigma^2)``, order 1..4.

    Vectorised over ``mu`` and ``sigma``. ``sigma == 0`` is accepted and gives
    ``max(mu, 0) ** order``.
    """
    if order not in (1, 2, 3, 4):
        raise DomainError(f"order must be 1..4, got {order!r}")
    if np.any(np.asarray(sigma) < 0.0):
        raise DomainError("sigma must be non-negative")
    out = _positive_part_table(mu, sigma, order)[order]
    return float(out) if out.ndim == 0 else out


def normal_raw_moments(mu, sigma) -> tuple:
    """``E[X^k]`` for k = 1..4, X ~ N(mu, sigma^2)."""
    mu = np.asarray(mu, dtype=float)
    s2 = np.asarray(sigma, dtype=float) ** 2
    return (
        mu,
        mu * mu + s2,
        mu**3 + 3.0 * mu * s2,
        mu**4 + 6.0 * mu * mu * s2 + 3.0 * s2 * s2,
    )


def population_sd(x, axis=0):
    """1/n SD; a constant series gives exactly 0."""
    x = np.asarray(x, dtype=float)
    ref = np.take(x, [0], axis=axis)
    return np.std(x - ref, axis=axis)


def pearson(a, b, axis=0):
    """Pearson correlation with 1/n moments; zero-variance slices give 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    da = a - a.mean(axis=axis, keepdims=True)
    db = b - b.mean(axis=axis, keepdims=True)
    cov = (da * db).mean(axis=axis)
    sa = np.sqrt((da * da).mean(axis=axis))
    sb = np.sqrt((db * db).mean(axis=axis))
    denom = sa * sb
    # numerical dust on a constant series must not become a correlation
    scale_a = np.abs(a).max(axis=axis)
    scale_b = np.abs(b).max(axis=axis)
    flat = (sa <= 1e-14 * np.maximum(scale_a, 1e-300)) | (sb <= 1e-14 * np.maximum(scale_b, 1e-300))
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(flat | (denom == 0.0), 0.0, cov / np.where(denom == 0.0, 1.0, denom))
    rho = np.clip(rho, -1.0, 1.0)
    return float(rho) if np.ndim(rho) == 0 else rho
