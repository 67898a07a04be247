"""Brute-force verifiers for the moment identities and the exposure engine.

The oracles draw from their own Box-Muller sampler and compute their own
sample statistics, so nothing here shares a code path with the estimators
under test except the formulas being verified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .accounting import AcctInputs, accounting_cva, accounting_fva
from .market import MarketSnapshot
from .moments import MomentPair, TripleMoments, product_mean_2, product_mean_3, var_product
from .pricing import IrsTrade, Portfolio
from .regulatory import RegInputs, regulatory_cva, trapezoid_weights

IDENTITY_TOL = 1e-10


class BoxMuller:
    """Standard normals from paired uniforms; seeded independently of production RNG use."""

    def __init__(self, seed: int):
        self._u = np.random.Generator(np.random.PCG64(seed))

    def normal(self, size) -> np.ndarray:
        n = int(np.prod(size))
        half = (n + 1) // 2
        u1 = 1.0 - self._u.random(half)
        u2 = self._u.random(half)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate((r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)))
        return z[:n].reshape(size)


def _mean(x):
    return float(np.sum(x) / x.size)


def _sd(x):
    m = _mean(x)
    return math.sqrt(_mean((x - m) * (x - m)))


def _corr(x, y):
    sx, sy = _sd(x), _sd(y)
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return _mean((x - _mean(x)) * (y - _mean(y))) / (sx * sy)


def _residual(formula: float, direct: float, scale: float) -> float:
    return abs(formula - direct) / max(abs(direct), scale, 1e-300)


def _pair_moments(a, b) -> MomentPair:
    return MomentPair(_mean(a), _mean(b), _sd(a), _sd(b), _corr(a, b))


def identity_check_2(seed: int, n: int, rho: float = 0.37, means=(1.5, -0.7), sds=(0.8, 2.0),
                     perturb: float = 0.0) -> float:
    """Relative residual of ``E[ab]`` rebuilt from sample moments.

    ``perturb`` is added to the sample correlation before it enters the
    formula (negative testing only).
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    z = BoxMuller(seed).normal((2, n))
    a = means[0] + sds[0] * z[0]
    b = means[1] + sds[1] * (rho * z[0] + math.sqrt(max(0.0, 1.0 - rho * rho)) * z[1])
    direct = _mean(a * b)
    p = _pair_moments(a, b)
    if perturb:
        p = replace(p, rho=float(np.clip(p.rho + perturb, -1.0, 1.0)) if abs(p.rho) < 1 else p.rho - perturb)
    return _residual(product_mean_2(p), direct, _mean(np.abs(a * b)))


def _random_spd(rng: BoxMuller, k: int) -> np.ndarray:
    g = rng.normal((k, k))
    m = g @ g.T + 0.5 * np.eye(k)
    d = np.sqrt(np.diag(m))
    return m / np.outer(d, d)


def triple_moments(a, b, c) -> TripleMoments:
    return TripleMoments(
        mean_a=_mean(a), mean_b=_mean(b), mean_c=_mean(c),
        sd_a=_sd(a), sd_b=_sd(b), sd_c=_sd(c),
        rho_ab=_corr(a, b), rho_ac=_corr(a, c), rho_bc=_corr(b, c),
        rho_a_bc=_corr(a, b * c), rho_b_ac=_corr(b, a * c), rho_c_ab=_corr(c, a * b),
        sd_bc=_sd(b * c), sd_ac=_sd(a * c), sd_ab=_sd(a * b),
    )


def _var_expansion(a, b) -> float:
    return var_product(_pair_moments(a, b), _corr(a * a, b * b), _sd(a * a), _sd(b * b),
                       _mean(a * a), _mean(b * b))


def identity_check_3(seed: int, n: int, deterministic_c: bool = False, perturb: float = 0.0) -> float:
    """Max relative residual over the three pivots of ``E[abc]`` and ``Var(ab)``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = BoxMuller(seed)
    chol = np.linalg.cholesky(_random_spd(rng, 3))
    z = chol @ rng.normal((3, n))
    a = 1.2 + 0.5 * z[0]
    b = -0.4 + 1.5 * z[1]
    c = np.full(n, 2.0) if deterministic_c else 0.8 + 0.3 * z[2]
    t = triple_moments(a, b, c)
    if perturb:
        t = replace(t, rho_a_bc=t.rho_a_bc + perturb)
    direct = _mean(a * b * c)
    scale = _mean(np.abs(a * b * c))
    worst = max(_residual(product_mean_3(t, p), direct, scale) for p in "abc")
    v_direct = _sd(a * b) ** 2
    worst = max(worst, _residual(_var_expansion(a, b), v_direct, _mean((a * b) ** 2)))
    return worst


def appendix2_check(rho_true: float, n_per_sample: int, n_samples: int, seed: int,
                    perturb: float = 0.0) -> float:
    """Correlation of per-sample means of correlated draws.

    ``perturb`` shifts the correlation used to build the draws away from
    ``rho_true`` (negative testing only).
    """
    if n_per_sample < 1 or n_samples < 100:
        raise ValueError("need n_per_sample >= 1 and n_samples >= 100")
    z = BoxMuller(seed).normal((2, n_samples, n_per_sample))
    x = z[0]
    r = float(np.clip(rho_true + perturb, -1.0, 1.0)) if perturb else rho_true
    y = r * z[0] + math.sqrt(max(0.0, 1.0 - r * r)) * z[1]
    return _corr(x.mean(axis=1), y.mean(axis=1))


@dataclass(frozen=True)
class WorldConfig:
    """Joint per-bucket world: Normal exposure, lognormal hazard and funding spread."""

    grid: tuple[float, ...] = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0)
    n: int = 100_000
    rho_rc: float = 0.0  # exposure factor vs hazard factor
    rho_rf: float = 0.0  # exposure factor vs funding factor
    rho_cf: float = 0.0  # hazard factor vs funding factor
    exposure_mean: float = 0.002
    exposure_vol: float = 0.01
    hazard: float = 0.02
    hazard_vol: float = 0.5
    funding: float = 0.01
    funding_vol: float = 0.4
    lgd: float = 0.6

    def correlation(self) -> np.ndarray:
        return np.array([[1.0, self.rho_rc, self.rho_rf], [self.rho_rc, 1.0, self.rho_cf],
                         [self.rho_rf, self.rho_cf, 1.0]])


INDEPENDENT = WorldConfig()
WRONG_WAY = WorldConfig(rho_rc=0.8, rho_rf=0.5, rho_cf=0.6)
RIGHT_WAY = WorldConfig(rho_rc=-0.8, rho_rf=-0.5, rho_cf=0.6)


@dataclass
class BucketSample:
    x: np.ndarray  # discounted net value
    default: np.ndarray  # LGD lambda D_lambda
    surv: np.ndarray
    fund_df: np.ndarray
    carry: np.ndarray

    @property
    def x_pos(self) -> np.ndarray:
        return np.maximum(self.x, 0.0)


def simulate_bucket(world: WorldConfig, tau: float, rng: BoxMuller) -> BucketSample:
    chol = np.linalg.cholesky(world.correlation())
    z = chol @ rng.normal((3, world.n))
    x = world.exposure_mean + world.exposure_vol * math.sqrt(tau) * z[0]
    lam = world.hazard * np.exp(world.hazard_vol * z[1] - 0.5 * world.hazard_vol**2)
    s_f = world.funding * np.exp(world.funding_vol * z[2] - 0.5 * world.funding_vol**2)
    surv = np.exp(-lam * tau)
    fund_df = np.exp(-s_f * tau)
    return BucketSample(x, world.lgd * lam * surv, surv, fund_df, s_f * fund_df)


def bucket_reg_inputs(s: BucketSample, tau: float) -> RegInputs:
    xp = s.x_pos
    return RegInputs([tau], [_mean(s.default)], [_sd(s.default)], [_mean(xp)], [_sd(xp)],
                     [_corr(s.default, xp)], weights=[1.0])


def bucket_acct_inputs(s: BucketSample, tau: float) -> AcctInputs:
    xp, x = s.x_pos, s.x
    d, c = s.fund_df, s.carry
    stats = dict(
        e_exp_pos=_mean(xp), e_exp_net=_mean(x), sd_exp_pos=_sd(xp), sd_exp_net=_sd(x),
        m2_pos_sq=_mean(xp * xp), sd_pos_sq=_sd(xp * xp), m2_net_sq=_mean(x * x), sd_net_sq=_sd(x * x),
        e_default=_mean(s.default), sd_default=_sd(s.default), e_surv=_mean(s.surv), sd_surv=_sd(s.surv),
        e_fund_df=_mean(d), sd_fund_df=_sd(d), e_fund_carry=_mean(c), sd_fund_carry=_sd(c),
        m2_fund_df_sq=_mean(d * d), sd_fund_df_sq=_sd(d * d),
        m2_fund_carry_sq=_mean(c * c), sd_fund_carry_sq=_sd(c * c),
        c1=_corr(d, xp), c2=_corr(s.default, d * xp), c2_1=_corr(d * d, xp * xp),
        f1=_corr(c, x), f2=_corr(s.surv, c * x), f2_1=_corr(c * c, x * x),
    )
    return AcctInputs(grid=[tau], weights=[1.0], **{k: [v] for k, v in stats.items()})


@dataclass
class ReconstructionResult:
    residuals: dict[str, float]
    reg_wwr: float
    reg_wwr_se: float
    terms: dict[str, float] = field(default_factory=dict)


Corruptor = Callable[[object], object]


def integral_reconstruction(seed: int, world: WorldConfig = WRONG_WAY,
                            corrupt: Corruptor | None = None) -> ReconstructionResult:
    """Decomposed formulas versus direct sample estimates, bucket by bucket.

    ``corrupt`` may perturb the assembled inputs; it exists so the negative
    test can confirm the check notices bad moments.
    """
    rng = BoxMuller(seed)
    grid = np.asarray(world.grid, dtype=float)
    w = trapezoid_weights(grid) if grid.size > 1 else np.ones(1)
    worst = {"reg": 0.0, "acva": 0.0, "afva": 0.0}
    reg_wwr, reg_var = 0.0, 0.0
    totals = dict.fromkeys(("reg_indep", "cva_ww1", "cva_ww2", "fva_ww1", "fva_ww2"), 0.0)
    for wi, tau in zip(w, grid):
        s = simulate_bucket(world, float(tau), rng)
        xp = s.x_pos
        reg_in = bucket_reg_inputs(s, float(tau))
        acct_in = bucket_acct_inputs(s, float(tau))
        if corrupt is not None:
            reg_in, acct_in = corrupt(reg_in), corrupt(acct_in)
        reg = regulatory_cva(reg_in)
        cva = accounting_cva(acct_in)
        fva = accounting_fva(acct_in)
        for name, got, prod in (
            ("reg", reg.cva_total, s.default * xp),
            ("acva", cva.total, s.default * s.fund_df * xp),
            ("afva", fva.total, s.surv * s.carry * s.x),
        ):
            worst[name] = max(worst[name], _residual(got, _mean(prod), _mean(np.abs(prod))))
        dev = (s.default - _mean(s.default)) * (xp - _mean(xp))
        reg_wwr += wi * reg.cva_wwr
        reg_var += wi * wi * _sd(dev) ** 2 / world.n
        totals["reg_indep"] += wi * reg.cva_indep
        totals["cva_ww1"] += wi * cva.ww1
        totals["cva_ww2"] += wi * cva.ww2
        totals["fva_ww1"] += wi * fva.ww1
        totals["fva_ww2"] += wi * fva.ww2
    return ReconstructionResult(worst, float(reg_wwr), math.sqrt(reg_var), {k: float(v) for k, v in totals.items()})


# --- exposure Monte Carlo -------------------------------------------------


def _cash_flows(trade: IrsTrade):
    """(fixed pay times, accruals), (float starts, ends) rolled back from maturity."""
    def roll(freq):
        ends, t = [], trade.maturity
        while t > trade.start + 1e-9:
            ends.append(t)
            t -= 1.0 / freq
        ends.reverse()
        starts = [trade.start] + ends[:-1]
        return starts, ends

    fs, fe = roll(trade.fixed_freq)
    ls, le = roll(trade.float_freq)
    return list(zip(fs, fe)), list(zip(ls, le))


def _trade_state(trade: IrsTrade, snap: MarketSnapshot, tau: float):
    """Remaining annuity, forward swap rate and vol at ``tau`` by explicit cash-flow sums."""
    df = snap.zero_curve.discount_factor
    fixed, floating = _cash_flows(trade)
    annuity = sum((e - s) * df(e) for s, e in fixed if e > tau)
    fixing = snap.fixing(1.0 / trade.float_freq)
    flt = 0.0
    for s, e in floating:
        if e <= tau:
            continue
        if s <= 0.0 and fixing is not None:
            flt += (e - s) * fixing * df(e)
        else:
            flt += df(s) - df(e)
    vol = float(snap.vol_surface.vol(tau, max(trade.maturity - tau, 0.0)))
    return annuity, (flt / annuity if annuity > 0 else 0.0), vol


@dataclass
class ExposureMc:
    grid: np.ndarray
    ee: np.ndarray
    ee_se: np.ndarray
    ene: np.ndarray


def exposure_mc(portfolio: Portfolio | IrsTrade, snap: MarketSnapshot, grid: Sequence[float],
                n_paths: int = 1_000_000, seed: int = 7) -> ExposureMc:
    """One-factor MC: every remaining forward swap rate moves with one shared normal shock."""
    trades = (portfolio,) if isinstance(portfolio, IrsTrade) else portfolio.trades
    rng = BoxMuller(seed)
    grid = np.asarray(grid, dtype=float)
    ee, se, ene = np.zeros(grid.size), np.zeros(grid.size), np.zeros(grid.size)
    for i, tau in enumerate(grid):
        z = rng.normal(n_paths)
        value = np.zeros(n_paths)
        for t in trades:
            annuity, fwd, vol = _trade_state(t, snap, float(tau))
            if annuity <= 0.0:
                continue
            rate = fwd + vol * math.sqrt(tau) * z
            value += t.direction.sign * t.notional * annuity * (rate - t.fixed_rate)
        pos = np.maximum(value, 0.0)
        ee[i] = _mean(pos)
        se[i] = _sd(pos) / math.sqrt(n_paths)
        ene[i] = _mean(value)
    return ExposureMc(grid, ee, se, ene)


# --- suite ----------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.value < self.threshold)


def _bump_correlations(inp):
    if isinstance(inp, RegInputs):
        return replace(inp, rho=np.clip(inp.rho * 1.01 + 1e-3, -1, 1))
    return replace(inp, c1=np.clip(inp.c1 * 1.01 + 1e-3, -1, 1), f1=np.clip(inp.f1 * 1.01 + 1e-3, -1, 1))


CHECK_NAMES = (
    "identity_2", "identity_2_independent", "identity_2_perfect", "identity_3", "identity_3_degenerate",
    "reconstruction_reg", "reconstruction_acva", "reconstruction_afva", "appendix2",
)


def run_suite(seed: int, n: int = 100_000, corrupt: str | None = None) -> list[CheckResult]:
    """Every oracle check; ``corrupt`` names one check whose moment inputs get perturbed."""
    if corrupt is not None and corrupt not in CHECK_NAMES:
        raise ValueError(f"unknown check {corrupt!r}; choose from {', '.join(CHECK_NAMES)}")

    def bump(name: str, size: float = 1e-3) -> float:
        return size if corrupt == name else 0.0

    out = [
        CheckResult("identity_2", identity_check_2(seed, n, perturb=bump("identity_2")), IDENTITY_TOL),
        CheckResult("identity_2_independent",
                    identity_check_2(seed + 1, n, rho=0.0, perturb=bump("identity_2_independent")), IDENTITY_TOL),
        CheckResult("identity_2_perfect",
                    identity_check_2(seed + 2, n, rho=1.0, perturb=bump("identity_2_perfect")), IDENTITY_TOL),
        CheckResult("identity_3", identity_check_3(seed, n, perturb=bump("identity_3")), IDENTITY_TOL),
        CheckResult("identity_3_degenerate",
                    identity_check_3(seed + 3, n, True, perturb=bump("identity_3_degenerate")), IDENTITY_TOL),
    ]
    world = replace(WRONG_WAY, n=n)
    clean = integral_reconstruction(seed, world)
    for key in ("reg", "acva", "afva"):
        name = f"reconstruction_{key}"
        rec = integral_reconstruction(seed, world, _bump_correlations) if corrupt == name else clean
        out.append(CheckResult(name, rec.residuals[key], IDENTITY_TOL))
    n_samples = 1260
    worst = 0.0
    for rho in (-0.5, 0.0, 0.7):
        for m in (1, 10, 100):
            est = appendix2_check(rho, m, n_samples, seed, perturb=bump("appendix2", 0.3))
            worst = max(worst, abs(est - rho))
    out.append(CheckResult("appendix2", worst, 3.0 / math.sqrt(n_samples)))
    return out
