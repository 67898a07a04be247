import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from wwrxva.errors import DomainError, InconsistentMomentsError, InputError
from wwrxva.moments import (
    MomentPair, TripleMoments, normal_plus_moments, normal_raw_moments, pearson,
    product_mean_2, product_mean_3, var_product,
)


def stats(x):
    return x.mean(), x.std()


def corr(x, y):
    return float(((x - x.mean()) * (y - y.mean())).mean() / (x.std() * y.std()))


def sample_pair(rng, n, rho):
    z = rng.standard_normal((2, n))
    a = 1.0 + 0.5 * z[0]
    b = 2.0 + 1.5 * (rho * z[0] + math.sqrt(1 - rho * rho) * z[1])
    return a, b


def pair_of(a, b):
    return MomentPair(a.mean(), b.mean(), a.std(), b.std(), corr(a, b))


def test_product_mean_2_trivial_cases():
    assert product_mean_2(MomentPair(2.0, 3.0, 1.0, 4.0, 0.0)) == 6.0
    mu, sig = 1.3, 0.7
    assert product_mean_2(MomentPair(mu, mu, sig, sig, 1.0)) == pytest.approx(mu * mu + sig * sig)


def test_product_mean_2_sample_oracle():
    a, b = sample_pair(np.random.default_rng(1), 100_000, 0.4)
    direct = (a * b).mean()
    assert product_mean_2(pair_of(a, b)) == pytest.approx(direct, rel=1e-12)


def test_moment_pair_validation():
    with pytest.raises(InputError):
        MomentPair(0, 0, -1.0, 1.0, 0.0)
    with pytest.raises(InputError):
        MomentPair(0, 0, 1.0, 1.0, 1.5)


def triple_of(a, b, c):
    return TripleMoments(
        a.mean(), b.mean(), c.mean(), a.std(), b.std(), c.std(),
        rho_ab=corr(a, b), rho_ac=corr(a, c), rho_bc=corr(b, c),
        rho_a_bc=corr(a, b * c), rho_b_ac=corr(b, a * c), rho_c_ab=corr(c, a * b),
        sd_bc=(b * c).std(), sd_ac=(a * c).std(), sd_ab=(a * b).std(),
    )


def test_product_mean_3_independent_and_degenerate():
    t = TripleMoments(2.0, 3.0, 4.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0)
    for p in "abc":
        assert product_mean_3(t, p) == 24.0
    # c = 1 deterministic: pivot c reduces to E[ab]
    t = TripleMoments(2.0, 3.0, 1.0, 0.5, 0.2, 0.0, rho_ab=0.3, rho_c_ab=0.0, sd_ab=1.0)
    assert product_mean_3(t, "c") == pytest.approx(product_mean_2(MomentPair(2.0, 3.0, 0.5, 0.2, 0.3)))


def test_product_mean_3_missing_fields():
    t = TripleMoments(1, 1, 1, 1, 1, 1)
    with pytest.raises(InputError):
        product_mean_3(t, "a")
    with pytest.raises(InputError):
        product_mean_3(t, "d")


def test_product_mean_3_pivots_sample_oracle():
    rng = np.random.default_rng(5)
    z = rng.standard_normal((3, 100_000))
    a = 1 + 0.3 * z[0]
    b = 2 + 0.5 * (0.6 * z[0] + 0.8 * z[1])
    c = -1 + 0.4 * (0.3 * z[1] + 0.954 * z[2])
    t = triple_of(a, b, c)
    direct = (a * b * c).mean()
    for p in "abc":
        assert product_mean_3(t, p) == pytest.approx(direct, rel=1e-12)


def test_var_product_trivial_cases():
    # deterministic a: Var(ab) = a^2 Var(b)
    p = MomentPair(3.0, 1.0, 0.0, 2.0, 0.0)
    v = var_product(p, 0.0, 0.0, 5.0, 9.0, 1.0 + 4.0)
    assert v == pytest.approx(9.0 * 4.0)
    # a = b standard normal: Var(a^2) = 2
    p = MomentPair(0.0, 0.0, 1.0, 1.0, 1.0)
    assert var_product(p, 1.0, math.sqrt(2.0), math.sqrt(2.0), 1.0, 1.0) == pytest.approx(2.0)


def test_var_product_clamps_and_raises():
    p = MomentPair(1.0, 1.0, 0.0, 0.0, 0.0)
    assert var_product(p, 0.0, 0.0, 0.0, 1.0, 1.0 - 5e-13) == 0.0
    with pytest.raises(InconsistentMomentsError):
        var_product(p, 0.0, 0.0, 0.0, 1.0, 0.9)


def test_var_product_sample_oracle():
    a, b = sample_pair(np.random.default_rng(9), 100_000, -0.3)
    v = var_product(pair_of(a, b), corr(a * a, b * b), (a * a).std(), (b * b).std(), (a * a).mean(), (b * b).mean())
    assert v == pytest.approx((a * b).var(), rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.integers(5, 400),
    st.floats(-0.95, 0.95),
    st.floats(-3, 3),
    st.floats(0.1, 3),
)
def test_identities_exact_on_any_sample(seed, n, rho, shift, scale):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((3, n))
    a = shift + scale * z[0]
    b = 1.0 + (rho * z[0] + math.sqrt(1 - rho * rho) * z[1])
    c = 0.5 + 0.2 * z[2] + 0.1 * z[0]
    assume(min(a.std(), b.std(), c.std(), (a * b).std(), (b * c).std(), (a * c).std()) > 1e-6)
    assert product_mean_2(pair_of(a, b)) == pytest.approx((a * b).mean(), rel=1e-10, abs=1e-12)
    t = triple_of(a, b, c)
    vals = [product_mean_3(t, p) for p in "abc"]
    direct = (a * b * c).mean()
    scale3 = np.abs(a * b * c).mean()
    for v in vals:
        assert abs(v - direct) <= 1e-10 * scale3
    v = var_product(pair_of(a, b), corr(a * a, b * b), (a * a).std(), (b * b).std(), (a * a).mean(), (b * b).mean())
    assert abs(v - (a * b).var()) <= 1e-10 * ((a * b) ** 2).mean()


def test_normal_plus_moments_at_zero_mean():
    want = (1 / math.sqrt(2 * math.pi), 0.5, 2 / math.sqrt(2 * math.pi), 1.5)
    for k, w in enumerate(want, start=1):
        assert normal_plus_moments(0.0, 1.0, k) == pytest.approx(w, rel=1e-14)


def test_normal_plus_moments_deep_itm_and_errors():
    assert normal_plus_moments(50.0, 1.0, 1) == pytest.approx(50.0, rel=1e-15)
    with pytest.raises(DomainError):
        normal_plus_moments(0.0, 1.0, 5)
    with pytest.raises(DomainError):
        normal_plus_moments(0.0, -1.0, 1)
    assert normal_plus_moments(-1.0, 0.0, 2) == 0.0
    assert normal_plus_moments(2.0, 0.0, 3) == 8.0


def test_normal_plus_moments_monte_carlo():
    mu, sig = 0.01, 0.02
    x = np.maximum(mu + sig * np.random.default_rng(11).standard_normal(10_000_000), 0.0)
    for k in range(1, 5):
        xk = x**k
        se = xk.std() / math.sqrt(x.size)
        assert abs(normal_plus_moments(mu, sig, k) - xk.mean()) < 3 * se


@pytest.mark.parametrize("d", [-30.0, -12.0, -6.0, -3.6, -3.4, -1.0, 0.5, 4.0])
def test_normal_plus_moments_against_quadrature(d):
    sig = 0.7
    mu = d * sig
    pdf = lambda x: math.exp(-0.5 * ((x - mu) / sig) ** 2) / (sig * math.sqrt(2 * math.pi))
    for k in range(1, 5):
        # substitute x = mu + sig*z on the positive half and integrate z from -d
        f = lambda z: (mu + sig * z) ** k * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        ref = quad(f, -d, -d + 40.0, epsabs=0, epsrel=1e-13, limit=400)[0]
        assert normal_plus_moments(mu, sig, k) == pytest.approx(ref, rel=1e-9)


@settings(max_examples=80, deadline=None)
@given(st.floats(-10, 10), st.floats(0.01, 5), st.floats(1e-4, 1.0))
def test_normal_plus_monotone_and_jensen(mu, sigma, step):
    for k in range(1, 5):
        assert normal_plus_moments(mu + step, sigma, k) >= normal_plus_moments(mu, sigma, k)
    m1 = normal_plus_moments(mu, sigma, 1)
    assert normal_plus_moments(mu, sigma, 2) >= m1 * m1 * (1 - 1e-12)


def test_normal_raw_moments():
    m = normal_raw_moments(0.0, 1.0)
    assert tuple(float(x) for x in m) == (0.0, 1.0, 0.0, 3.0)


def test_pearson_conventions():
    x = np.arange(10.0)
    assert pearson(x, x) == pytest.approx(1.0)
    assert pearson(x, -x) == pytest.approx(-1.0)
    assert pearson(x, np.full(10, 3.0)) == 0.0
    two_d = np.column_stack([x, np.ones(10)])
    np.testing.assert_array_equal(pearson(two_d, two_d), [1.0, 0.0])
