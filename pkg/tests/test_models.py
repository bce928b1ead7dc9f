"""Characteristic functions, compensators and cumulants."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from svjd.models import (
    BatesParams,
    HestonParams,
    HKDEParams,
    KouJumpParams,
    MarketContext,
    cf_heston,
    cf_kou,
    cf_model,
    char_exponent,
    cumulants_kou,
    cumulants_numeric,
    model_from_dict,
    model_to_dict,
    omega_kde,
)

from conftest import ALL_ROWS, PARAM_ROWS, degenerate_hkde, pure_jump_hkde


# ---------------------------------------------------------------------------
# omega_kde
# ---------------------------------------------------------------------------

def test_omega_zero_intensity():
    assert omega_kde(KouJumpParams(0.0, 0.3, 2.0, 3.0)) == 0.0


def test_omega_forced_arithmetic():
    # p=1, eta1=2: 2/1 + 0 - 1 = 1, so omega = -1
    assert omega_kde(KouJumpParams(1.0, 1.0, 2.0, 5.0)) == pytest.approx(-1.0, abs=1e-15)


def test_omega_amzn_exact_rational():
    # frozen from exact Fraction arithmetic on the decimal literals
    jumps = KouJumpParams(53.165, 0.999, 49.799, 2.587)
    assert omega_kde(jumps) == pytest.approx(-1.07355799953009, rel=1e-14)


def test_omega_requires_eta1_above_one():
    with pytest.raises(ValueError):
        KouJumpParams(1.0, 0.5, 1.0, 2.0)


# ---------------------------------------------------------------------------
# Heston characteristic function
# ---------------------------------------------------------------------------

def _heston_cf_riccati(xi, t, p: HestonParams, ctx: MarketContext):
    """Independent oracle: numerically integrate the Riccati system."""
    def rhs(_, y):
        b = y[2] + 1j * y[3]
        db = (0.5 * (-xi * xi - 1j * xi)
              + (1j * xi * p.rho * p.sigma_v - p.kappa) * b
              + 0.5 * p.sigma_v ** 2 * b * b)
        da = p.kappa * p.theta * b
        return [da.real, da.imag, db.real, db.imag]

    sol = solve_ivp(rhs, [0.0, t], [0.0, 0.0, 0.0, 0.0], rtol=1e-12, atol=1e-14,
                    method="DOP853")
    a = sol.y[0, -1] + 1j * sol.y[1, -1]
    b = sol.y[2, -1] + 1j * sol.y[3, -1]
    return np.exp(1j * xi * (math.log(ctx.spot) + (ctx.rate - ctx.div_yield) * t)
                  + a + b * p.v0)


def test_cf_heston_at_zero_is_one(ctx):
    for params in PARAM_ROWS["heston"].values():
        assert cf_heston(0.0, 1.0, params, ctx) == pytest.approx(1.0, abs=1e-15)


def test_cf_heston_matches_riccati_oracle(ctx):
    params = PARAM_ROWS["heston"]["SPOT"]
    for t in (0.1, 0.5, 2.0):
        for xi in (0.5, 1.0, 5.0, 25.0):
            ours = complex(cf_heston(xi, t, params, ctx))
            oracle = complex(_heston_cf_riccati(xi, t, params, ctx))
            assert abs(ours - oracle) / abs(oracle) < 1e-9


def test_cf_heston_black_scholes_limit(ctx):
    v0 = 0.04
    params = HestonParams(v0=v0, theta=v0, kappa=1e-8, sigma_v=1e-8, rho=0.0)
    for t in (0.25, 1.0, 5.0):
        for xi in (0.3, 1.0, 7.0):
            ours = complex(cf_heston(xi, t, params, ctx))
            gauss = np.exp(1j * xi * (math.log(ctx.spot) + ctx.rate * t)
                           - 0.5 * v0 * t * (xi * xi + 1j * xi))
            assert abs(ours - gauss) / abs(gauss) < 1e-6


def test_cf_heston_forward_normalized_bounded(ctx):
    xi = np.linspace(-200.0, 200.0, 4001)
    for params in PARAM_ROWS["heston"].values():
        for t in (0.1, 1.0, 10.0):
            phi = cf_heston(xi, t, params, ctx)
            normalized = phi * np.exp(-1j * xi * (math.log(ctx.spot) + ctx.rate * t))
            assert np.all(np.abs(normalized) <= 1.0 + 1e-12)


def test_cf_heston_long_maturity_continuity(ctx):
    # branch errors show up as O(1) jumps on a fine frequency grid
    xi = np.linspace(0.0, 200.0, 40001)
    for params in PARAM_ROWS["heston"].values():
        phi = cf_heston(xi, 10.0, params, ctx)
        normalized = phi * np.exp(-1j * xi * (math.log(ctx.spot) + ctx.rate * 10.0))
        assert np.abs(np.diff(normalized)).max() < 0.05


def test_cf_heston_rejects_nonpositive_t(ctx):
    with pytest.raises(ValueError):
        cf_heston(1.0, 0.0, PARAM_ROWS["heston"]["AMZN"], ctx)


# ---------------------------------------------------------------------------
# Kou characteristic function
# ---------------------------------------------------------------------------

def test_cf_kou_at_zero_and_no_jumps():
    jumps = KouJumpParams(2.0, 0.4, 3.0, 4.0)
    assert cf_kou(0.0, 1.7, jumps) == pytest.approx(1.0, abs=1e-15)
    none = KouJumpParams(0.0, 0.4, 3.0, 4.0)
    xi = np.linspace(-40, 40, 101)
    assert np.allclose(cf_kou(xi, 2.0, none), 1.0, atol=1e-15)


def test_cf_kou_symmetric_exponent_imag_odd():
    jumps = KouJumpParams(1.5, 0.5, 6.0, 6.0)
    t = 0.75
    xi = np.linspace(0.1, 30, 50)
    # strip the omega drift: remaining exponent of a symmetric density is even/real-odd/imag
    drift = omega_kde(jumps)
    exp_plus = np.log(cf_kou(xi, t, jumps)) - 1j * xi * drift * t
    exp_minus = np.log(cf_kou(-xi, t, jumps)) + 1j * xi * drift * t
    assert np.allclose(exp_plus.imag, -exp_minus.imag, atol=1e-13)
    assert np.allclose(exp_plus.imag, 0.0, atol=1e-13)


def test_cf_model_hermitian_symmetry(ctx):
    xi = np.linspace(0.0, 60.0, 121)
    for _, _, params in ALL_ROWS:
        plus = cf_model(params, ctx, xi, 0.8)
        minus = cf_model(params, ctx, -xi, 0.8)
        assert np.allclose(minus, np.conj(plus), rtol=0, atol=1e-14 * np.abs(plus).max())


def test_cf_model_martingale_identity_all_rows(ctx):
    for _, _, params in ALL_ROWS:
        for t in (0.1, 1.0, 5.0):
            lhs = complex(cf_model(params, ctx, -1j, t))
            rhs = ctx.spot * math.exp((ctx.rate - ctx.div_yield) * t)
            assert abs(lhs - rhs) / rhs < 1e-10, (params, t)


def test_cf_model_forward_normalized_bounded(ctx):
    xi = np.linspace(-200.0, 200.0, 2001)
    for _, _, params in ALL_ROWS:
        phi = cf_model(params, ctx, xi, 1.0)
        normalized = phi * np.exp(-1j * xi * (math.log(ctx.spot) + ctx.rate * 1.0))
        assert np.all(np.abs(normalized) <= 1.0 + 1e-12)


def test_hkde_reduces_to_heston(ctx):
    heston = PARAM_ROWS["heston"]["SPOT"]
    hkde = HKDEParams(heston, KouJumpParams(0.0, 0.5, 20.0, 20.0))
    xi = np.linspace(-80, 80, 321)
    for t in (0.1, 1.0):
        a = cf_model(hkde, ctx, xi, t)
        b = cf_model(heston, ctx, xi, t)
        assert np.max(np.abs(a - b) / np.abs(b)) < 1e-12


def test_bates_reduces_to_heston(ctx):
    heston = PARAM_ROWS["heston"]["SPOT"]
    bates = BatesParams(heston, lam=0.0, mu_j=-0.2, sigma_j=0.5)
    xi = np.linspace(-80, 80, 321)
    for t in (0.1, 1.0):
        a = cf_model(bates, ctx, xi, t)
        b = cf_model(heston, ctx, xi, t)
        assert np.max(np.abs(a - b) / np.abs(b)) < 1e-12


def test_cf_hkde_is_product_of_legs(ctx, amzn_hkde):
    xi = np.linspace(-50, 50, 101)
    t = 0.7
    prod = cf_heston(xi, t, amzn_hkde.heston, ctx) * cf_kou(xi, t, amzn_hkde.jumps)
    assert np.allclose(cf_model(amzn_hkde, ctx, xi, t), prod, rtol=1e-13)


# ---------------------------------------------------------------------------
# Cumulants
# ---------------------------------------------------------------------------

def test_cumulants_kou_symmetry_kills_odd_orders():
    jumps = KouJumpParams(2.0, 0.5, 7.0, 7.0)
    assert cumulants_kou(jumps, 1.3, 3) == 0.0


def test_cumulants_kou_forced_arithmetic():
    jumps = KouJumpParams(1.0, 1.0, 2.0, 5.0)
    assert cumulants_kou(jumps, 1.0, 2) == pytest.approx(0.5, rel=1e-15)


def test_cumulants_kou_amzn_frozen():
    # frozen from exact Fraction arithmetic on the decimal literals, t = 0.5
    jumps = KouJumpParams(53.165, 0.999, 49.799, 2.587)
    expected = {1: -0.013792351809028705, 2: 0.029360462405612887,
                3: -0.00792190066413553, 4: 0.014347282923025253}
    for n, val in expected.items():
        assert cumulants_kou(jumps, 0.5, n) == pytest.approx(val, rel=1e-13)


def test_cumulants_kou_order_4_vs_high_precision_fd():
    # independent oracle: 4th central difference of the textbook log-CF,
    # evaluated in 40-digit arithmetic so the tiny step carries no roundoff
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    lam, p, eta1, eta2 = (mp.mpf(s) for s in ("53.165", "0.999", "49.799", "2.587"))
    t = mp.mpf("0.5")
    omega = -lam * (p * eta1 / (eta1 - 1) + (1 - p) * eta2 / (eta2 + 1) - 1)

    def log_cf(xi):
        return t * (lam * (p * eta1 / (eta1 - 1j * xi)
                           + (1 - p) * eta2 / (eta2 + 1j * xi) - 1) + omega * 1j * xi)

    h = mp.mpf("1e-5")
    d4 = (log_cf(2 * h) - 4 * log_cf(h) + 6 * log_cf(0) - 4 * log_cf(-h)
          + log_cf(-2 * h)) / h ** 4
    oracle = float(mp.re(d4))
    jumps = KouJumpParams(53.165, 0.999, 49.799, 2.587)
    assert cumulants_kou(jumps, 0.5, 4) == pytest.approx(oracle, rel=1e-6)


def test_cumulants_kou_rejects_bad_order():
    with pytest.raises(ValueError):
        cumulants_kou(KouJumpParams(1.0, 0.5, 2.0, 2.0), 1.0, 5)


def test_cumulants_numeric_matches_kou_closed_form():
    ctx = MarketContext(spot=1.0, rate=0.0, div_yield=0.0)
    rng = np.random.default_rng(7)
    for _ in range(20):
        lam = 10 ** rng.uniform(-1, math.log10(250))
        p = rng.uniform(0, 1)
        eta1 = 10 ** rng.uniform(math.log10(1.01), math.log10(300))
        eta2 = 10 ** rng.uniform(math.log10(0.01), math.log10(300))
        t = rng.uniform(0.05, 2.0)
        jumps = KouJumpParams(lam, p, eta1, eta2)
        model = pure_jump_hkde(jumps)
        for n in (1, 2, 3, 4):
            exact = cumulants_kou(jumps, t, n)
            numeric = cumulants_numeric(model, ctx, t, n)
            assert numeric == pytest.approx(exact, rel=1e-5, abs=1e-13), (jumps, t, n)


def test_cumulants_numeric_variance_positive(ctx):
    for _, _, params in ALL_ROWS:
        assert cumulants_numeric(params, ctx, 1.0, 2) > 0.0


def test_cumulants_numeric_first_carries_forward_drift(ctx):
    # k1 = ln S0 + (r-q)t + jump/diffusion drift corrections
    model = degenerate_hkde(0.2)
    k1 = cumulants_numeric(model, ctx, 1.0, 1)
    expected = math.log(100.0) + 0.05 - 0.5 * 0.04
    assert k1 == pytest.approx(expected, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(lam=st.floats(0.1, 100.0), p=st.floats(0.0, 1.0),
       eta1=st.floats(1.05, 200.0), eta2=st.floats(0.05, 200.0))
def test_cumulants_kou_second_order_nonnegative(lam, p, eta1, eta2):
    assert cumulants_kou(KouJumpParams(lam, p, eta1, eta2), 1.0, 2) >= 0.0


# ---------------------------------------------------------------------------
# JSON schema round trip
# ---------------------------------------------------------------------------

def test_model_json_round_trip():
    for _, _, params in ALL_ROWS:
        doc = model_to_dict(params)
        assert doc["model"] in ("hkde", "heston", "bates", "bgm")
        assert model_from_dict(doc) == params


def test_model_from_dict_rejects_extra_and_missing():
    with pytest.raises(ValueError):
        model_from_dict({"model": "heston",
                         "params": {"v0": 0.04, "theta": 0.04, "kappa": 1.0,
                                    "sigma_v": 0.5, "rho": -0.5, "bogus": 1.0}})
    with pytest.raises(ValueError):
        model_from_dict({"model": "hkde", "params": {"v0": 0.04}})
    with pytest.raises(ValueError):
        model_from_dict({"model": "sabr", "params": {}})
