"""Black-Scholes pricing, the vega weight kernel, and implied-volatility inversion."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from svjd.models import MarketContext

__all__ = ["Quote", "bs_price", "bs_vega", "bs_vega_greek", "implied_vol",
           "no_arbitrage_bounds", "norm_cdf", "norm_pdf"]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# inversion bracket and convergence targets
VOL_LO = 1e-4
VOL_HI = 5.0
MAX_ITER = 200


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def norm_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


@dataclass(frozen=True)
class Quote:
    """One observed option quote; at least one of price / iv must be present."""
    maturity: float
    strike: float
    is_call: bool
    price: Optional[float] = None
    iv: Optional[float] = None

    def __post_init__(self):
        if self.maturity <= 0:
            raise ValueError("maturity must be positive")
        if self.strike <= 0:
            raise ValueError("strike must be positive")
        if self.price is None and self.iv is None:
            raise ValueError("quote needs a price or an implied volatility")


def _d1(ctx: MarketContext, t: float, strike: float, vol: float) -> float:
    return ((math.log(ctx.spot / strike) + t * (ctx.rate - ctx.div_yield + 0.5 * vol * vol))
            / (vol * math.sqrt(t)))


def bs_price(ctx: MarketContext, t: float, strike: float, vol: float, is_call: bool) -> float:
    """Black-Scholes price with continuous rate and dividend yield."""
    if t <= 0:
        raise ValueError("t must be positive")
    if vol <= 0:
        raise ValueError("vol must be positive")
    fwd = ctx.spot * math.exp(-ctx.div_yield * t)
    disc_k = strike * math.exp(-ctx.rate * t)
    d1 = _d1(ctx, t, strike, vol)
    d2 = d1 - vol * math.sqrt(t)
    if is_call:
        return fwd * norm_cdf(d1) - disc_k * norm_cdf(d2)
    return disc_k * norm_cdf(-d2) - fwd * norm_cdf(-d1)


def bs_vega(ctx: MarketContext, t: float, strike: float, vol: float) -> float:
    """Weight kernel S0 * pdf(d1) * sqrt(t) used for vega-weighted calibration.

    Deliberately carries no dividend discounting; see bs_vega_greek for the
    derivative of bs_price with respect to vol.
    """
    if vol <= 0:
        raise ValueError("vol must be positive")
    return ctx.spot * norm_pdf(_d1(ctx, t, strike, vol)) * math.sqrt(t)


def bs_vega_greek(ctx: MarketContext, t: float, strike: float, vol: float) -> float:
    """dPrice/dVol, including the exp(-q t) factor."""
    return math.exp(-ctx.div_yield * t) * bs_vega(ctx, t, strike, vol)


def no_arbitrage_bounds(ctx: MarketContext, t: float, strike: float, is_call: bool) -> tuple[float, float]:
    """(lower, upper) static bounds for a European option price."""
    fwd = ctx.spot * math.exp(-ctx.div_yield * t)
    disc_k = strike * math.exp(-ctx.rate * t)
    if is_call:
        return max(fwd - disc_k, 0.0), fwd
    return max(disc_k - fwd, 0.0), disc_k


def implied_vol(ctx: MarketContext, t: float, strike: float, price: float, is_call: bool) -> float:
    """Invert bs_price: safeguarded Newton on [VOL_LO, VOL_HI] with bisection fallback.

    Raises ValueError for prices outside the static no-arbitrage bounds and
    RuntimeError if MAX_ITER iterations do not reach |price error| < 1e-10 S0.
    """
    lo_bound, hi_bound = no_arbitrage_bounds(ctx, t, strike, is_call)
    if not lo_bound < price < hi_bound:
        raise ValueError(
            f"price {price} outside no-arbitrage bounds ({lo_bound}, {hi_bound})")

    tol = 1e-10 * ctx.spot
    lo, hi = VOL_LO, VOL_HI
    f_lo = bs_price(ctx, t, strike, lo, is_call) - price
    f_hi = bs_price(ctx, t, strike, hi, is_call) - price
    if f_lo > 0:
        return lo  # price below the bracket: vanishing vol
    if f_hi < 0:
        raise ValueError(f"price {price} requires vol above {VOL_HI}")

    sigma = min(max(math.sqrt(2.0 * abs(math.log(ctx.spot / strike)
                                        + (ctx.rate - ctx.div_yield) * t) / t) or 0.2, lo), hi)
    for _ in range(MAX_ITER):
        f = bs_price(ctx, t, strike, sigma, is_call) - price
        if f > 0:
            hi = sigma
        else:
            lo = sigma
        vega = bs_vega_greek(ctx, t, strike, sigma)
        if abs(f) < tol:
            # price converged; require vol-space convergence too, unless vega or
            # the remaining bracket is too small for the price to resolve it
            vol_res = 1e-9 * max(sigma, 1e-2)
            if vega <= 1e-12 or abs(f / vega) < vol_res or hi - lo < vol_res:
                return sigma
        if vega > 1e-14:
            candidate = sigma - f / vega
            if lo < candidate < hi:
                sigma = candidate
                continue
        sigma = 0.5 * (lo + hi)
    raise RuntimeError("implied volatility did not converge")
