"""Vega-weighted least-squares calibration of a model to an OTM quote surface.

The objective is sum over maturities and strikes of w (V_model - v_mkt)^2 with
w = 1/(S0 pdf(d1) sqrt(T)) evaluated at each quote's market implied volatility,
which makes price residuals behave like implied-volatility residuals. A
trust-region-reflective solver is run through a schedule of tightening cost
tolerances, warm-starting each pass at the previous solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from svjd.black_scholes import Quote, bs_price, bs_vega, implied_vol, no_arbitrage_bounds
from svjd.models import (
    BGMParams,
    BatesParams,
    HestonParams,
    HKDEParams,
    KouJumpParams,
    MarketContext,
    ModelParams,
)
from svjd.proj import GridSpec, price_strike_slice

__all__ = ["MaturitySlice", "QuoteSurface", "CalibrationResult", "ErrorMetrics",
           "objective", "residuals", "calibrate", "error_metrics", "synthetic_surface",
           "default_bounds", "default_init", "PRICING_PENALTY"]

PRICING_PENALTY = 1e10          # objective value substituted when pricing fails
DEFAULT_SCHEDULE = (1e-4, 1e-6, 1e-8)


@dataclass
class MaturitySlice:
    """All OTM quotes of one tenor with its own rate and dividend yield."""
    t: float
    ctx: MarketContext
    quotes: list

    def __post_init__(self):
        if len(self.quotes) < 3:
            raise ValueError(f"maturity {self.t}: needs at least 3 quotes")
        strikes = [q.strike for q in self.quotes]
        if any(k2 <= k1 for k1, k2 in zip(strikes, strikes[1:])):
            raise ValueError(f"maturity {self.t}: strikes must be strictly ascending")


@dataclass
class QuoteSurface:
    """OTM quote surface grouped by maturity; construction fills prices, IVs, weights."""
    spot: float
    slices: list
    n_dropped_itm: int = 0

    def __post_init__(self):
        ts = [s.t for s in self.slices]
        if not ts or any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
            raise ValueError("maturities must be strictly ascending and nonempty")

    @classmethod
    def build(cls, spot: float, rows: Sequence[tuple]) -> "QuoteSurface":
        """rows: (maturity, rate, div_yield, Quote). ITM quotes are dropped; the
        call/put pivot is the forward. Missing prices come from IVs and missing
        IVs from prices."""
        by_t: dict = {}
        n_dropped = 0
        for t, rate, div_yield, quote in rows:
            ctx = MarketContext(spot=spot, rate=rate, div_yield=div_yield)
            fwd = ctx.forward(t)
            if quote.is_call != (quote.strike >= fwd):
                n_dropped += 1
                continue
            price, iv = quote.price, quote.iv
            if price is None:
                price = bs_price(ctx, t, quote.strike, iv, quote.is_call)
            if iv is None:
                iv = implied_vol(ctx, t, quote.strike, price, quote.is_call)
            filled = Quote(maturity=t, strike=quote.strike, is_call=quote.is_call,
                           price=price, iv=iv)
            key = round(t, 12)
            if key in by_t and (by_t[key][0] != rate or by_t[key][1] != div_yield):
                raise ValueError(f"maturity {t}: inconsistent rate or dividend yield")
            by_t.setdefault(key, (rate, div_yield, []))[2].append(filled)
        slices = []
        for key in sorted(by_t):
            rate, div_yield, quotes = by_t[key]
            quotes.sort(key=lambda q: q.strike)
            slices.append(MaturitySlice(
                t=float(key), ctx=MarketContext(spot=spot, rate=rate, div_yield=div_yield),
                quotes=quotes))
        return cls(spot=spot, slices=slices, n_dropped_itm=n_dropped)

    def weights(self) -> list:
        """Per-slice vega weights 1/(S0 pdf(d1) sqrt(T)) at market IVs."""
        out = []
        for sl in self.slices:
            out.append(np.array([1.0 / bs_vega(sl.ctx, sl.t, q.strike, q.iv)
                                 for q in sl.quotes]))
        return out

    @property
    def n_quotes(self) -> int:
        return sum(len(sl.quotes) for sl in self.slices)


@dataclass(frozen=True)
class ErrorMetrics:
    mape_pct: float
    rmse: float
    n_excluded: int = 0


@dataclass
class CalibrationResult:
    params: ModelParams
    objective: float
    per_quote_residuals: np.ndarray
    mape_pct: float
    rmse: float
    iterations: int
    trace: list
    stagnated: bool = False


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------

def residuals(model: ModelParams, surface: QuoteSurface, weights=None,
              grid_spec: GridSpec = GridSpec()) -> np.ndarray:
    """sqrt(w) (V_model - v_mkt) over the whole surface, one slice pricing per tenor."""
    if weights is None:
        weights = surface.weights()
    parts = []
    for sl, w in zip(surface.slices, weights):
        strikes = [q.strike for q in sl.quotes]
        flags = [q.is_call for q in sl.quotes]
        model_prices = price_strike_slice(model, sl.ctx, sl.t, strikes, flags, grid_spec)
        mkt = np.array([q.price for q in sl.quotes])
        parts.append(np.sqrt(w) * (model_prices - mkt))
    return np.concatenate(parts)


def objective(model: ModelParams, surface: QuoteSurface,
              grid_spec: GridSpec = GridSpec()) -> float:
    """Vega-weighted sum of squared price residuals."""
    try:
        r = residuals(model, surface, grid_spec=grid_spec)
    except (ValueError, FloatingPointError, OverflowError):
        return PRICING_PENALTY
    val = float(r @ r)
    return val if math.isfinite(val) else PRICING_PENALTY


# ---------------------------------------------------------------------------
# Parameter vector packing
# ---------------------------------------------------------------------------

_PACKERS = {
    "heston": (
        ("v0", "theta", "kappa", "sigma_v", "rho"),
        lambda x: HestonParams(*x),
        lambda m: [m.v0, m.theta, m.kappa, m.sigma_v, m.rho],
    ),
    "hkde": (
        ("v0", "theta", "kappa", "sigma_v", "rho", "lam", "p", "eta1", "eta2"),
        lambda x: HKDEParams(HestonParams(*x[:5]), KouJumpParams(*x[5:])),
        lambda m: [m.heston.v0, m.heston.theta, m.heston.kappa, m.heston.sigma_v,
                   m.heston.rho, m.jumps.lam, m.jumps.p, m.jumps.eta1, m.jumps.eta2],
    ),
    "bates": (
        ("v0", "theta", "kappa", "sigma_v", "rho", "lam", "mu_j", "sigma_j"),
        lambda x: BatesParams(HestonParams(*x[:5]), *x[5:]),
        lambda m: [m.heston.v0, m.heston.theta, m.heston.kappa, m.heston.sigma_v,
                   m.heston.rho, m.lam, m.mu_j, m.sigma_j],
    ),
    "bgm": (
        ("alpha_p", "lam_p", "alpha_m", "lam_m", "sigma"),
        lambda x: BGMParams(*x),
        lambda m: [m.alpha_p, m.lam_p, m.alpha_m, m.lam_m, m.sigma],
    ),
}

_FIELD_BOUNDS = {
    "v0": (1e-6, 4.0), "theta": (1e-6, 4.0), "kappa": (1e-3, 100.0),
    "sigma_v": (1e-3, 12.0), "rho": (-0.999, 0.999),
    "lam": (0.0, 250.0), "p": (0.0, 1.0), "eta1": (1.01, 300.0), "eta2": (0.01, 300.0),
    "mu_j": (-50.0, 5.0), "sigma_j": (1e-3, 12.0),
    "alpha_p": (1e-4, 100.0), "alpha_m": (1e-4, 100.0),
    "lam_p": (1.01, 500.0), "lam_m": (0.01, 500.0), "sigma": (1e-4, 3.0),
}


def default_bounds(model_kind: str) -> tuple[np.ndarray, np.ndarray]:
    names = _PACKERS[model_kind][0]
    lo = np.array([_FIELD_BOUNDS[f][0] for f in names])
    hi = np.array([_FIELD_BOUNDS[f][1] for f in names])
    return lo, hi


def _atm_iv(surface: QuoteSurface, sl: MaturitySlice) -> float:
    fwd = sl.ctx.forward(sl.t)
    return min(sl.quotes, key=lambda q: abs(q.strike - fwd)).iv


def default_init(model_kind: str, surface: QuoteSurface) -> ModelParams:
    """Smile-informed seed: short/long ATM variance levels plus neutral jump settings."""
    v_short = _atm_iv(surface, surface.slices[0]) ** 2
    v_long = _atm_iv(surface, surface.slices[-1]) ** 2
    heston = [v_short, v_long, 3.0, 1.0, -0.5]
    if model_kind == "heston":
        x = heston
    elif model_kind == "hkde":
        x = heston + [1.0, 0.5, 20.0, 20.0]
    elif model_kind == "bates":
        x = heston + [1.0, -0.1, 0.3]
    elif model_kind == "bgm":
        x = [1.0, 15.0, 1.0, 15.0, max(math.sqrt(v_short), 0.05)]
    else:
        raise ValueError(f"unknown model kind '{model_kind}'")
    lo, hi = default_bounds(model_kind)
    return _PACKERS[model_kind][1](np.clip(x, lo, hi))


# ---------------------------------------------------------------------------
# Calibration driver
# ---------------------------------------------------------------------------

def calibrate(model_kind: str, surface: QuoteSurface, init: Optional[ModelParams] = None,
              bounds: Optional[tuple] = None, schedule: Sequence[float] = DEFAULT_SCHEDULE,
              grid_spec: GridSpec = GridSpec()) -> CalibrationResult:
    """Bound-constrained least squares run once per tolerance, warm-started.

    Each pass terminates on the relative change of the cost function (ftol);
    the Jacobian uses forward differences with relative step 1e-6.
    """
    if model_kind not in _PACKERS:
        raise ValueError(f"unknown model kind '{model_kind}'")
    names, unpack, pack = _PACKERS[model_kind]
    lo, hi = bounds if bounds is not None else default_bounds(model_kind)
    if init is None:
        init = default_init(model_kind, surface)
    x0 = np.clip(np.asarray(pack(init), dtype=float), lo, hi)
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError("initial guess violates bounds")

    weights = surface.weights()
    n_res = surface.n_quotes
    penalty_vec = np.full(n_res, math.sqrt(PRICING_PENALTY / n_res))

    def fun(x):
        try:
            r = residuals(unpack(x), surface, weights=weights, grid_spec=grid_spec)
        except (ValueError, FloatingPointError, OverflowError):
            return penalty_vec
        return np.where(np.isfinite(r), r, penalty_vec)

    x = x0
    trace = [float(fun(x) @ fun(x))]
    n_iter = 0
    stagnated = False
    for tol in schedule:
        # ftol (relative cost change) is the operative criterion; the tiny gtol
        # only catches exactly stationary starts where ftol can never fire.
        # errstate silences scipy's internal divide-by-zero chatter at zero cost.
        with np.errstate(divide="ignore", invalid="ignore"):
            res = least_squares(fun, x, bounds=(lo, hi), method="trf",
                                diff_step=1e-6, ftol=tol, xtol=None, gtol=1e-14)
        x = res.x
        n_iter += res.nfev
        trace.append(2.0 * float(res.cost))   # scipy cost is half the SSE
        if res.status == 0:
            stagnated = True

    final = unpack(x)
    r = fun(x)
    metrics = error_metrics(final, surface, grid_spec=grid_spec)
    return CalibrationResult(params=final, objective=float(r @ r),
                             per_quote_residuals=r, mape_pct=metrics.mape_pct,
                             rmse=metrics.rmse, iterations=n_iter, trace=trace,
                             stagnated=stagnated)


def error_metrics(model: ModelParams, surface: QuoteSurface,
                  grid_spec: GridSpec = GridSpec()) -> ErrorMetrics:
    """Surface-wide IV errors: MAPE in percent, RMSE in absolute IV units.

    Quotes whose model price cannot be inverted are excluded and counted.
    """
    abs_pct, sq = [], []
    n_excluded = 0
    for sl in surface.slices:
        strikes = [q.strike for q in sl.quotes]
        flags = [q.is_call for q in sl.quotes]
        model_prices = price_strike_slice(model, sl.ctx, sl.t, strikes, flags, grid_spec)
        for q, v in zip(sl.quotes, model_prices):
            lo_b, hi_b = no_arbitrage_bounds(sl.ctx, sl.t, q.strike, q.is_call)
            if not lo_b < v < hi_b:
                n_excluded += 1
                continue
            try:
                iv_model = implied_vol(sl.ctx, sl.t, q.strike, float(v), q.is_call)
            except (ValueError, RuntimeError):
                n_excluded += 1
                continue
            abs_pct.append(abs(iv_model - q.iv) / q.iv)
            sq.append((iv_model - q.iv) ** 2)
    if not abs_pct:
        raise ValueError("no quote could be inverted to an implied volatility")
    return ErrorMetrics(mape_pct=100.0 * float(np.mean(abs_pct)),
                        rmse=float(np.sqrt(np.mean(sq))), n_excluded=n_excluded)


# ---------------------------------------------------------------------------
# Synthetic surfaces (round-trip calibration and CLI support)
# ---------------------------------------------------------------------------

def synthetic_surface(model: ModelParams, spot: float, rate: float, div_yield: float,
                      maturities: Sequence[float], log_moneyness: Sequence[float],
                      grid_spec: GridSpec = GridSpec()) -> QuoteSurface:
    """Noiseless OTM surface priced from a model: puts below the forward, calls above."""
    rows = []
    ctx_all = []
    for t in maturities:
        ctx = MarketContext(spot=spot, rate=rate, div_yield=div_yield)
        fwd = ctx.forward(t)
        strikes = [fwd * math.exp(m) for m in sorted(log_moneyness)]
        flags = [k >= fwd for k in strikes]
        prices = price_strike_slice(model, ctx, t, strikes, flags, grid_spec)
        for k, flag, price in zip(strikes, flags, prices):
            iv = implied_vol(ctx, t, k, float(price), flag)
            rows.append((t, rate, div_yield,
                         Quote(maturity=t, strike=k, is_call=flag, price=float(price), iv=iv)))
        ctx_all.append(ctx)
    return QuoteSurface.build(spot, rows)
