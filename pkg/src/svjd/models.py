"""Model parameter sets, characteristic functions and cumulants.

Four risk-neutral models of the log price: Heston stochastic volatility,
Heston + double-exponential jumps (HKDE), Heston + normal jumps (Bates),
and bilateral-gamma motion with a diffusion component (BGM). All transform
machinery works off the characteristic exponent psi(xi, t) = ln E[exp(i xi ln S_t)],
which every model provides in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "HestonParams", "KouJumpParams", "HKDEParams", "BatesParams", "BGMParams",
    "MarketContext", "ModelParams", "omega_kde", "omega_bates", "omega_bgm",
    "cf_heston", "cf_kou", "cf_model", "char_exponent", "cumulants_kou",
    "cumulants_numeric", "frequency_scale", "model_to_dict", "model_from_dict",
    "MODEL_NAMES",
]


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HestonParams:
    """CIR variance process: dV = kappa(theta - V)dt + sigma_v sqrt(V) dW."""
    v0: float
    theta: float
    kappa: float
    sigma_v: float
    rho: float

    def __post_init__(self):
        if self.v0 <= 0 or self.theta <= 0 or self.kappa <= 0 or self.sigma_v <= 0:
            raise ValueError("v0, theta, kappa, sigma_v must be positive")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")


@dataclass(frozen=True)
class KouJumpParams:
    """Compound-Poisson double-exponential jumps in the log price."""
    lam: float
    p: float
    eta1: float
    eta2: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.eta1 <= 1.0:
            # eta1 > 1 keeps E[exp(J)] finite, so the drift compensator exists
            raise ValueError("eta1 must exceed 1")
        if self.eta2 <= 0:
            raise ValueError("eta2 must be positive")


@dataclass(frozen=True)
class HKDEParams:
    heston: HestonParams
    jumps: KouJumpParams


@dataclass(frozen=True)
class BatesParams:
    """Heston variance plus normally distributed log-price jumps."""
    heston: HestonParams
    lam: float
    mu_j: float
    sigma_j: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.sigma_j <= 0:
            raise ValueError("sigma_j must be positive")


@dataclass(frozen=True)
class BGMParams:
    """Bilateral gamma motion plus an independent Brownian component."""
    alpha_p: float
    lam_p: float
    alpha_m: float
    lam_m: float
    sigma: float

    def __post_init__(self):
        if min(self.alpha_p, self.lam_p, self.alpha_m, self.lam_m, self.sigma) <= 0:
            raise ValueError("all BGM parameters must be positive")
        if self.lam_p <= 1.0:
            # lam_p > 1 keeps E[exp(X)] finite for the martingale drift
            raise ValueError("lam_p must exceed 1")


ModelParams = Union[HKDEParams, HestonParams, BatesParams, BGMParams]


@dataclass(frozen=True)
class MarketContext:
    """Spot plus flat continuously-compounded rate and dividend yield."""
    spot: float
    rate: float = 0.0
    div_yield: float = 0.0

    def __post_init__(self):
        if self.spot <= 0:
            raise ValueError("spot must be positive")

    def forward(self, t: float) -> float:
        return self.spot * math.exp((self.rate - self.div_yield) * t)


# ---------------------------------------------------------------------------
# Drift compensators (make exp(-(r-q)t) S_t a martingale)
# ---------------------------------------------------------------------------

def omega_kde(jumps: KouJumpParams) -> float:
    """Jump drift compensator -lam*(p*eta1/(eta1-1) + (1-p)*eta2/(eta2+1) - 1)."""
    return -jumps.lam * (jumps.p / (jumps.eta1 - 1.0) - (1.0 - jumps.p) / (jumps.eta2 + 1.0))


def omega_bates(lam: float, mu_j: float, sigma_j: float) -> float:
    return -lam * math.expm1(mu_j + 0.5 * sigma_j * sigma_j)


def omega_bgm(params: BGMParams) -> float:
    return (-0.5 * params.sigma**2
            - params.alpha_p * math.log(params.lam_p / (params.lam_p - 1.0))
            - params.alpha_m * math.log(params.lam_m / (params.lam_m + 1.0)))


# ---------------------------------------------------------------------------
# Characteristic exponents
# ---------------------------------------------------------------------------

def _clog1p(z: np.ndarray) -> np.ndarray:
    """log(1+z) for complex z without cancellation near z = 0."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    return 0.5 * np.log1p(2.0 * x + x * x + y * y) + 1j * np.arctan2(y, 1.0 + x)


def _heston_exponent(xi, t: float, p: HestonParams, ctx: MarketContext):
    """ln phi_Hes in the branch-stable (ratio / "little trap") parameterization.

    beta - d is formed as -sigma_v^2(i xi + xi^2)/(beta + d) to avoid the
    cancellation that otherwise pollutes cumulant finite differences.
    """
    xi = np.asarray(xi, dtype=complex)
    sv2 = p.sigma_v * p.sigma_v
    beta = p.kappa - 1j * xi * p.sigma_v * p.rho
    lin = 1j * xi + xi * xi
    d = np.sqrt(beta * beta + sv2 * lin)
    bmd = -sv2 * lin / (beta + d)
    g = bmd / (beta + d)
    edt = np.exp(-d * t)
    log_term = _clog1p(-g * edt) - _clog1p(-g)
    a = p.kappa * p.theta / sv2 * (bmd * t - 2.0 * log_term)
    b = bmd / sv2 * (1.0 - edt) / (1.0 - g * edt)
    return 1j * xi * (math.log(ctx.spot) + (ctx.rate - ctx.div_yield) * t) + a + b * p.v0


def _kou_exponent(xi, t: float, j: KouJumpParams):
    """ln phi_Kou = t(lam(p eta1/(eta1 - i xi) + (1-p) eta2/(eta2 + i xi) - 1) + i xi omega).

    Written as t lam i xi [p/(eta1 - i xi) - (1-p)/(eta2 + i xi) + omega/lam]
    so tiny values near xi = 0 are built from same-order terms only.
    """
    xi = np.asarray(xi, dtype=complex)
    ix = 1j * xi
    bracket = (j.p / (j.eta1 - ix) - (1.0 - j.p) / (j.eta2 + ix)
               - (j.p / (j.eta1 - 1.0) - (1.0 - j.p) / (j.eta2 + 1.0)))
    return t * j.lam * ix * bracket


def _bates_jump_exponent(xi, t: float, lam: float, mu_j: float, sigma_j: float):
    xi = np.asarray(xi, dtype=complex)
    jump_cf = np.exp(1j * xi * mu_j - 0.5 * sigma_j * sigma_j * xi * xi)
    return t * (lam * (jump_cf - 1.0) + 1j * xi * omega_bates(lam, mu_j, sigma_j))


def _bgm_exponent(xi, t: float, p: BGMParams, ctx: MarketContext):
    xi = np.asarray(xi, dtype=complex)
    ix = 1j * xi
    psi = (-0.5 * p.sigma**2 * xi * xi
           + p.alpha_p * (np.log(p.lam_p) - np.log(p.lam_p - ix))
           + p.alpha_m * (np.log(p.lam_m) - np.log(p.lam_m + ix))
           + ix * omega_bgm(p))
    return ix * (math.log(ctx.spot) + (ctx.rate - ctx.div_yield) * t) + t * psi


def char_exponent(model: ModelParams, ctx: MarketContext, xi, t: float):
    """ln E[exp(i xi ln S_t)] for any supported model; accepts complex xi."""
    if isinstance(model, HestonParams):
        return _heston_exponent(xi, t, model, ctx)
    if isinstance(model, HKDEParams):
        return _heston_exponent(xi, t, model.heston, ctx) + _kou_exponent(xi, t, model.jumps)
    if isinstance(model, BatesParams):
        return (_heston_exponent(xi, t, model.heston, ctx)
                + _bates_jump_exponent(xi, t, model.lam, model.mu_j, model.sigma_j))
    if isinstance(model, BGMParams):
        return _bgm_exponent(xi, t, model, ctx)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def cf_heston(xi, t: float, params: HestonParams, ctx: MarketContext):
    """Heston characteristic function of ln S_t."""
    if t <= 0:
        raise ValueError("t must be positive")
    return np.exp(_heston_exponent(xi, t, params, ctx))


def cf_kou(xi, t: float, jumps: KouJumpParams):
    """Characteristic function of the compensated double-exponential jump component."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return np.exp(_kou_exponent(xi, t, jumps))


def cf_model(model: ModelParams, ctx: MarketContext, xi, t: float):
    """Characteristic function E[exp(i xi ln S_t)] of the full model."""
    return np.exp(char_exponent(model, ctx, xi, t))


# ---------------------------------------------------------------------------
# Cumulants
# ---------------------------------------------------------------------------

def cumulants_kou(jumps: KouJumpParams, t: float, n: int) -> float:
    """Closed-form cumulant of the compensated jump component, orders 1..4."""
    if n not in (1, 2, 3, 4):
        raise ValueError("cumulant order must be 1..4")
    if t < 0:
        raise ValueError("t must be nonnegative")
    j = jumps
    if n == 1:
        return t * (j.lam * (j.p / j.eta1 - (1.0 - j.p) / j.eta2) + omega_kde(j))
    return math.factorial(n) * t * j.lam * (j.p / j.eta1**n + (-1) ** n * (1.0 - j.p) / j.eta2**n)


def frequency_scale(model: ModelParams) -> float:
    """Scale (in xi) over which the characteristic exponent varies; sets FD steps.

    Jump sides carrying zero weight do not contribute structure and are ignored.
    """
    if isinstance(model, HestonParams):
        return 1.0
    if isinstance(model, HKDEParams):
        j = model.jumps
        scales = [1.0]
        if j.lam > 0 and j.p > 0:
            scales.append(j.eta1)
        if j.lam > 0 and j.p < 1:
            scales.append(j.eta2)
        return min(scales)
    if isinstance(model, BatesParams):
        if model.lam > 0:
            return min(1.0, 1.0 / (abs(model.mu_j) + model.sigma_j))
        return 1.0
    if isinstance(model, BGMParams):
        return min(1.0, model.lam_p, model.lam_m)
    raise TypeError(f"unsupported model type {type(model).__name__}")


# Central O(h^2) stencils for psi-derivatives; psi(0) = 0 is used implicitly.
_FD_NODES = {1: (1.0, -1.0), 2: (1.0, -1.0), 3: (2.0, 1.0, -1.0, -2.0), 4: (2.0, 1.0, -1.0, -2.0)}
_FD_WEIGHTS = {1: (0.5, -0.5), 2: (1.0, 1.0), 3: (0.5, -1.0, 1.0, -0.5), 4: (1.0, -4.0, -4.0, 1.0)}


def _fd_derivative(psi, n: int, scale: float, shrink: float = 1.2, nlev: int = 36):
    """n-th derivative of psi at 0 from a ladder of central differences.

    One Richardson refinement per ladder rung; the returned value is the rung
    whose refined estimates agree best over three consecutive levels, scanning
    from the largest step and stopping once the agreement deteriorates (which
    marks the onset of roundoff noise).
    """
    hs = 0.5 * scale / shrink ** np.arange(nlev)
    nodes = np.asarray(_FD_NODES[n])
    weights = np.asarray(_FD_WEIGHTS[n])
    vals = psi((hs[:, None] * nodes[None, :]).ravel()).reshape(nlev, nodes.size)
    d = (vals * weights[None, :]).sum(axis=1) / hs**n
    s2 = shrink * shrink
    r = (s2 * d[1:] - d[:-1]) / (s2 - 1.0)
    err = np.maximum(np.abs(r[:-2] - r[1:-1]), np.abs(r[1:-1] - r[2:]))
    best_i, best_err, grew = 0, np.inf, 0
    for i, e in enumerate(err):
        if e <= best_err:
            best_i, best_err, grew = i, e, 0
        elif e > 10.0 * best_err:
            grew += 1
            if grew >= 3:
                break
    return r[best_i + 1]


def cumulants_numeric(model: ModelParams, ctx: MarketContext, t: float, n: int) -> float:
    """n-th cumulant of ln S_t from finite differences of the characteristic exponent."""
    if n not in (1, 2, 3, 4):
        raise ValueError("cumulant order must be 1..4")
    # The deterministic i xi (ln S0 + (r-q)t) term is differentiated analytically;
    # the FD only sees the slowly varying stochastic part.
    shift = math.log(ctx.spot) + (ctx.rate - ctx.div_yield) * t

    def psi(xi):
        return char_exponent(model, ctx, xi, t) - 1j * np.asarray(xi, dtype=complex) * shift

    deriv = _fd_derivative(psi, n, frequency_scale(model))
    cum = (deriv / 1j**n).real
    if n == 1:
        cum += shift
    return float(cum)


# ---------------------------------------------------------------------------
# JSON parameter schema
# ---------------------------------------------------------------------------

MODEL_NAMES = ("hkde", "heston", "bates", "bgm")

_HESTON_FIELDS = ("v0", "theta", "kappa", "sigma_v", "rho")


def model_to_dict(model: ModelParams) -> dict:
    """Serialize to {"model": name, "params": {flat field: value}}."""
    if isinstance(model, HestonParams):
        return {"model": "heston", "params": {f: getattr(model, f) for f in _HESTON_FIELDS}}
    if isinstance(model, HKDEParams):
        params = {f: getattr(model.heston, f) for f in _HESTON_FIELDS}
        params.update(lam=model.jumps.lam, p=model.jumps.p,
                      eta1=model.jumps.eta1, eta2=model.jumps.eta2)
        return {"model": "hkde", "params": params}
    if isinstance(model, BatesParams):
        params = {f: getattr(model.heston, f) for f in _HESTON_FIELDS}
        params.update(lam=model.lam, mu_j=model.mu_j, sigma_j=model.sigma_j)
        return {"model": "bates", "params": params}
    if isinstance(model, BGMParams):
        return {"model": "bgm", "params": {
            "alpha_p": model.alpha_p, "lam_p": model.lam_p,
            "alpha_m": model.alpha_m, "lam_m": model.lam_m, "sigma": model.sigma}}
    raise TypeError(f"unsupported model type {type(model).__name__}")


def model_from_dict(doc: dict) -> ModelParams:
    """Inverse of model_to_dict; validates field names and invariants."""
    try:
        kind = doc["model"]
        params = dict(doc["params"])
    except (KeyError, TypeError) as exc:
        raise ValueError("parameter document needs 'model' and 'params' entries") from exc

    def take(*names):
        missing = [f for f in names if f not in params]
        if missing:
            raise ValueError(f"{kind}: missing parameter(s) {', '.join(missing)}")
        vals = [float(params.pop(f)) for f in names]
        if params:
            raise ValueError(f"{kind}: unexpected parameter(s) {', '.join(sorted(params))}")
        return vals

    if kind == "heston":
        return HestonParams(*take(*_HESTON_FIELDS))
    if kind == "hkde":
        *h, lam, p, eta1, eta2 = take(*_HESTON_FIELDS, "lam", "p", "eta1", "eta2")
        return HKDEParams(HestonParams(*h), KouJumpParams(lam, p, eta1, eta2))
    if kind == "bates":
        *h, lam, mu_j, sigma_j = take(*_HESTON_FIELDS, "lam", "mu_j", "sigma_j")
        return BatesParams(HestonParams(*h), lam, mu_j, sigma_j)
    if kind == "bgm":
        return BGMParams(*take("alpha_p", "lam_p", "alpha_m", "lam_m", "sigma"))
    raise ValueError(f"unknown model '{kind}'; expected one of {', '.join(MODEL_NAMES)}")
