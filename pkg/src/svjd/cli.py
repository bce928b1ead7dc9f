"""Command-line interface: quote ingestion, calibration, pricing and CSV emission.

Subcommands: calibrate, price, smile, mc-compare, synth. All file outputs are
plot-ready CSV or JSON carrying the full input configuration; numeric CSV
fields use 17 significant digits so values round-trip exactly.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time

import numpy as np

from svjd.black_scholes import Quote, bs_price, implied_vol, no_arbitrage_bounds
from svjd.calibration import QuoteSurface, calibrate, synthetic_surface
from svjd.models import MarketContext, ModelParams, model_from_dict, model_to_dict
from svjd.montecarlo import (
    EXOTIC_KINDS,
    ExoticSpec,
    MonitoringSchedule,
    SimConfig,
    price_exotic,
    price_european_mc,
)
from svjd.proj import GridSpec, price_european, price_strike_slice

QUOTE_HEADER = ["maturity_yrs", "strike", "option_type", "mid_price", "iv",
                "rate", "div_yield", "spot"]

_FMT = "%.17g"


def _fmt(x: float) -> str:
    return _FMT % float(x)


# ---------------------------------------------------------------------------
# Quote file I/O
# ---------------------------------------------------------------------------

def load_quotes(path: str) -> QuoteSurface:
    """Parse and validate a quote CSV; arbitrage-violating rows are reported
    on stderr with their line numbers and skipped."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if [h.strip() for h in header] != QUOTE_HEADER:
            raise ValueError(f"{path}: header must be {','.join(QUOTE_HEADER)}")
        rows = []
        spot = None
        rejected = []
        for line_no, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(QUOTE_HEADER):
                raise ValueError(f"{path}:{line_no}: expected {len(QUOTE_HEADER)} fields")
            t = float(rec[0])
            strike = float(rec[1])
            opt = rec[2].strip().upper()
            if opt not in ("C", "P"):
                raise ValueError(f"{path}:{line_no}: option_type must be C or P")
            price = float(rec[3]) if rec[3].strip() else None
            iv = float(rec[4]) if rec[4].strip() else None
            rate = float(rec[5])
            div_yield = float(rec[6])
            row_spot = float(rec[7])
            if spot is None:
                spot = row_spot
            elif row_spot != spot:
                raise ValueError(f"{path}:{line_no}: spot differs from earlier rows")
            ctx = MarketContext(spot=spot, rate=rate, div_yield=div_yield)
            is_call = opt == "C"
            if price is not None and iv is not None:
                recomputed = bs_price(ctx, t, strike, iv, is_call)
                if abs(recomputed - price) > 0.01 * max(price, 1e-12):
                    print(f"warning: {path}:{line_no}: price {price} and iv {iv} disagree "
                          f"by more than 1% (iv implies {recomputed:.6g}); using price",
                          file=sys.stderr)
                iv = None   # price takes precedence
            check_price = price if price is not None else bs_price(ctx, t, strike, iv, is_call)
            lo, hi = no_arbitrage_bounds(ctx, t, strike, is_call)
            if not lo < check_price < hi:
                rejected.append((line_no, f"price {check_price:.6g} outside bounds ({lo:.6g}, {hi:.6g})"))
                continue
            rows.append((t, rate, div_yield,
                         Quote(maturity=t, strike=strike, is_call=is_call, price=price, iv=iv)))
    for line_no, reason in rejected:
        print(f"warning: {path}:{line_no}: rejected, {reason}", file=sys.stderr)
    if not rows:
        raise ValueError(f"{path}: no usable quotes")
    return QuoteSurface.build(spot, rows)


def write_quotes(path: str, surface: QuoteSurface) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(QUOTE_HEADER)
        for sl in surface.slices:
            for q in sl.quotes:
                writer.writerow([
                    _fmt(sl.t), _fmt(q.strike), "C" if q.is_call else "P",
                    _fmt(q.price), _fmt(q.iv), _fmt(sl.ctx.rate),
                    _fmt(sl.ctx.div_yield), _fmt(surface.spot)])


# ---------------------------------------------------------------------------
# Shared loaders
# ---------------------------------------------------------------------------

def _load_params(path: str) -> ModelParams:
    with open(path) as fh:
        doc = json.load(fh)
    if "model" not in doc and isinstance(doc.get("params"), dict):
        doc = doc["params"]   # accept a calibrate output file directly
    return model_from_dict(doc)


def _load_contract(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("kind", "maturity", "spot", "rate"):
        if key not in doc:
            raise ValueError(f"contract file needs '{key}'")
    return doc


def _contract_ctx(doc: dict) -> MarketContext:
    return MarketContext(spot=float(doc["spot"]), rate=float(doc["rate"]),
                         div_yield=float(doc.get("div_yield", 0.0)))


def _contract_exotic(doc: dict) -> ExoticSpec:
    schedule = MonitoringSchedule.uniform(
        float(doc["maturity"]), int(doc.get("monitoring", 1)),
        spacing=doc.get("spacing", "span"))
    return ExoticSpec(
        kind=doc["kind"], schedule=schedule, strike=float(doc.get("strike", 0.0)),
        is_call=bool(doc.get("is_call", True)),
        cap=doc.get("cap"), floor=doc.get("floor"),
        global_cap=doc.get("global_cap"), global_floor=doc.get("global_floor"),
        barrier_up=doc.get("barrier_up"), barrier_down=doc.get("barrier_down"))


def _bump_model(model: ModelParams, bump: str) -> ModelParams:
    """Apply 'name=factor' or 'name=+NN%' to one parameter field."""
    name, _, spec = bump.partition("=")
    if not spec:
        raise ValueError("--bump must look like name=factor or name=+NN%")
    spec = spec.strip()
    factor = 1.0 + float(spec[:-1]) / 100.0 if spec.endswith("%") else float(spec)
    doc = model_to_dict(model)
    if name not in doc["params"]:
        raise ValueError(f"model has no parameter '{name}'")
    doc["params"][name] *= factor
    return model_from_dict(doc)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_calibrate(args) -> int:
    surface = load_quotes(args.quotes)
    schedule = tuple(float(s) for s in args.tol_schedule.split(","))
    init = _load_params(args.init) if args.init else None
    spec = GridSpec(n=args.n, l1=args.l1)
    result = calibrate(args.model, surface, init=init, schedule=schedule, grid_spec=spec)
    out = {
        "inputs": {"command": "calibrate", "model": args.model, "quotes": args.quotes,
                   "tol_schedule": list(schedule), "n": args.n, "l1": args.l1,
                   "init": args.init},
        "params": model_to_dict(result.params),
        "metrics": {"objective": result.objective, "mape_pct": result.mape_pct,
                    "rmse": result.rmse, "iterations": result.iterations,
                    "trace": result.trace, "stagnated": result.stagnated,
                    "n_quotes": surface.n_quotes},
    }
    with open(args.out, "w") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    print(f"calibrated {args.model}: objective {result.objective:.6e} "
          f"mape {result.mape_pct:.4f}% rmse {result.rmse:.6f} -> {args.out}")
    return 0


def _price_contract(model, doc, args):
    ctx = _contract_ctx(doc)
    kind = doc["kind"]
    t = float(doc["maturity"])
    if kind in ("european_call", "european_put"):
        spec = GridSpec(n=args.n, l1=args.l1)
        value = price_european(model, ctx, t, float(doc["strike"]),
                               kind == "european_call", spec)
        return {"price": value, "method": "proj"}
    if kind in EXOTIC_KINDS:
        config = SimConfig(n_paths=args.paths, seed=args.seed,
                           steps_per_interval=args.steps_per_interval,
                           antithetic=not args.no_antithetic)
        est = price_exotic(model, ctx, _contract_exotic(doc), config)
        return {"price": est.price, "std_err": est.std_err,
                "ci95_half_width": est.ci95_half_width, "n_paths": est.n_paths,
                "method": "mc"}
    raise ValueError(f"unknown contract kind '{kind}'")


def cmd_price(args) -> int:
    model = _load_params(args.params)
    doc = _load_contract(args.contract)
    result = _price_contract(model, doc, args)
    out = {"inputs": {"command": "price", "params": args.params, "contract": doc,
                      "paths": args.paths, "seed": args.seed,
                      "steps_per_interval": args.steps_per_interval,
                      "antithetic": not args.no_antithetic},
           **result}
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_smile(args) -> int:
    model = _load_params(args.params)
    ctx = MarketContext(spot=args.spot, rate=args.rate, div_yield=args.div_yield)
    lo, hi, step = (float(v) for v in args.strikes.split(":"))
    if step <= 0 or hi < lo:
        raise ValueError("--strikes must be LO:HI:STEP with positive STEP")
    strikes = np.arange(lo, hi + 0.5 * step, step)
    spec = GridSpec(n=args.n, l1=args.l1)
    models = [("iv", model)]
    if args.bump:
        models.append(("iv_bumped", _bump_model(model, args.bump)))

    curves = []
    for _, m in models:
        flags = [k >= ctx.forward(args.maturity) for k in strikes]
        prices = price_strike_slice(m, ctx, args.maturity, strikes, flags, spec)
        curves.append([implied_vol(ctx, args.maturity, float(k), float(v), flag)
                       for k, v, flag in zip(strikes, prices, flags)])

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["log_moneyness"] + [name for name, _ in models])
        for i, k in enumerate(strikes):
            writer.writerow([_fmt(math.log(k / ctx.spot))] + [_fmt(c[i]) for c in curves])
    print(f"smile with {len(strikes)} strikes at T={args.maturity} -> {args.out}")
    return 0


def cmd_mc_compare(args) -> int:
    model = _load_params(args.params)
    doc = _load_contract(args.contract)
    ctx = _contract_ctx(doc)
    kind = doc["kind"]
    t = float(doc["maturity"])
    config = SimConfig(n_paths=args.paths, seed=args.seed,
                       steps_per_interval=args.steps_per_interval,
                       antithetic=not args.no_antithetic)

    if kind in ("european_call", "european_put"):
        spec = GridSpec(n=args.n, l1=args.l1)
        t0 = time.perf_counter()
        proj_value = price_european(model, ctx, t, float(doc["strike"]),
                                    kind == "european_call", spec)
        proj_time = time.perf_counter() - t0
        t0 = time.perf_counter()
        est = price_european_mc(model, ctx, t, float(doc["strike"]),
                                kind == "european_call", config)
        mc_time = time.perf_counter() - t0
        proj_out = _fmt(proj_value)
    elif kind in EXOTIC_KINDS:
        proj_out, proj_time = "n/a", 0.0   # transform-based exotics are out of scope
        t0 = time.perf_counter()
        est = price_exotic(model, ctx, _contract_exotic(doc), config)
        mc_time = time.perf_counter() - t0
    else:
        raise ValueError(f"unknown contract kind '{kind}'")

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "strike", "maturity", "proj", "mc",
                         "mc_ci95_half_width", "time_proj_s", "time_mc_s"])
        writer.writerow([kind, _fmt(doc.get("strike", 0.0)), _fmt(t), proj_out,
                         _fmt(est.price), _fmt(est.ci95_half_width),
                         _fmt(proj_time), _fmt(mc_time)])
    print(f"{kind}: proj {proj_out} mc {est.price:.6f} +/- {est.ci95_half_width:.6f} "
          f"-> {args.out}")
    return 0


def cmd_synth(args) -> int:
    model = _load_params(args.params)
    try:
        t_part, m_part = args.grid.split("x")
        maturities = [float(v) for v in t_part.split(",")]
        lo, hi, step = (float(v) for v in m_part.split(":"))
    except ValueError:
        raise ValueError("--grid must look like T1,T2,...xLO:HI:STEP "
                         "(maturities x log-moneyness ladder)") from None
    moneyness = np.arange(lo, hi + 0.5 * step, step)
    surface = synthetic_surface(model, args.spot, args.rate, args.div_yield,
                                maturities, moneyness, GridSpec(n=args.n, l1=args.l1))
    write_quotes(args.out, surface)
    print(f"synthetic surface: {surface.n_quotes} quotes over {len(maturities)} "
          f"maturities -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _add_grid_flags(p):
    p.add_argument("--n", type=int, default=4096, help="projection basis size (power of two)")
    p.add_argument("--l1", type=float, default=12.0, help="grid width multiplier")


def _add_mc_flags(p):
    p.add_argument("--paths", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps-per-interval", type=int, default=None)
    p.add_argument("--no-antithetic", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svjd", description="Stochastic-volatility jump-diffusion pricing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit a model to a quote surface")
    p.add_argument("--model", required=True, choices=["hkde", "heston", "bates", "bgm"])
    p.add_argument("--quotes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tol-schedule", default="1e-4,1e-6,1e-8")
    p.add_argument("--init", default=None, help="optional params JSON used as initial guess")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("price", help="price one contract from a JSON spec")
    p.add_argument("--params", required=True)
    p.add_argument("--contract", required=True)
    _add_grid_flags(p)
    _add_mc_flags(p)
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("smile", help="implied-volatility cross section as CSV")
    p.add_argument("--params", required=True)
    p.add_argument("--maturity", type=float, required=True)
    p.add_argument("--strikes", required=True, help="LO:HI:STEP")
    p.add_argument("--bump", default=None, help="name=factor or name=+NN%%")
    p.add_argument("--out", required=True)
    p.add_argument("--spot", type=float, default=100.0)
    p.add_argument("--rate", type=float, default=0.05)
    p.add_argument("--div-yield", type=float, default=0.0)
    _add_grid_flags(p)
    p.set_defaults(func=cmd_smile)

    p = sub.add_parser("mc-compare", help="projection vs Monte Carlo table row")
    p.add_argument("--params", required=True)
    p.add_argument("--contract", required=True)
    p.add_argument("--out", required=True)
    _add_grid_flags(p)
    _add_mc_flags(p)
    p.set_defaults(func=cmd_mc_compare)

    p = sub.add_parser("synth", help="synthetic OTM quote surface as CSV")
    p.add_argument("--params", required=True)
    p.add_argument("--grid", required=True, help="T1,T2,...xLO:HI:STEP")
    p.add_argument("--out", required=True)
    p.add_argument("--spot", type=float, default=100.0)
    p.add_argument("--rate", type=float, default=0.05)
    p.add_argument("--div-yield", type=float, default=0.0)
    _add_grid_flags(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # one-line machine-parsable failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
