"""Command-line front end: simulate, estimate, mc-sweep, rates, moment-check.

Exit codes: 0 success, 2 invalid input, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import math
import secrets
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .iid_estimators import (
    brown_cdf,
    counting_cdf,
    counting_density,
    dutch_cdf,
    nearest_parent_density,
)
from .io import clouds_to_json, read_clouds, write_clouds_csv, write_sidecar
from .kernels import bandlimited_kernel, get_kernel, rect_kernel
from .model import ModelParams, make_beta23_model
from .point_estimators import (
    bandwidth_rule,
    f_hat_1,
    f_hat_2,
    f_hat_dec,
    f_hat_int,
)
from .simulation import (
    MomentQuery,
    SeedSpec,
    expected_MN,
    expected_N,
    expected_NN,
    sample_cox,
    sample_cox_batch,
    sample_iid_pairs,
    sample_one_to_one,
)
from .spectral import SpectralConfig, parse_parent, spectral_bandwidth, spectral_deconv

DEFAULTS = {
    "n": 1000, "lambda": 1.0, "mu": 1.0, "sigma": 0.1, "seed": None, "z0": 0.0, "method": None,
    "h1": None, "h2": None, "s": 2.0, "c": 0.7, "model": "cox", "parent": None, "format": None,
    "out": None, "replicates": 100, "taus": None, "sigmas": None, "estimators": "f1,f2",
    "threads": None, "kernel": "paper", "h1_mode": "practical", "reps": 2000,
    "A": "0,0.5", "B": "0.2,0.4", "B1": "0.2,0.3", "B2": "0.35,0.45",
}
COX_METHODS = ("f1", "f2", "dec", "int", "spectral")
IID_METHODS = ("dutch", "nearest", "brown", "counting", "counting-density")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p, *names):
    spec = {
        "n": dict(type=int, help="scale parameter n (expected parents n*lambda)"),
        "lambda": dict(type=float, dest="lambda", help="parent intensity lambda"),
        "mu": dict(type=float, help="mean offspring per parent"),
        "sigma": dict(type=float, help="dispersal scale"),
        "seed": dict(type=int, help="master seed; a random one is drawn and printed when omitted"),
        "z0": dict(type=float, help="evaluation point"),
        "method": dict(help="estimator id(s), comma separated"),
        "h1": dict(type=float), "h2": dict(type=float),
        "s": dict(type=float, help="smoothness used by bandwidth rules"),
        "c": dict(type=float, help="bandwidth constant"),
        "model": dict(choices=["cox", "one2one", "iid"]),
        "parent": dict(help="parent law for spectral work, e.g. laplace:b=0.1"),
        "config": dict(help="JSON file whose keys mirror the flags; flags win"),
        "out": dict(help="output path"),
        "format": dict(choices=["csv", "json", "svg"]),
    }
    for name in names:
        p.add_argument(f"--{name}", default=None, **spec[name])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dispersal", description="dispersal density estimation across scales")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="draw parent/offspring clouds")
    _common(p, "n", "lambda", "mu", "sigma", "seed", "model", "parent", "config", "out", "format")

    p = sub.add_parser("estimate", help="evaluate estimators on stored or freshly simulated clouds")
    _common(p, "n", "lambda", "mu", "sigma", "seed", "z0", "method", "h1", "h2", "s", "c", "model",
            "parent", "config", "out", "format")
    p.add_argument("--clouds", help="CSV or JSON clouds file; simulated from the flags when omitted")
    p.add_argument("--kernel", default=None, help="kernel for point estimators (paper, bandlimited)")

    p = sub.add_parser("mc-sweep", help="Monte Carlo sweep over a sigma grid")
    _common(p, "n", "lambda", "mu", "seed", "z0", "s", "c", "config", "out", "format")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--taus", default=None, help="comma-separated exponents, sigma = n^tau")
    p.add_argument("--sigmas", default=None, help="comma-separated sigma values")
    p.add_argument("--estimators", default=None, help="subset of f1,f2,dec,int")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--h1-mode", dest="h1_mode", default=None, choices=["practical", "theoretical"])

    p = sub.add_parser("rates", help="tabulate the minimax rate over a grid")
    p.add_argument("--s", default="2", help="comma-separated values")
    p.add_argument("--n", default="1000", help="comma-separated values")
    p.add_argument("--sigma", default="1", help="comma-separated values")
    p.add_argument("--out", default=None)

    p = sub.add_parser("moment-check", help="analytic vs Monte Carlo cross-moments")
    _common(p, "n", "lambda", "mu", "sigma", "seed", "config", "out")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--A", default=None, help="parent interval a0,a1")
    p.add_argument("--B", default=None, help="offspring interval")
    p.add_argument("--B1", default=None)
    p.add_argument("--B2", default=None)
    return parser


def _merge(args) -> dict:
    """Defaults, then the JSON config, then explicit flags."""
    merged = dict(DEFAULTS)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        try:
            doc = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {cfg_path}: {exc}") from None
        for key, val in doc.items():
            key = key.replace("-", "_")
            if key not in merged and key != "config":
                raise UsageError(f"unknown config key {key!r}")
            merged[key] = val
    for key, val in vars(args).items():
        if val is not None and key not in ("command", "config"):
            merged[key] = val
    if merged["seed"] is None:
        merged["seed"] = secrets.randbits(63)
    return merged


def _floats(v) -> list:
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    if isinstance(v, (int, float)):
        return [float(v)]
    return [float(x) for x in str(v).split(",") if x.strip()]


def _interval(v):
    vals = _floats(v)
    if len(vals) != 2:
        raise UsageError(f"interval needs two numbers, got {v!r}")
    return tuple(vals)


def _params(m) -> ModelParams:
    return ModelParams(n=int(m["n"]), lam=float(m["lambda"]), mu=float(m["mu"]), sigma=float(m["sigma"]))


def _say_seed(seed):
    print(f"seed={seed}", file=sys.stderr)


def _simulate(m, params):
    model = make_beta23_model()
    seed = SeedSpec(int(m["seed"]))
    if m["model"] == "cox":
        parent = parse_parent(m["parent"]) if m["parent"] else None
        return sample_cox(params, model, seed, parent=parent)
    if m["model"] == "one2one":
        return sample_one_to_one(params, model, seed)
    return sample_iid_pairs(params.n, params.sigma, model, seed)


def cmd_simulate(m) -> int:
    params = _params(m)
    _say_seed(m["seed"])
    clouds = _simulate(m, params)
    out = Path(m["out"] or "clouds.csv")
    fmt = m["format"] or ("json" if out.suffix == ".json" else "csv")
    meta = {"master_seed": int(m["seed"]), "stream_id": 0}
    if fmt == "json":
        doc = clouds_to_json(clouds, params, seed=meta, model=m["model"])
        out.write_text(json.dumps(doc) + "\n")
    elif fmt == "csv":
        write_clouds_csv(clouds, out)
        write_sidecar(out.with_suffix(".json"), params, meta, m["model"], parent=m["parent"])
    else:
        raise UsageError("simulate writes csv or json")
    print(f"wrote {out}: {clouds.n_parents} parents, {clouds.n_offspring} offspring")
    return 0


def _estimate_one(method, clouds, params, m):
    z0 = float(m["z0"])
    n, sigma = params.n, params.sigma
    kname = m.get("kernel") or "paper"
    if method in ("f1", "f2", "dec", "int"):
        k = get_kernel(kname)
        est = method
        bw = bandwidth_rule(params, float(m["s"]), est, float(m["c"]), m["h1_mode"])
        h1 = float(m["h1"]) if m["h1"] is not None else bw.h1
        h2 = float(m["h2"]) if m["h2"] is not None else bw.h2
        if method == "f1":
            return h1, 8.0 / sigma, f_hat_1(clouds, params, k, z0, h1)
        if method == "f2":
            return h1, h2, f_hat_2(clouds, params, k, z0, h2, m["h1_mode"])
        if method == "dec":
            return h1, math.nan, f_hat_dec(clouds, params, k, z0, h1)
        return math.nan, h2, f_hat_int(clouds, params, k, z0, h2)
    if method == "spectral":
        if not m["parent"]:
            raise UsageError("spectral estimation needs --parent, e.g. laplace:b=0.1")
        parent = parse_parent(m["parent"])
        h1 = float(m["h1"]) if m["h1"] is not None else spectral_bandwidth(params, float(m["s"]), parent)
        return h1, math.nan, spectral_deconv(clouds, params, parent, bandlimited_kernel(), z0, h1, SpectralConfig())
    if method == "dutch":
        h = float(m["h1"]) if m["h1"] is not None else (sigma * n) ** -0.2
        return h, math.nan, dutch_cdf(clouds, sigma, rect_kernel(), z0, h)
    if method == "nearest":
        h = float(m["h2"]) if m["h2"] is not None else n ** -0.2
        return math.nan, h, nearest_parent_density(clouds, sigma, get_kernel(kname), z0, h)
    if method == "brown":
        return math.nan, math.nan, brown_cdf(clouds, sigma, clouds.n_offspring, z0)
    if method == "counting":
        return math.nan, math.nan, counting_cdf(clouds, sigma, z0)
    if method == "counting-density":
        h = float(m["h2"]) if m["h2"] is not None else n ** -0.2
        return math.nan, h, counting_density(clouds, sigma, h, z0)
    raise UsageError(f"unknown method {method!r}; choose from {COX_METHODS + IID_METHODS}")


def _stored_seed(path, fallback):
    """Seed recorded next to a clouds file, if any."""
    path = Path(path)
    meta = path if path.suffix == ".json" else path.with_suffix(".json")
    try:
        seed = json.loads(meta.read_text()).get("seed") or {}
        return seed.get("master_seed", fallback)
    except (OSError, json.JSONDecodeError, AttributeError):
        return fallback


def cmd_estimate(m) -> int:
    if m.get("clouds"):
        clouds, stored = read_clouds(m["clouds"])
        base = stored.to_dict() if stored is not None else {}
        for key in ("n", "lambda", "mu", "sigma"):
            if key in base and not m.get(f"_flag_{key}"):
                m[key] = base[key]
        _say_seed(_stored_seed(m["clouds"], m["seed"]))
    else:
        _say_seed(m["seed"])
        clouds = _simulate(m, _params(m))
    params = _params(m)
    if m["method"]:
        methods = [s.strip() for s in str(m["method"]).split(",") if s.strip()]
    elif m["model"] == "iid":
        methods = ["counting", "brown", "nearest"]
    else:
        methods = ["f1"] + (["f2"] if params.sigma < 1 / 8 else [])
    results = []
    for method in methods:
        h1, h2, val = _estimate_one(method, clouds, params, m)
        results.append({"method": method, "z0": float(m["z0"]), "h1": h1, "h2": h2, "estimate": float(val)})
    if (m["format"] or "csv") == "json":
        text = json.dumps([{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()}
                           for r in results], indent=2) + "\n"
    else:
        lines = ["method,z0,h1,h2,estimate"]
        lines += [f"{r['method']},{r['z0']!r},{r['h1']!r},{r['h2']!r},{r['estimate']!r}" for r in results]
        text = "\n".join(lines) + "\n"
    _emit(text, m["out"])
    return 0


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_mc_sweep(m) -> int:
    params = ModelParams(n=int(m["n"]), lam=float(m["lambda"]), mu=float(m["mu"]), sigma=1.0)
    taus = _floats(m["taus"]) if m["taus"] is not None else None
    sigmas = _floats(m["sigmas"]) if m["sigmas"] is not None else None
    if taus is None and sigmas is None:
        taus = [round(-2 + 0.2 * i, 10) for i in range(11)]
    ests = m["estimators"]
    ests = tuple(ests) if isinstance(ests, (list, tuple)) else tuple(e.strip() for e in str(ests).split(","))
    cfg = ex.McConfig(params, estimators=ests, taus=taus, sigmas=sigmas, z0=float(m["z0"]),
                      replicates=int(m["replicates"]), master_seed=int(m["seed"]), c=float(m["c"]),
                      s=float(m["s"]), h1_mode=m["h1_mode"], threads=m["threads"])
    _say_seed(m["seed"])
    rows = ex.run_mc(cfg)
    text = ex.rows_to_csv(rows)
    out = m["out"]
    fmt = m["format"] or "csv"
    if fmt == "json":
        raise UsageError("mc-sweep writes csv (optionally with svg)")
    _emit(text, out)
    if fmt == "svg":
        svg_path = Path(out).with_suffix(".svg") if out else Path("mc_sweep.svg")
        svg_path.write_text(ex.rows_to_svg(rows, s=float(m["s"])))
        print(f"wrote {svg_path}", file=sys.stderr)
    return 0


def cmd_rates(args) -> int:
    lines = ["s,n,sigma,rate"]
    for s in _floats(args.s):
        for n in _floats(args.n):
            for sigma in _floats(args.sigma):
                r = ex.rate_fn(ex.RateParams(s, int(n), sigma))
                lines.append(f"{s!r},{int(n)},{sigma!r},{r!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_moment_check(m) -> int:
    params = _params(m)
    model = make_beta23_model()
    q = MomentQuery(_interval(m["A"]), _interval(m["B"]))
    b1, b2 = _interval(m["B1"]), _interval(m["B2"])
    reps = int(m["reps"])
    if reps < 2:
        raise UsageError("reps must be at least 2")
    _say_seed(m["seed"])
    batch = sample_cox_batch(params, model, SeedSpec(int(m["seed"])), reps)
    nb = batch.counts_in(q.B)
    mn = batch.counts_in(q.A, "parents") * nb
    nn = batch.counts_in(b1) * batch.counts_in(b2)
    rows = [
        ("E[N(B)]", expected_N(params, model, q.B), nb),
        ("E[M(A)N(B)]", expected_MN(params, model, q), mn),
        ("E[N(B1)N(B2)]", expected_NN(params, model, b1, b2), nn),
    ]
    lines = ["moment,analytic,mc_mean,mc_se,z"]
    for name, exact, draws in rows:
        se = float(np.std(draws, ddof=1) / math.sqrt(reps))
        z = (float(draws.mean()) - exact) / se if se > 0 else math.nan
        lines.append(f"{name},{exact!r},{float(draws.mean())!r},{se!r},{z:.3f}")
    _emit("\n".join(lines) + "\n", m["out"])
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "rates":
            return cmd_rates(args)
        m = _merge(args)
        for key in ("n", "lambda", "mu", "sigma"):
            m[f"_flag_{key}"] = getattr(args, key, None) is not None
        handler = {"simulate": cmd_simulate, "estimate": cmd_estimate, "mc-sweep": cmd_mc_sweep,
                   "moment-check": cmd_moment_check}[args.command]
        return handler(m)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
