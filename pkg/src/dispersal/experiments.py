"""Minimax rate curve, the Monte Carlo sweep harness, slope fitting and export."""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .kernels import get_kernel
from .model import DispersalModel, ModelParams, make_beta23_model
from .point_estimators import (
    bandwidth_rule,
    f1_flags,
    f2_flags,
    f_hat_1,
    f_hat_2,
    f_hat_dec,
    f_hat_int,
)
from .simulation import SeedSpec, draw_cox_primitives

CSV_HEADER = "estimator,n,lambda,mu,sigma,tau,z0,h1,h2,replicates,mean,bias,variance,rmse,flag,seed"
ESTIMATORS = ("f1", "f2", "dec", "int")


# ---------------------------------------------------------------------------
# rate function

@dataclass(frozen=True)
class RateParams:
    s: float
    n: int
    sigma: float

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError("s must be positive")
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if not 0 < self.sigma <= 1:
            raise ValueError("sigma must lie in (0, 1]")


def rate_boundaries(s: float, n: float) -> tuple:
    """The three regime boundaries in sigma, increasing."""
    return (1.0 / n, n ** (-(2 * s + 1) / (2 * s + 2)), n ** (-(4 * s + 3) / (6 * s + 6)))


def rate_branches(s: float, n: float, sigma: float) -> tuple:
    """All four regime formulas evaluated at sigma (used for continuity checks)."""
    return (
        n ** (-s / (2 * s + 1)),
        sigma ** (s / (2 * s + 1)),
        sigma * math.sqrt(n),
        (n * sigma) ** (-s / (2 * s + 3)),
    )


def rate_fn(rp: RateParams) -> float:
    b1, b2, b3 = rate_boundaries(rp.s, rp.n)
    branches = rate_branches(rp.s, rp.n, rp.sigma)
    if rp.sigma <= b1:
        return branches[0]
    if rp.sigma < b2:
        return branches[1]
    if rp.sigma < b3:
        return branches[2]
    return branches[3]


# ---------------------------------------------------------------------------
# Monte Carlo harness

@dataclass
class McConfig:
    params: ModelParams
    model: DispersalModel = field(default_factory=make_beta23_model)
    estimators: Sequence[str] = ("f1", "f2")
    taus: Optional[Sequence[float]] = None
    sigmas: Optional[Sequence[float]] = None
    z0: float = 0.0
    replicates: int = 100
    master_seed: int = 0
    c: float = 0.7
    s: float = 2.0
    h1_mode: str = "practical"
    kernel: str = "paper"
    threads: Optional[int] = None

    def __post_init__(self):
        if self.replicates < 2:
            raise ValueError("replicates must be at least 2")
        if (self.taus is None) == (self.sigmas is None):
            raise ValueError("give exactly one of taus or sigmas")
        grid = self.taus if self.taus is not None else self.sigmas
        if len(grid) == 0:
            raise ValueError("sigma grid is empty")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATORS}")

    def grid(self) -> list:
        """(tau, sigma) pairs; tau = log_n(sigma)."""
        n = self.params.n
        if self.taus is not None:
            return [(float(t), float(n ** t)) for t in self.taus]
        return [(math.log(s) / math.log(n), float(s)) for s in self.sigmas]


@dataclass(frozen=True)
class McResultRow:
    estimator: str
    n: int
    lam: float
    mu: float
    sigma: float
    tau: float
    z0: float
    h1: float
    h2: float
    replicates: int
    mean: float
    bias: float
    variance: float
    rmse: float
    flag: str
    seed: int

    def csv_fields(self) -> list:
        return [self.estimator, self.n, _fmt(self.lam), _fmt(self.mu), _fmt(self.sigma), _fmt(self.tau),
                _fmt(self.z0), _fmt(self.h1), _fmt(self.h2), self.replicates, _fmt(self.mean),
                _fmt(self.bias), _fmt(self.variance), _fmt(self.rmse), self.flag, self.seed]


def _fmt(v) -> str:
    return repr(float(v))


def worker_count(requested: Optional[int] = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("DISPERSAL_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _plan(cfg: McConfig, est: str, params: ModelParams):
    """Bandwidths and precondition flags for one (estimator, sigma) cell."""
    bw = bandwidth_rule(params, cfg.s, "f2" if est == "f2" else ("f1" if est == "f1" else est), cfg.c, cfg.h1_mode)
    if est == "f1":
        return bw.h1, bw.h2, f1_flags(params, bw.h1, cfg.z0), True
    if est == "f2":
        if params.sigma >= 1.0 / 8.0:
            return bw.h1, bw.h2, ["sigma_ge_1/8"], False
        return bw.h1, bw.h2, f2_flags(params, bw.h2, cfg.z0), True
    if est == "dec":
        return bw.h1, math.nan, f1_flags(params, bw.h1, cfg.z0), True
    return math.nan, bw.h2, f2_flags(params, bw.h2, cfg.z0), True


def _evaluate(est, clouds, params, k, z0, h1, h2, h1_mode):
    if est == "f1":
        return f_hat_1(clouds, params, k, z0, h1, warn=False)
    if est == "f2":
        return f_hat_2(clouds, params, k, z0, h2, h1_mode, warn=False)
    if est == "dec":
        return f_hat_dec(clouds, params, k, z0, h1)
    return f_hat_int(clouds, params, k, z0, h2)


def run_mc(cfg: McConfig) -> list:
    """Evaluate every estimator on every grid sigma for ``cfg.replicates`` coupled Cox draws.

    Replicate r uses seed stream (master_seed, r) at every sigma, so the parents,
    child counts and displacements are shared along the grid. Results land in
    a preallocated array and are reduced in fixed order, so the output does not
    depend on the number of worker threads.
    """
    k = get_kernel(cfg.kernel)
    grid = cfg.grid()
    cells = []
    for tau, sigma in grid:
        p = cfg.params.with_sigma(sigma)
        for est in cfg.estimators:
            h1, h2, flags, defined = _plan(cfg, est, p)
            cells.append((est, tau, sigma, p, h1, h2, flags, defined))
    values = np.full((len(cells), cfg.replicates), np.nan)

    def one_replicate(r: int):
        prims = draw_cox_primitives(cfg.params, cfg.model, SeedSpec(cfg.master_seed, r))
        cache = {}
        for ci, (est, tau, sigma, p, h1, h2, flags, defined) in enumerate(cells):
            if not defined:
                continue
            if sigma not in cache:
                cache = {sigma: prims.realize(sigma)}
            try:
                values[ci, r] = _evaluate(est, cache[sigma], p, k, cfg.z0, h1, h2, cfg.h1_mode)
            except ValueError:
                pass  # e.g. no offspring; counted as a failed replicate below

    nthreads = min(worker_count(cfg.threads), cfg.replicates)
    if nthreads == 1:
        for r in range(cfg.replicates):
            one_replicate(r)
    else:
        with ThreadPoolExecutor(nthreads) as pool:
            list(pool.map(one_replicate, range(cfg.replicates)))

    truth = float(cfg.model.density(cfg.z0))
    rows = []
    for ci, (est, tau, sigma, p, h1, h2, flags, defined) in enumerate(cells):
        flags = list(flags)
        vals = values[ci]
        ok = vals[np.isfinite(vals)]
        if defined and ok.size < vals.size:
            flags.append(f"failed={vals.size - ok.size}")
        if ok.size:
            mean, var, rmse = aggregate(ok, truth)
        else:
            mean = var = rmse = math.nan
        rows.append(McResultRow(est, p.n, p.lam, p.mu, sigma, tau, cfg.z0, h1, h2, cfg.replicates,
                                mean, mean - truth, var, rmse, ";".join(flags), cfg.master_seed))
    return rows


def aggregate(values: np.ndarray, truth: float) -> tuple:
    """Mean, variance (ddof 0) and root mean squared error against ``truth``."""
    mean = float(np.mean(values))
    var = float(np.mean((values - mean) ** 2))
    rmse = math.sqrt(float(np.mean((values - truth) ** 2)))
    return mean, var, rmse


def rows_to_csv(rows: Sequence[McResultRow]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(row.csv_fields())
    return buf.getvalue()


def write_rows_csv(rows: Sequence[McResultRow], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


def read_rows_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append(McResultRow(
                rec["estimator"], int(rec["n"]), float(rec["lambda"]), float(rec["mu"]), float(rec["sigma"]),
                float(rec["tau"]), float(rec["z0"]), float(rec["h1"]), float(rec["h2"]), int(rec["replicates"]),
                float(rec["mean"]), float(rec["bias"]), float(rec["variance"]), float(rec["rmse"]),
                rec["flag"], int(rec["seed"]),
            ))
    return out


def select(rows, estimator: str) -> list:
    return [r for r in rows if r.estimator == estimator]


# ---------------------------------------------------------------------------
# slopes and plots

def fit_slope(rows: Sequence[McResultRow], x: str = "log_n") -> float:
    """Least-squares slope of log(rmse) against log(n) or log(sigma)."""
    if len(rows) < 3:
        raise ValueError("need at least 3 rows")
    if x not in ("log_n", "log_sigma"):
        raise ValueError("x must be 'log_n' or 'log_sigma'")
    rmse = np.array([r.rmse for r in rows], dtype=float)
    if not np.all(np.isfinite(rmse) & (rmse > 0)):
        raise ValueError("rmse values must be positive and finite")
    xs = np.log([r.n if x == "log_n" else r.sigma for r in rows])
    if np.ptp(xs) == 0:
        raise ValueError("degenerate design: covariate is constant")
    return float(np.polyfit(xs, np.log(rmse), 1)[0])


_COLORS = {"f1": "#7b3294", "f2": "#008837", "dec": "#c2a5cf", "int": "#a6dba0", "rate": "#555555"}


def rows_to_svg(rows: Sequence[McResultRow], s: float = 2.0, width: int = 640, height: int = 420) -> str:
    """Polyline plot of log_n(rmse) against log_n(sigma), one line per estimator plus the rate curve."""
    series = {}
    for r in rows:
        if math.isfinite(r.rmse) and r.rmse > 0:
            series.setdefault(r.estimator, []).append((r.tau, math.log(r.rmse) / math.log(r.n)))
    if rows:
        n = rows[0].n
        taus = sorted({r.tau for r in rows})
        fine = np.linspace(min(taus), max(taus), 200)
        series["rate"] = [(float(t), math.log(rate_fn(RateParams(s, n, min(1.0, n ** t)))) / math.log(n))
                          for t in fine]
    pts = [p for line in series.values() for p in line]
    if not pts:
        raise ValueError("nothing to plot")
    xs, ys = zip(*pts)
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    m = 50

    def sx(v):
        return m + (v - x0) / (x1 - x0) * (width - 2 * m)

    def sy(v):
        return height - m - (v - y0) / (y1 - y0) * (height - 2 * m)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" stroke="black"/>',
           f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>',
           f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">log_n(sigma)</text>',
           f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})">log_n(rmse)</text>']
    for i, (name, line) in enumerate(series.items()):
        line = sorted(line)
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in line)
        dash = ' stroke-dasharray="4 3"' if name in ("dec", "int", "rate") else ""
        color = _COLORS.get(name, "#000000")
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{coords}"/>')
        out.append(f'<text x="{width - m + 4}" y="{m + 14 * i}" font-size="11" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def config_to_dict(cfg: McConfig) -> dict:
    d = asdict(cfg)
    d.pop("model")
    d["params"] = cfg.params.to_dict()
    return d
