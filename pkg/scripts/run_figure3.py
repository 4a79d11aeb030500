#!/usr/bin/env python3
"""Monte Carlo RMSE of the four point estimators along sigma = n^tau.

    python scripts/run_figure3.py                       # full 500-replicate run
    python scripts/run_figure3.py --replicates 50 --out /tmp/fig3.csv

Writes a results CSV and an SVG next to it, then prints a short trend summary.
"""
import argparse
import json
import time
from pathlib import Path

from dispersal.experiments import McConfig, rows_to_csv, rows_to_svg, run_mc, select
from dispersal.model import ModelParams

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", default=str(HERE / "configs" / "fig3.json"))
    ap.add_argument("--replicates", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", default="fig3_results.csv")
    args = ap.parse_args()

    conf = json.loads(Path(args.config).read_text())
    params = ModelParams(n=conf["n"], lam=conf["lambda"], mu=conf["mu"], sigma=1.0)
    cfg = McConfig(
        params,
        estimators=tuple(conf["estimators"]),
        taus=conf["taus"],
        z0=conf["z0"],
        replicates=args.replicates or conf["replicates"],
        master_seed=conf["seed"],
        c=conf["c"],
        s=conf["s"],
        h1_mode=conf["h1_mode"],
        threads=args.threads,
    )
    t0 = time.perf_counter()
    rows = run_mc(cfg)
    out = Path(args.out)
    out.write_text(rows_to_csv(rows))
    out.with_suffix(".svg").write_text(rows_to_svg(rows, s=cfg.s))
    print(f"seed={cfg.master_seed} replicates={cfg.replicates} ({time.perf_counter() - t0:.1f}s)")
    print(f"wrote {out} and {out.with_suffix('.svg')}")

    print(f"{'tau':>6} " + " ".join(f"{e:>10}" for e in cfg.estimators))
    by_est = {e: select(rows, e) for e in cfg.estimators}
    for i, (tau, _) in enumerate(cfg.grid()):
        print(f"{tau:6.2f} " + " ".join(f"{by_est[e][i].rmse:10.4f}" for e in cfg.estimators))


if __name__ == "__main__":
    main()
