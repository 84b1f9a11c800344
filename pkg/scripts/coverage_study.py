"""Monte Carlo coverage of the one-step bootstrap band on a rank-2 functional series."""

import argparse
from dataclasses import replace

from hpfts.studies import CoverageConfig, coverage_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=CoverageConfig.reps)
    ap.add_argument("--paths", type=int, default=CoverageConfig.B)
    ap.add_argument("--noise", type=float, default=CoverageConfig.noise_sd)
    ap.add_argument("--seed", type=int, default=CoverageConfig.seed)
    args = ap.parse_args()
    cfg = replace(CoverageConfig(), reps=args.reps, B=args.paths, noise_sd=args.noise, seed=args.seed)
    out = coverage_study(cfg)
    per = out["per_rep"]
    print(f"reps={cfg.reps} B={cfg.B} nominal={100 * (1 - cfg.alpha):.0f}%")
    print(f"coverage {100 * out['coverage']:.2f}%  (rep min {100 * per.min():.1f}%, max {100 * per.max():.1f}%)")
    print(f"{out['seconds']:.1f}s")


if __name__ == "__main__":
    main()
