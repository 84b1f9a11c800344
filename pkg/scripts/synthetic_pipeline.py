"""Synthetic end-to-end run: data, projection, pension-age scheme and present values."""

import argparse
from dataclasses import dataclass
from pathlib import Path

from hpfts.cli import main as cli


@dataclass(frozen=True)
class PipelineConfig:
    out: str = "synthetic_run"
    regions: str = "ACT,NSW,VIC"
    years: int = 53
    paths: int = 200
    horizon: int = 30
    seed: int = 0
    workers: int = 1


def run(cfg: PipelineConfig) -> int:
    root = Path(cfg.out)
    code = cli(["synth", "--out", str(root / "data"), "--regions", cfg.regions, "--years", str(cfg.years),
                "--seed", str(cfg.seed)])
    common = ["--config", str(root / "data" / "run.cfg"), "--out", str(root / "results"), "--seed", str(cfg.seed),
              "--paths", str(cfg.paths), "--horizon", str(cfg.horizon), "--workers", str(cfg.workers)]
    for step in (["project"], ["pension-age"], ["welfare", "--scheme", str(root / "results" / "scheme.csv")]):
        if code:
            return code
        code = cli([*step, *common])
    return code


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    d = PipelineConfig()
    for name in ("out", "regions"):
        ap.add_argument(f"--{name}", default=getattr(d, name))
    for name in ("years", "paths", "horizon", "seed", "workers"):
        ap.add_argument(f"--{name}", type=int, default=getattr(d, name))
    raise SystemExit(run(PipelineConfig(**vars(ap.parse_args()))))
