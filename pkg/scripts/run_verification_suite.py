#!/usr/bin/env python3
"""Run the full verification suite at desk scale and write one report per
campaign (JSON and CSV) into an output directory.

The configurations mirror the acceptance suite: a CLT campaign for the
counting statistic, the covariance-form discrimination campaign with an
exponentially decaying test function, the escape ladder, the TV-decay ladder,
the centering-rate ladder, and the hitting-time campaign.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hardedge.ensemble import EnsembleParams  # noqa: E402
from hardedge.verify import ExperimentConfig, PhiSpec, run_campaign  # noqa: E402


def configs(seed: int, workers: int):
    canon = EnsembleParams(alpha=0.0, b=1.0, rho=0.5, n=500)
    yield "clt_counting", ExperimentConfig(
        kind="clt", params=canon, phi=PhiSpec(kind="one"),
        grid=(0.5, 1.0, 2.0, 4.0), replicates=5000, seed=seed, workers=workers,
    )
    yield "clt_exp_decay", ExperimentConfig(
        kind="clt", params=canon, phi=PhiSpec(kind="exp_decay", param=1.0),
        grid=(0.5, 1.0, 2.0, 4.0), replicates=5000, seed=seed, workers=workers,
    )
    yield "escape", ExperimentConfig(
        kind="escape", params=EnsembleParams(alpha=0.0, b=1.0, rho=0.5, n=1600),
        phi=PhiSpec(kind="one"), n_ladder=(100, 400, 1600), delta=0.2,
        horizon=10.0, replicates=2000, seed=seed, workers=workers,
    )
    yield "tv_decay", ExperimentConfig(
        kind="tv_decay", params=EnsembleParams(alpha=0.0, b=1.0, rho=0.5, n=10_000),
        phi=PhiSpec(kind="one"), n_ladder=(100, 1000, 10_000), delta=0.1, seed=seed,
    )
    yield "centering_rate", ExperimentConfig(
        kind="centering_rate", params=EnsembleParams(alpha=0.0, b=1.0, rho=0.3, n=50),
        phi=PhiSpec(kind="one"), grid=(0.25, 0.5, 1.0, 2.0, 4.0, 8.0),
        n_ladder=(50, 100, 200, 400, 800), seed=seed,
    )
    yield "hitting", ExperimentConfig(
        kind="hitting", params=canon, phi=PhiSpec(kind="one"),
        levels=(0.075, 0.225, 0.375), cross_times=(1.0, 2.0), replicates=5000,
        seed=seed, workers=workers, n_ladder=(100, 400),
        lemma_levels_horizon=50.0, lemma_replicates=1000,
    )


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    all_passed = True
    for name, cfg in configs(args.seed, args.workers):
        t0 = time.perf_counter()
        report = run_campaign(cfg)
        (args.out / f"{name}.json").write_text(report.to_json())
        (args.out / f"{name}.csv").write_text(report.to_csv())
        status = "PASS" if report.passed else "FAIL"
        print(f"{name:16s} {status}  ({time.perf_counter() - t0:6.1f} s)")
        for a in report.assertions:
            if not a["passed"]:
                print(f"    FAILED {a['name']}: {a['detail']}")
        all_passed &= report.passed
    return 0 if all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
