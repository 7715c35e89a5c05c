"""Composite-reset versus hover-only training on the toy task.

Both arms share the config and the seeds; only the reset mode differs.
Writes one run directory per (arm, seed) and an `ablation.csv` summary.
"""

import csv
import logging
import sys
from pathlib import Path

import numpy as np

import aster
from aster.env import ResetMode
from aster.training import train

# pylint: disable=invalid-name

HERE = Path(__file__).parent
OUT = Path("runs/ablation")
SEEDS = (1, 2, 3)
ARMS = {"composite": ResetMode.AUTO, "hover-only": ResetMode.HOVER}
TAIL = 5  # iterations averaged at the end of each run


def _final(metrics, name: str) -> float:
    values = [getattr(m, name) for m in metrics[-TAIL:]]
    return float(np.nanmean(values))


def main() -> int:
    logging.basicConfig(level=logging.INFO)
    config = aster.read_config(HERE.parent / "toy.toml")
    rows = []
    for arm, mode in ARMS.items():
        for seed in SEEDS:
            result = train(
                config,
                aster.SeedManager(seed),
                mode,
                OUT / f"{arm}-{seed}",
            )
            rows.append(
                (
                    arm,
                    seed,
                    _final(result.metrics, "mean_reward"),
                    _final(result.metrics, "mean_traversals"),
                )
            )
    OUT.mkdir(parents=True, exist_ok=True)
    with (OUT / "ablation.csv").open("w", newline="") as stream:
        writer = csv.writer(stream)
        writer.writerow(["arm", "seed", "final_reward", "final_traversals"])
        writer.writerows(rows)

    by_arm = {arm: [row for row in rows if row[0] == arm] for arm in ARMS}
    composite = np.mean([row[2] for row in by_arm["composite"]])
    baseline = np.mean([row[2] for row in by_arm["hover-only"]])
    more_traversals = all(
        c[3] > h[3] for c, h in zip(by_arm["composite"], by_arm["hover-only"])
    )
    print(f"composite reward {composite:.3f}, hover-only {baseline:.3f}")
    print(f"more traversals on every seed: {more_traversals}")
    ordered = composite >= 5.0 * max(baseline, 1e-9) and more_traversals
    return 0 if ordered else 1


if __name__ == "__main__":
    sys.exit(main())
