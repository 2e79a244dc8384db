#!/usr/bin/env python3
"""Sweep click noise against calibration accuracy.

For each noise level, solves a batch of synthetic broadcast cameras from
noisy court clicks and reports median/mean relative focal errors plus the
reprojection RMSE, in a fixed-width table. Use it to pick a click-accuracy
budget for annotation instructions.
"""

import argparse
import random
import sys

import numpy as np

from courtscene.calibration import CalibrationError, focal_error, solve_pnp
from courtscene.court import court_spec
from courtscene.synthetic import court_correspondences, make_broadcast_camera

FLOOR_SPORTS = ("badminton", "tennis", "pickleball")


def run_level(noise_px: float, trials: int, seed: int, mode: str) -> dict:
    e_fx, e_fy, rmse, failures = [], [], [], 0
    for trial in range(trials):
        sport = FLOOR_SPORTS[trial % len(FLOOR_SPORTS)]
        spec = court_spec(sport)
        camera = make_broadcast_camera(spec, random.Random(seed * 100_000 + trial))
        rng = random.Random(seed * 7_000_000 + trial)
        corr = court_correspondences(spec, camera, noise_px=noise_px, rng=rng if noise_px else None)
        try:
            solved, report = solve_pnp(corr, camera.image_size)
        except CalibrationError:
            failures += 1
            continue
        fx, fy = focal_error(solved, camera)
        e_fx.append(fx)
        e_fy.append(fy)
        rmse.append(report.rmse_px)
    return {
        "noise_px": noise_px,
        "median_e_fx": float(np.median(e_fx)) if e_fx else float("nan"),
        "median_e_fy": float(np.median(e_fy)) if e_fy else float("nan"),
        "mean_e_fx": float(np.mean(e_fx)) if e_fx else float("nan"),
        "mean_e_fy": float(np.mean(e_fy)) if e_fy else float("nan"),
        "mean_rmse_px": float(np.mean(rmse)) if rmse else float("nan"),
        "failures": failures,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=200, help="cameras per noise level")
    parser.add_argument("--seed", type=int, default=1, help="base seed")
    parser.add_argument(
        "--mode", choices=("full", "simplified"), default="full", help="intrinsics mode"
    )
    parser.add_argument(
        "--levels",
        type=float,
        nargs="+",
        default=[0.0, 0.5, 1.0, 2.0, 4.0],
        metavar="PX",
        help="click noise sigmas in pixels",
    )
    args = parser.parse_args(argv)

    header = (
        f"{'noise_px':>8} | {'med e_fx%':>9} {'med e_fy%':>9} | "
        f"{'mean e_fx%':>10} {'mean e_fy%':>10} | {'rmse_px':>8} {'fail':>4}"
    )
    print(header)
    print("-" * len(header))
    for level in args.levels:
        row = run_level(level, args.trials, args.seed, args.mode)
        print(
            f"{row['noise_px']:>8.2f} | {row['median_e_fx']:>9.3f} {row['median_e_fy']:>9.3f} | "
            f"{row['mean_e_fx']:>10.3f} {row['mean_e_fy']:>10.3f} | "
            f"{row['mean_rmse_px']:>8.4f} {row['failures']:>4d}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
