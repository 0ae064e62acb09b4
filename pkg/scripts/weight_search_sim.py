#!/usr/bin/env python3
"""Synthetic weight-evaluation experiment.

Builds K=4 predictors by corrupting a hidden truth map at different
per-pixel rates, ranks every weight vector on the 0.1 simplex grid by
mean reliable fraction, and contrasts the decimal weighting
(0.4, 0.3, 0.2, 0.1) against equal weights.
"""

from __future__ import annotations

import argparse

import numpy as np

from segfuse import LabelMap, fuse, weight_search
from segfuse.fusion import FusionConfig


def corrupted(rng, truth, rate):
    data = truth.copy()
    hit = rng.random(truth.shape) < rate
    shift = rng.integers(1, 19, truth.shape)
    data[hit] = (data[hit] + shift[hit]) % 19
    return LabelMap(data.astype(np.uint8))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--images", type=int, default=5)
    ap.add_argument("--size", type=int, default=48)
    ap.add_argument("--rates", default="0.05,0.20,0.35,0.50")
    ap.add_argument("--alpha", type=float, default=0.7)
    ap.add_argument("--grid-step", type=float, default=0.1)
    ap.add_argument("--top", type=int, default=15)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    rates = [float(r) for r in args.rates.split(",")]
    sets = []
    for _ in range(args.images):
        truth = rng.integers(0, 19, (args.size, args.size)).astype(np.uint8)
        sets.append([corrupted(rng, truth, r) for r in rates])

    ranking = weight_search(sets, args.grid_step, args.alpha)
    print(f"corruption rates: {rates}, alpha={args.alpha}, {args.images} images\n")
    print(f"{'rank':>4}  {'weights':<24} mean reliable fraction")
    for i, (weights, frac) in enumerate(ranking[: args.top], start=1):
        w = " ".join(f"{x:.1f}" for x in weights)
        print(f"{i:>4}  {w:<24} {frac:.4f}")

    names = tuple(f"m{i}" for i in range(len(rates)))
    for label, weights in (
        ("decimal 0.4/0.3/0.2/0.1", (0.4, 0.3, 0.2, 0.1)),
        ("equal weights", tuple(1 / len(rates) for _ in rates)),
    ):
        cfg = FusionConfig(names, weights, alpha=args.alpha)
        fracs = [fuse(s, cfg).stats.reliable_fraction for s in sets]
        print(f"\n{label}: mean reliable fraction {np.mean(fracs):.4f}")


if __name__ == "__main__":
    main()
