#!/usr/bin/env python3
"""Build a synthetic annotation workspace for `segfuse serve` and the
browser client: street-scene-ish images, four candidate predictions per
image, fused results, and a manifest with FUSED status."""

from __future__ import annotations

import argparse
import os

import numpy as np

from segfuse import LabelMap, fusion, manifest, raster

ROAD, SIDEWALK, BUILDING, VEGETATION, SKY, PERSON, CAR = 0, 1, 2, 8, 10, 11, 13


def scene(rng, size):
    """Blocky street scene: sky over buildings over road, plus objects."""
    labels = np.full((size, size), SKY, np.uint8)
    horizon = size // 3
    labels[horizon : 2 * size // 3, :] = BUILDING
    labels[2 * size // 3 :, :] = ROAD
    labels[2 * size // 3 :, : size // 6] = SIDEWALK
    for _ in range(3):
        r = int(rng.integers(horizon, size - 6))
        c = int(rng.integers(0, size - 8))
        labels[r : r + 5, c : c + 8] = CAR
    for _ in range(2):
        r = int(rng.integers(2 * size // 3 - 8, size - 8))
        c = int(rng.integers(0, size - 3))
        labels[r : r + 7, c : c + 2] = PERSON
    veg = int(rng.integers(0, size - 10))
    labels[horizon - 4 : horizon + 4, veg : veg + 9] = VEGETATION
    return labels


def render(labels, catalog, rng):
    """Image roughly matching the label colors, with noise."""
    pal = np.array(catalog.palette(), np.int16).reshape(256, 3)
    img = pal[labels] + rng.integers(-18, 19, (*labels.shape, 3))
    return raster.Image(np.clip(img, 0, 255).astype(np.uint8))


def corrupt(rng, truth, rate):
    data = truth.copy()
    hit = rng.random(truth.shape) < rate
    shift = rng.integers(1, 19, truth.shape)
    data[hit] = (data[hit] + shift[hit]) % 19
    return LabelMap(data.astype(np.uint8))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_workspace")
    ap.add_argument("--images", type=int, default=3)
    ap.add_argument("--size", type=int, default=96)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    catalog = raster.DEFAULT_CATALOG
    cfg = fusion.FusionConfig(("m1", "m2", "m3", "m4"), (0.4, 0.3, 0.2, 0.1), alpha=0.7)
    os.makedirs(os.path.join(args.out, "images"), exist_ok=True)
    entries = []
    for i in range(args.images):
        image_id = f"scene{i:03d}"
        truth = scene(rng, args.size)
        raster.write_image(
            os.path.join(args.out, "images", f"{image_id}.png"),
            render(truth, catalog, rng),
        )
        masks = [corrupt(rng, truth, rate) for rate in (0.02, 0.10, 0.18, 0.30)]
        for name, m in zip(cfg.method_names, masks):
            d = os.path.join(args.out, "predictions", name)
            os.makedirs(d, exist_ok=True)
            raster.write_label_map(os.path.join(d, f"{image_id}.png"), m, catalog)
        result = fusion.fuse(masks, cfg)
        fusion.save_fused_result(result, os.path.join(args.out, "fused", image_id), catalog, cfg)
        entries.append(
            manifest.ManifestEntry(
                image_id,
                f"images/{image_id}.png",
                frozenset({"rainy"}),
                status=manifest.Status.FUSED,
            )
        )
        print(f"{image_id}: reliable {result.stats.reliable_fraction:.1%}")
    manifest.save_manifest(entries, os.path.join(args.out, "manifest.jsonl"))
    print(f"\nworkspace ready: segfuse serve --workdir {args.out}")


if __name__ == "__main__":
    main()
