from __future__ import annotations

import numpy as np
import pytest

from segfuse import FusionConfig, LabelMap


def random_label_map(rng, height=None, width=None, num_classes=19, sentinel_prob=0.0):
    h = height or int(rng.integers(1, 65))
    w = width or int(rng.integers(1, 65))
    data = rng.integers(0, num_classes, (h, w)).astype(np.uint8)
    if sentinel_prob > 0:
        data[rng.random((h, w)) < sentinel_prob] = 255
    return LabelMap(data)


def random_mask_set(rng, k=4, height=None, width=None, num_classes=19):
    h = height or int(rng.integers(1, 65))
    w = width or int(rng.integers(1, 65))
    return [random_label_map(rng, h, w, num_classes) for _ in range(k)]


def random_weights(rng, k=4):
    w = rng.random(k) + 0.05
    return tuple(float(x) for x in (w / w.sum()))


def make_config(weights, alpha=0.7):
    names = tuple(f"m{i + 1}" for i in range(len(weights)))
    return FusionConfig(names, weights, alpha=alpha)


def corrupted_copy(rng, truth, rate, num_classes=19):
    """Replace each pixel with a different random class at the given rate."""
    data = np.array(truth)
    hit = rng.random(truth.shape) < rate
    shift = rng.integers(1, num_classes, truth.shape)
    data[hit] = (data[hit] + shift[hit]) % num_classes
    return LabelMap(data.astype(np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
