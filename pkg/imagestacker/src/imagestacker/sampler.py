"""PK batch sampling: every batch holds K images for each of P classes."""

from __future__ import annotations

import numpy as np


def pk_batches(class_to_indices: dict, p: int, k: int, steps: int, seed: int = 0):
    """Yield `steps` batches of dataset indices, each with exactly P
    classes x K images. Classes are drawn without replacement per batch;
    images within a class are drawn with replacement when the class has
    fewer than K members."""
    classes = sorted(class_to_indices)
    if p > len(classes):
        raise ValueError(f"P={p} exceeds class count {len(classes)}")
    rng = np.random.default_rng(seed)
    for _ in range(steps):
        picked = rng.choice(len(classes), size=p, replace=False)
        batch = []
        for ci in picked:
            members = class_to_indices[classes[int(ci)]]
            replace = len(members) < k
            idx = rng.choice(len(members), size=k, replace=replace)
            batch.extend(members[int(i)] for i in idx)
        yield batch
