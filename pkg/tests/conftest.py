import numpy as np
import pytest

from patternforge.image import resize_bilinear, save_png
from patternforge.manifest import read_sources, write_jsonl


def make_source_image(seed, h=64, w=64):
    """Structured test image: low-res random blocks upsampled, so thumbnails
    stay discriminative between sources."""
    rng = np.random.default_rng(seed)
    low = rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8)
    return resize_bilinear(low, h, w)


def make_sources(root, n, h=64, w=64, prefix="S", seed_base=0):
    """Write n synthetic PNG sources plus a sources.jsonl manifest; returns
    the resolved source rows."""
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(n):
        name = f"{prefix.lower()}{i:04d}.png"
        save_png(make_source_image(seed_base + i, h, w), root / name)
        rows.append({"id": f"{prefix}{i:04d}", "path": name})
    write_jsonl(rows, root / "sources.jsonl")
    return read_sources(root / "sources.jsonl")


@pytest.fixture
def asym_image():
    """64x64 image with no flip/rotation symmetry."""
    return make_source_image(1234)
