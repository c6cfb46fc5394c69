import numpy as np
import pytest

from patternforge import forge as F
from patternforge.image import save_png


def make_sources(root, n, prefix="S", seed_base=0, side=64):
    """Blocky random PNGs with id/path rows (survives thumbnailing)."""
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(n):
        rng = np.random.default_rng(seed_base + i)
        blocks = rng.integers(0, 256, size=(8, 8, 3))
        img = np.repeat(np.repeat(blocks, side // 8, 0), side // 8, 1).astype(np.uint8)
        path = root / f"{prefix.lower()}{i:04d}.png"
        save_png(img, path)
        rows.append({"id": f"{prefix}{i:04d}", "path": str(path)})
    return rows


TRAIN_PATTERNS = ["Blur", "ColorJitter", "GrayScale", "Rotate", "Pixelate",
                  "Posterize", "Skew", "GridDistort", "ShufPixels",
                  "CutAssemble", "Repeat", "AddNoise"]


@pytest.fixture(scope="session")
def train_forge(tmp_path_factory):
    """Small forged training set: 12 sources x (1 original + 4 replicas)."""
    root = tmp_path_factory.mktemp("train_forge")
    sources = make_sources(root / "src", 12, seed_base=100)
    cfg = F.ForgeConfig(global_seed=5, replicas_per_original=4,
                        combo_size_range=(1, 2), allowed_patterns=TRAIN_PATTERNS)
    _, errors = F.forge_training_set(sources, cfg, root / "run")
    assert not errors
    return root / "run"
