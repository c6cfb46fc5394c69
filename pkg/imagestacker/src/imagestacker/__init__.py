"""ImageStacker: a small vision transformer for in-context image copy
detection. The model sees a 9-channel input built by stacking a prompt
original, a prompt replica, and the target image along the channel axis,
and is trained jointly with a large-margin cosine classification loss
and a multi-label pattern loss."""

from .stacking import ShapeError, load_rgb, pseudo, stack
from .model import StackerViT, ViTConfig
from .losses import (LossConfig, NumericError, bce_pattern_loss,
                     combined_loss, cosface_loss)
from .sampler import pk_batches
from .train import TrainSet, load_checkpoint, save_checkpoint, train
from .export import (export_features, export_pool_pattern_features,
                     read_apds, write_apds)

__all__ = [
    "ShapeError", "load_rgb", "pseudo", "stack",
    "StackerViT", "ViTConfig",
    "LossConfig", "NumericError", "bce_pattern_loss", "combined_loss", "cosface_loss",
    "pk_batches",
    "TrainSet", "load_checkpoint", "save_checkpoint", "train",
    "export_features", "export_pool_pattern_features", "read_apds", "write_apds",
]
