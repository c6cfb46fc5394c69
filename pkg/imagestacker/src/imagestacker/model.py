"""Vision transformer over 9-channel stacked inputs.

Token layout: [class, N patch tokens, pattern]. The final class token is
the image descriptor, the final pattern token describes the applied
transformation patterns.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .stacking import ShapeError


@dataclass
class ViTConfig:
    image_side: int = 64
    patch_side: int = 8
    depth: int = 6
    width: int = 192
    heads: int = 4
    pattern_count: int = 28

    def __post_init__(self):
        if self.image_side % self.patch_side:
            raise ShapeError(f"image side {self.image_side} not divisible by "
                             f"patch side {self.patch_side}")
        if self.width % self.heads:
            raise ShapeError(f"width {self.width} not divisible by heads {self.heads}")

    @property
    def n_patches(self) -> int:
        return (self.image_side // self.patch_side) ** 2

    @property
    def seq_len(self) -> int:
        return self.n_patches + 2


class StackerViT(nn.Module):
    def __init__(self, config: ViTConfig):
        super().__init__()
        self.config = config
        c = config
        self.patch_embed = nn.Conv2d(9, c.width, kernel_size=c.patch_side,
                                     stride=c.patch_side)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, c.width))
        self.ptr_token = nn.Parameter(torch.zeros(1, 1, c.width))
        self.pos_embed = nn.Parameter(torch.zeros(1, c.seq_len, c.width))
        nn.init.trunc_normal_(self.cls_token, std=0.02)
        nn.init.trunc_normal_(self.ptr_token, std=0.02)
        nn.init.trunc_normal_(self.pos_embed, std=0.02)
        self.blocks = nn.ModuleList([
            nn.TransformerEncoderLayer(
                d_model=c.width, nhead=c.heads, dim_feedforward=4 * c.width,
                dropout=0.0, activation="gelu", batch_first=True, norm_first=True)
            for _ in range(c.depth)
        ])
        self.norm = nn.LayerNorm(c.width)
        self.pattern_head = nn.Linear(c.width, c.pattern_count)

    def tokens(self, x: torch.Tensor) -> torch.Tensor:
        """Run the full stack, returning all (B, N+2, width) final tokens."""
        c = self.config
        if x.ndim != 4 or x.shape[1:] != (9, c.image_side, c.image_side):
            raise ShapeError(f"expected (B, 9, {c.image_side}, {c.image_side}), "
                             f"got {tuple(x.shape)}")
        patches = self.patch_embed(x).flatten(2).transpose(1, 2)  # (B, N, width)
        b = patches.shape[0]
        seq = torch.cat([self.cls_token.expand(b, -1, -1), patches,
                         self.ptr_token.expand(b, -1, -1)], dim=1)
        seq = seq + self.pos_embed
        for block in self.blocks:
            seq = block(seq)
            if seq.shape[1] != c.seq_len:
                raise ShapeError(f"token count changed to {seq.shape[1]}")
        return self.norm(seq)

    def forward(self, x: torch.Tensor):
        """Returns (class_feature, pattern_feature), both (B, width)."""
        seq = self.tokens(x)
        return seq[:, 0], seq[:, -1]

    def pattern_logits(self, pattern_feature: torch.Tensor) -> torch.Tensor:
        return self.pattern_head(pattern_feature)
