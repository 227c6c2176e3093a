"""Confidence-driven central cropping followed by grid-fragment splicing."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .media_io import LumaFrame

# Absorbs float noise in x*h/8 so exact multiples are not floored/ceiled a pixel off.
_ROUND_EPS = 1e-9


@dataclass(frozen=True)
class CropRect:
    row_start: int
    row_end: int
    col_start: int
    col_end: int

    def __post_init__(self):
        if not (0 <= self.row_start < self.row_end and 0 <= self.col_start < self.col_end):
            raise ValueError(f"degenerate crop {self}")

    @property
    def height(self) -> int:
        return self.row_end - self.row_start

    @property
    def width(self) -> int:
        return self.col_end - self.col_start

    def to_dict(self) -> dict:
        return {"row_start": self.row_start, "row_end": self.row_end,
                "col_start": self.col_start, "col_end": self.col_end}


@dataclass(frozen=True)
class FragmentConfig:
    grid_size: int = 7
    patch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.grid_size < 1 or self.patch_size < 1:
            raise ValueError("grid_size and patch_size must be >= 1")

    @property
    def output_size(self) -> int:
        return self.grid_size * self.patch_size


@dataclass(frozen=True, eq=False)
class FragmentImage:
    """Spliced fragments plus the (row, col) source offset of each cell, in grid order."""

    frame: LumaFrame
    offsets: tuple[tuple[int, int], ...]
    grid_size: int
    patch_size: int

    def to_dict(self) -> dict:
        return {"grid_size": self.grid_size, "patch_size": self.patch_size,
                "offsets": [list(o) for o in self.offsets]}


def central_crop_rect(h: int, w: int, x: float) -> CropRect:
    """Keep rows [x*h/8, (8-x)*h/8) and the analogous columns.

    Start indices are floored and end indices ceiled, so the retained share
    never drops below (8 - 2x)/8 per dimension.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"confidence x must be in [0, 1], got {x}")
    if h < 8 or w < 8:
        raise ValueError(f"frame {w}x{h} too small to crop")

    def span(n):
        start = math.floor(x * n / 8.0 + _ROUND_EPS)
        end = math.ceil((8.0 - x) * n / 8.0 - _ROUND_EPS)
        return max(start, 0), min(end, n)

    r0, r1 = span(h)
    c0, c1 = span(w)
    return CropRect(r0, r1, c0, c1)


def apply_crop(frame: LumaFrame, rect: CropRect) -> LumaFrame:
    if rect.row_end > frame.height or rect.col_end > frame.width:
        raise ValueError(f"crop {rect} exceeds frame {frame.width}x{frame.height}")
    if (rect.row_start, rect.col_start, rect.row_end, rect.col_end) == (0, 0, frame.height, frame.width):
        return frame
    sub = frame.samples[rect.row_start:rect.row_end, rect.col_start:rect.col_end]
    return LumaFrame(np.ascontiguousarray(sub), frame.bit_depth)


def cell_bounds(n: int, grid_size: int) -> list[tuple[int, int]]:
    """Equal cells along one axis; the remainder goes to the last cell."""
    step = n // grid_size
    bounds = [(i * step, (i + 1) * step) for i in range(grid_size)]
    bounds[-1] = (bounds[-1][0], n)
    return bounds


def cell_offsets(height: int, width: int, cfg: FragmentConfig) -> tuple[tuple[int, int], ...]:
    """Per-cell patch origins; each cell draws from its own (seed, row, col) stream."""
    g, p = cfg.grid_size, cfg.patch_size
    if height < g * p or width < g * p:
        raise ValueError(f"frame {width}x{height} too small for a {g}x{g} grid of {p}px patches")
    rows, cols = cell_bounds(height, g), cell_bounds(width, g)
    seed = int(cfg.seed) & 0xFFFFFFFFFFFFFFFF
    offsets = []
    for r, (r0, r1) in enumerate(rows):
        for c, (c0, c1) in enumerate(cols):
            rng = np.random.default_rng([seed, r, c])
            dr = int(rng.integers(0, r1 - r0 - p + 1))
            dc = int(rng.integers(0, c1 - c0 - p + 1))
            offsets.append((r0 + dr, c0 + dc))
    return tuple(offsets)


def fragment_sample(frame: LumaFrame, cfg: FragmentConfig = FragmentConfig()) -> FragmentImage:
    g, p = cfg.grid_size, cfg.patch_size
    offsets = cell_offsets(frame.height, frame.width, cfg)
    src = frame.samples
    out = np.empty((g * p, g * p), dtype=np.float64)
    for k, (r, c) in enumerate(offsets):
        i, j = divmod(k, g)
        out[i * p:(i + 1) * p, j * p:(j + 1) * p] = src[r:r + p, c:c + p]
    return FragmentImage(LumaFrame(out, frame.bit_depth), offsets, g, p)
