"""Content-type classification from luminance evenness, resolution and quality.

The hardware performance ``lambda`` is the worse of an evenness term and a
resolution term, each normalized by a UGC bound. ``lambda <= 1`` marks
hardware-limited content (UGC, ``x = alpha * lambda``); above 1 the clip is
quality-limited and ``x = alpha + (1 - alpha) * q / 100`` with ``q`` the
no-reference quality score, splitting PGC from OGC at a threshold on ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .media_io import Clip, LumaFrame

QualityPredictor = Callable[[LumaFrame], float]

UGC, PGC, OGC = "UGC", "PGC", "OGC"
HARDWARE_LIMITED, QUALITY_LIMITED = "hardware_limited", "quality_limited"


@dataclass(frozen=True)
class ClassifierConfig:
    alpha: float = 0.5
    h_m: int = 720
    w_m: int = 1280
    key_frame_count: int = 3
    epsilon_mean: float = 1e-6
    pgc_ogc_threshold: float = 0.75
    # Evenness is divided by this bound before the min; 1.0 is the
    # unnormalized term, which can never push lambda above 1.
    evenness_bound: float = 0.5
    invert_quality: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.h_m < 1 or self.w_m < 1:
            raise ValueError("h_m and w_m must be >= 1")
        if self.key_frame_count < 1:
            raise ValueError("key_frame_count must be >= 1")
        if not 0.5 < self.pgc_ogc_threshold <= 1.0:
            raise ValueError("pgc_ogc_threshold must be in (0.5, 1]")
        if not 0.0 < self.evenness_bound <= 1.0:
            raise ValueError("evenness_bound must be in (0, 1]")
        if self.epsilon_mean <= 0:
            raise ValueError("epsilon_mean must be positive")


@dataclass(frozen=True)
class Classification:
    lam: float
    x: float
    label: str
    branch: str
    quality: float | None = None

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "x": self.x, "label": self.label, "branch": self.branch}


def unevenness_term(frame: LumaFrame, epsilon_mean: float = 1e-6) -> float:
    """1 - std/mean over all samples (population std), floored at 0."""
    s = frame.samples
    mu = float(s.mean())
    if mu < epsilon_mean:
        return 0.0
    sigma = float(s.std())
    return max(0.0, 1.0 - sigma / mu)


def resolution_term(h: int, w: int, h_m: int = 720, w_m: int = 1280) -> float:
    if min(h, w, h_m, w_m) <= 0:
        raise ValueError("dimensions must be positive")
    return math.sqrt(h * w) / math.sqrt(h_m * w_m)


def key_frame_indices(frame_count: int, count: int) -> list[int]:
    """``count`` evenly spaced indices over [0, frame_count - 1], both ends included."""
    if frame_count < 1:
        raise ValueError("empty clip")
    if count == 1 or frame_count == 1:
        return [0]
    pos = np.linspace(0, frame_count - 1, count)
    return sorted({int(math.floor(p + 0.5)) for p in pos})


def hardware_lambda(clip: Clip, cfg: ClassifierConfig = ClassifierConfig(),
                    keys: list[int] | None = None) -> float:
    keys = key_frame_indices(len(clip), cfg.key_frame_count) if keys is None else keys
    even = float(np.mean([unevenness_term(clip[i], cfg.epsilon_mean) for i in keys]))
    return min(even / cfg.evenness_bound, resolution_term(clip.height, clip.width, cfg.h_m, cfg.w_m))


def confidence(clip: Clip, cfg: ClassifierConfig = ClassifierConfig(),
               quality: QualityPredictor | None = None) -> Classification:
    keys = key_frame_indices(len(clip), cfg.key_frame_count)
    lam = hardware_lambda(clip, cfg, keys)
    if lam <= 1.0:
        x = min(max(cfg.alpha * lam, 0.0), cfg.alpha)
        return Classification(lam, x, UGC, HARDWARE_LIMITED)
    if quality is None:
        raise ValueError("a quality predictor is required for quality-limited clips (lambda > 1)")
    scores = [min(max(float(quality(clip[i])), 0.0), 100.0) for i in keys]
    q = float(np.mean(scores))
    if cfg.invert_quality:
        q = 100.0 - q
    x = cfg.alpha + (1.0 - cfg.alpha) * q / 100.0
    x = min(max(x, cfg.alpha), 1.0)
    label = PGC if x < cfg.pgc_ogc_threshold else OGC
    return Classification(lam, x, label, QUALITY_LIMITED, q)
