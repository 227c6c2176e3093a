"""Temporal weight estimation from per-segment quality vs subjective scores.

Each clip is cut into ``n`` contiguous segments; segment ``i`` is scored on
its own, and its weight is the rank correlation, across clips, between the
segment scores and MOS. The first/last weight ratio maps back to the
confidence parameter through ``ratio = 5 / (3 + 3x)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .brisque import BrisquePredictor, SvrModel
from .media_io import Clip, LumaFrame
from .stats import srocc

WEIGHT_FLOOR = 0.01


@dataclass(frozen=True)
class SegmentSeries:
    clip_id: str
    scores: tuple[float, ...]

    def __post_init__(self):
        if len(self.scores) < 2:
            raise ValueError("a segment series needs at least 2 segments")

    @property
    def n_segments(self) -> int:
        return len(self.scores)


@dataclass(frozen=True)
class WeightEstimate:
    weights: tuple[float, ...]
    ratio_first_last: float
    x_implied: float
    correlations: tuple[float, ...]
    n_clips: int

    @property
    def n_segments(self) -> int:
        return len(self.weights)

    def to_dict(self) -> dict:
        return {"weights": list(self.weights), "ratio_first_last": self.ratio_first_last,
                "x_implied": self.x_implied, "n_segments": self.n_segments,
                "n_clips": self.n_clips, "correlations": list(self.correlations)}


def segment_bounds(frame_count: int, n_segments: int) -> list[tuple[int, int]]:
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    if frame_count < n_segments:
        raise ValueError(f"too few frames: {frame_count} frames for {n_segments} segments")
    step = frame_count // n_segments
    bounds = [(i * step, (i + 1) * step) for i in range(n_segments)]
    bounds[-1] = (bounds[-1][0], frame_count)
    return bounds


def segment_series_from_frame_scores(frame_scores, n_segments: int = 10, stride: int = 5,
                                     clip_id: str = "") -> SegmentSeries:
    """Segment means of precomputed per-frame scores, every ``stride``-th frame."""
    s = np.asarray(frame_scores, dtype=np.float64)
    out = [float(s[a:b:stride].mean()) for a, b in segment_bounds(s.size, n_segments)]
    return SegmentSeries(clip_id, tuple(out))


def segment_scores(clip: Clip, n_segments: int = 10, model: SvrModel | None = None, *,
                   stride: int = 5,
                   predictor: Callable[[LumaFrame], float] | None = None) -> SegmentSeries:
    """Mean quality score of each contiguous segment, every ``stride``-th frame."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if predictor is None:
        if model is None:
            raise ValueError("segment_scores needs a model or a predictor")
        predictor = BrisquePredictor(model)
    out = []
    for a, b in segment_bounds(len(clip), n_segments):
        out.append(float(np.mean([predictor(clip[i]) for i in range(a, b, stride)])))
    return SegmentSeries(clip.name or "", tuple(out))


def ratio_from_x(x: float) -> float:
    return 5.0 / (3.0 + 3.0 * x)


def x_from_ratio(ratio: float) -> float:
    if not ratio > 0:
        raise ValueError("ratio must be positive")
    return min(max((5.0 / ratio - 3.0) / 3.0, 0.0), 1.0)


def estimate_weights(dataset: Sequence[tuple[SegmentSeries, float]], *,
                     floor: float = WEIGHT_FLOOR,
                     distortion_scores: bool = True) -> WeightEstimate:
    """Per-segment weights proportional to max(floor, SRoCC(Q_i, MOS)).

    With ``distortion_scores`` (the default, matching the BRISQUE
    convention of higher = worse) segment scores are negated before
    correlating so that a predictive segment earns a positive weight.
    """
    if len(dataset) < 5:
        raise ValueError(f"need at least 5 clips, got {len(dataset)}")
    n = {s.n_segments for s, _ in dataset}
    if len(n) != 1:
        raise ValueError(f"mismatched n_segments across clips: {sorted(n)}")
    mos = np.array([float(m) for _, m in dataset])
    q = np.array([s.scores for s, _ in dataset], dtype=np.float64)
    sign = -1.0 if distortion_scores else 1.0
    corr = []
    for i in range(q.shape[1]):
        col = q[:, i]
        # a constant column carries no ranking signal; skip the degenerate warning
        corr.append(0.0 if np.all(col == col[0]) else srocc(sign * col, mos))
    raw = np.maximum(floor, np.asarray(corr))
    w = raw / raw.sum()
    ratio = float(w[0] / w[-1])
    return WeightEstimate(tuple(float(v) for v in w), ratio, x_from_ratio(ratio),
                          tuple(float(c) for c in corr), len(dataset))


def train_fallback_regressor(feats, targets, ridge: float = 1e-3) -> SvrModel:
    """Ridge regression on [-1, 1]-scaled features, emitted as a ``linear`` model.

    The intercept is not penalized. Features with no spread get a unit
    range so the model file stays valid; they scale to a constant.
    """
    X = np.asarray(feats, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("features must be [n_samples x n_features] matching targets")
    if X.shape[0] < 10:
        raise ValueError(f"need at least 10 samples, got {X.shape[0]}")
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    fmin = X.min(axis=0)
    fmax = X.max(axis=0)
    flat = fmax <= fmin
    fmax = np.where(flat, fmin + 1.0, fmax)
    Z = 2.0 * (X - fmin) / (fmax - fmin) - 1.0
    zm = Z.mean(axis=0)
    ym = float(y.mean())
    Zc = Z - zm
    w = np.linalg.solve(Zc.T @ Zc + ridge * np.eye(Z.shape[1]), Zc.T @ (y - ym))
    return SvrModel(kernel="linear", feature_min=fmin, feature_max=fmax,
                    weights=w, bias=ym - float(zm @ w))


def distortion_targets(mos, lo: float | None = None, hi: float | None = None) -> np.ndarray:
    """Map MOS (higher = better) onto the 0-100 distortion scale (higher = worse)."""
    m = np.asarray(mos, dtype=np.float64)
    lo = float(m.min()) if lo is None else lo
    hi = float(m.max()) if hi is None else hi
    if hi <= lo:
        return np.full(m.shape, 50.0)
    return 100.0 * (hi - m) / (hi - lo)

