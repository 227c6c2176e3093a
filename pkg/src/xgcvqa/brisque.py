"""BRISQUE natural-scene-statistics features and SVR score prediction.

Feature layout (36 values, two scales of 18)::

    scale s in (full, half):
        0  ggd_shape        MSCN coefficients
        1  ggd_variance
        2+4k  aggd_shape    pairwise products, k = 0..3 for H, V, D1, D2
        3+4k  aggd_mean
        4+4k  aggd_left_variance
        5+4k  aggd_right_variance

The half scale comes from a 2x2 box average (odd trailing row/column
dropped). Scores are on 0-100 with higher meaning more distorted.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.special import gammaln

from .media_io import Clip, LumaFrame

KERNEL_SIZE = 7
KERNEL_SIGMA = 7.0 / 6.0
# C = 1 on the 0-255 scale.
MSCN_C = 1.0 / 255.0
SHAPE_GRID = np.arange(200, 10001) / 1000.0
FEATURES_PER_SCALE = 18
N_FEATURES = 2 * FEATURES_PER_SCALE
ORIENTATIONS = ("H", "V", "D1", "D2")

FEATURE_NAMES = tuple(
    f"s{s}_{name}"
    for s in (1, 2)
    for name in ["ggd_shape", "ggd_variance"] + [
        f"{o}_{p}" for o in ORIENTATIONS
        for p in ("aggd_shape", "aggd_mean", "aggd_left_variance", "aggd_right_variance")
    ]
)


def gaussian_kernel_1d(size: int = KERNEL_SIZE, sigma: float = KERNEL_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return k / k.sum()


def _as_array(frame) -> np.ndarray:
    return frame.samples if isinstance(frame, LumaFrame) else np.asarray(frame, dtype=np.float64)


def local_stats(frame) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian-weighted local mean and deviation (7x7, sigma 7/6, reflect borders)."""
    img = _as_array(frame)
    if img.shape[0] < KERNEL_SIZE or img.shape[1] < KERNEL_SIZE:
        raise ValueError(f"frame too small for local statistics: {img.shape[1]}x{img.shape[0]}")
    k = gaussian_kernel_1d()

    def blur(a):
        a = ndimage.correlate1d(a, k, axis=0, mode="reflect")
        return ndimage.correlate1d(a, k, axis=1, mode="reflect")

    mu = blur(img)
    var = blur(img * img) - mu * mu
    sigma = np.sqrt(np.maximum(var, 0.0))
    return mu, sigma


def mscn(frame) -> np.ndarray:
    """Mean-subtracted contrast-normalized coefficients, same shape as the frame."""
    img = _as_array(frame)
    mu, sigma = local_stats(img)
    if img.min() == img.max():
        # exact zeros instead of blur round-off, so flat frames hit the fit fallbacks
        return np.zeros_like(img)
    return (img - mu) / (sigma + MSCN_C)


def pairwise_products(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Horizontal, vertical and both diagonal neighbour products."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape[0] < 2 or m.shape[1] < 2:
        raise ValueError("pairwise products need at least a 2x2 field")
    h = m[:, :-1] * m[:, 1:]
    v = m[:-1, :] * m[1:, :]
    d1 = m[:-1, :-1] * m[1:, 1:]
    d2 = m[:-1, 1:] * m[1:, :-1]
    return h, v, d1, d2


@lru_cache(maxsize=1)
def _ggd_ratio_table() -> np.ndarray:
    g = SHAPE_GRID
    return np.exp(gammaln(1.0 / g) + gammaln(3.0 / g) - 2.0 * gammaln(2.0 / g))


@lru_cache(maxsize=1)
def _aggd_ratio_table() -> np.ndarray:
    g = SHAPE_GRID
    return np.exp(2.0 * gammaln(2.0 / g) - gammaln(1.0 / g) - gammaln(3.0 / g))


def ggd_fit(samples) -> tuple[float, float]:
    """Moment-matching GGD fit; returns (shape, variance).

    All-zero input falls back to (grid max, 0).
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError("ggd_fit needs at least 2 samples")
    second = float(np.mean(x * x))
    first_abs = float(np.mean(np.abs(x)))
    if second == 0.0 or first_abs == 0.0:
        return float(SHAPE_GRID[-1]), 0.0
    ratio = second / (first_abs * first_abs)
    idx = int(np.argmin(np.abs(_ggd_ratio_table() - ratio)))
    return float(SHAPE_GRID[idx]), second


def aggd_fit(samples) -> tuple[float, float, float, float]:
    """Asymmetric GGD fit; returns (shape, mean, left_variance, right_variance).

    An empty side contributes zero variance; all-zero input falls back to
    (grid max, 0, 0, 0).
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError("aggd_fit needs at least 2 samples")
    sq = x * x
    neg, pos = x < 0, x > 0
    n_left, n_right = int(np.count_nonzero(neg)), int(np.count_nonzero(pos))
    left_var = float(np.sum(sq, where=neg)) / n_left if n_left else 0.0
    right_var = float(np.sum(sq, where=pos)) / n_right if n_right else 0.0
    second = float(np.mean(sq))
    first_abs = float(np.mean(np.abs(x)))
    if second == 0.0:
        return float(SHAPE_GRID[-1]), 0.0, 0.0, 0.0
    r_hat = first_abs * first_abs / second
    sl, sr = np.sqrt(left_var), np.sqrt(right_var)
    if sr == 0.0:
        # limit of the correction factor as the left/right ratio grows without bound
        correction = 1.0
    else:
        g = sl / sr
        correction = (g ** 3 + 1.0) * (g + 1.0) / (g * g + 1.0) ** 2
    r_norm = r_hat * correction
    idx = int(np.argmin(np.abs(_aggd_ratio_table() - r_norm)))
    shape = float(SHAPE_GRID[idx])
    mean = float((sr - sl) * np.exp(gammaln(2.0 / shape) - 0.5 * (gammaln(1.0 / shape) + gammaln(3.0 / shape))))
    return shape, mean, left_var, right_var


def _scale_features(img: np.ndarray) -> list[float]:
    m = mscn(img)
    out = list(ggd_fit(m))
    for prod in pairwise_products(m):
        out.extend(aggd_fit(prod))
    return out


def box_downsample(img: np.ndarray) -> np.ndarray:
    h, w = (img.shape[0] // 2) * 2, (img.shape[1] // 2) * 2
    a = img[:h, :w]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def features(frame) -> np.ndarray:
    """The 36-dimensional BRISQUE feature vector of a frame."""
    img = _as_array(frame)
    if img.shape[0] < 2 * KERNEL_SIZE or img.shape[1] < 2 * KERNEL_SIZE:
        raise ValueError(f"frame too small for two-scale features: {img.shape[1]}x{img.shape[0]}")
    feats = _scale_features(img) + _scale_features(box_downsample(img))
    return np.asarray(feats, dtype=np.float64)


# --- regression model ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SvrModel:
    """A regression model over min-max scaled features.

    ``kernel == "rbf"`` is a support-vector expansion; ``kernel == "linear"``
    is the ridge fallback (``weights``, ``bias``).
    """

    kernel: str
    feature_min: np.ndarray
    feature_max: np.ndarray
    gamma: float = 0.0
    support_vectors: np.ndarray | None = None
    dual_coefs: np.ndarray | None = None
    rho: float = 0.0
    weights: np.ndarray | None = None
    bias: float = 0.0
    score_range: tuple[float, float] = (0.0, 100.0)

    def __post_init__(self):
        fmin = np.asarray(self.feature_min, dtype=np.float64)
        fmax = np.asarray(self.feature_max, dtype=np.float64)
        if fmin.shape != fmax.shape or fmin.ndim != 1:
            raise ValueError("feature_min and feature_max must be equal-length vectors")
        if not np.all(fmax > fmin):
            raise ValueError("feature_max must exceed feature_min for every feature")
        object.__setattr__(self, "feature_min", fmin)
        object.__setattr__(self, "feature_max", fmax)
        d = fmin.size
        if self.kernel == "rbf":
            sv = np.atleast_2d(np.asarray(self.support_vectors, dtype=np.float64))
            coefs = np.asarray(self.dual_coefs, dtype=np.float64).ravel()
            if sv.shape[0] < 1 or sv.shape[1] != d or coefs.size != sv.shape[0]:
                raise ValueError("support_vectors must be [n_sv x n_features] with n_sv dual_coefs")
            object.__setattr__(self, "support_vectors", sv)
            object.__setattr__(self, "dual_coefs", coefs)
        elif self.kernel == "linear":
            w = np.asarray(self.weights, dtype=np.float64).ravel()
            if w.size != d:
                raise ValueError("linear model needs one weight per feature")
            object.__setattr__(self, "weights", w)
        else:
            raise ValueError(f"unknown kernel {self.kernel!r}")

    @property
    def n_features(self) -> int:
        return self.feature_min.size

    def scale(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64)
        if f.shape[-1] != self.n_features:
            raise ValueError(f"feature dimension {f.shape[-1]} does not match model ({self.n_features})")
        return 2.0 * (f - self.feature_min) / (self.feature_max - self.feature_min) - 1.0

    def to_dict(self) -> dict:
        d = {"kernel": self.kernel,
             "feature_min": self.feature_min.tolist(),
             "feature_max": self.feature_max.tolist()}
        if self.kernel == "rbf":
            d.update(gamma=self.gamma, rho=self.rho,
                     support_vectors=self.support_vectors.tolist(),
                     dual_coefs=self.dual_coefs.tolist())
        else:
            d.update(weights=self.weights.tolist(), bias=self.bias)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SvrModel":
        kernel = d.get("kernel")
        try:
            if kernel == "rbf":
                return cls(kernel="rbf", feature_min=d["feature_min"], feature_max=d["feature_max"],
                           gamma=float(d["gamma"]), rho=float(d["rho"]),
                           support_vectors=d["support_vectors"], dual_coefs=d["dual_coefs"])
            if kernel == "linear":
                return cls(kernel="linear", feature_min=d["feature_min"], feature_max=d["feature_max"],
                           weights=d["weights"], bias=float(d["bias"]))
        except KeyError as exc:
            raise ValueError(f"model file lacks field {exc.args[0]!r}") from None
        raise ValueError(f"unknown kernel {kernel!r}")


def load_model(path) -> SvrModel:
    with open(path, encoding="utf-8") as fh:
        return SvrModel.from_dict(json.load(fh))


def save_model(model: SvrModel, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(model.to_dict()), encoding="utf-8")
    tmp.replace(path)


def raw_prediction(f, model: SvrModel) -> float:
    """Model output before clamping to the score range."""
    z = model.scale(f)
    if model.kernel == "linear":
        return float(z @ model.weights + model.bias)
    diff = model.support_vectors - z
    k = np.exp(-model.gamma * np.einsum("ij,ij->i", diff, diff))
    return float(k @ model.dual_coefs - model.rho)


def predict(f, model: SvrModel) -> float:
    """Quality score in [0, 100] (higher = more distorted)."""
    lo, hi = model.score_range
    return float(min(max(raw_prediction(f, model), lo), hi))


class BrisquePredictor:
    """Frame -> score callable; immutable, safe to share between threads."""

    def __init__(self, model: SvrModel):
        self.model = model

    def __call__(self, frame) -> float:
        return predict(features(frame), self.model)


def score_clip(clip: Clip, plan, model: SvrModel | None = None, *, predictor=None,
               prepare=None) -> float:
    """Mean score over the frames selected by ``plan``.

    ``plan`` is a SamplingPlan or a sequence of frame indices; ``prepare``
    optionally maps each frame (e.g. crop + fragment) before prediction.
    """
    indices: Sequence[int] = getattr(plan, "indices", plan)
    if len(indices) == 0:
        raise ValueError("empty sampling plan")
    if predictor is None:
        if model is None:
            raise ValueError("score_clip needs a model or a predictor")
        predictor = BrisquePredictor(model)
    scores = []
    for i in indices:
        frame = clip[i]
        if prepare is not None:
            frame = prepare(frame)
        scores.append(predictor(frame))
    return float(np.mean(scores))
