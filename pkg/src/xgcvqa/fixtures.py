"""Deterministic synthetic clips and datasets for tests, benchmarks and demos.

Every generator is keyed on an integer seed and produces 8-bit code values,
so clips written to Y4M decode back bit-identically.
"""
from __future__ import annotations

import dataclasses
import math
from pathlib import Path

import numpy as np

from . import temporal
from .brisque import features
from .calibrate import train_fallback_regressor
from .classify import ClassifierConfig, confidence
from .media_io import Clip, LumaFrame, write_manifest, write_y4m
from .pipeline import PipelineConfig, crop_for, prepare_frame
from .spatial import FragmentConfig

SIGMA_MAX = 0.06


def quantize(values: np.ndarray) -> LumaFrame:
    codes = np.clip(np.floor(values * 255.0 + 0.5), 0, 255).astype(np.uint8)
    return LumaFrame.from_codes(codes, 8)


def texture(h: int, w: int, seed: int, contrast: float = 0.12, mean: float = 0.5,
            n_waves: int = 6) -> np.ndarray:
    """Smooth separable-cosine texture with the requested mean and amplitude."""
    rng = np.random.default_rng([seed, 101])
    y = np.arange(h)[:, None] / h
    x = np.arange(w)[None, :] / w
    out = np.zeros((h, w))
    for _ in range(n_waves):
        fy, fx = rng.uniform(1.0, 12.0, size=2)
        py, px = rng.uniform(0.0, 2.0 * math.pi, size=2)
        out += np.cos(2 * math.pi * fy * y + py) * np.cos(2 * math.pi * fx * x + px)
    out /= np.abs(out).max() or 1.0
    return mean + contrast * out


def vignette(h: int, w: int, strength: float) -> np.ndarray:
    y = (np.arange(h)[:, None] - (h - 1) / 2) / (h / 2)
    x = (np.arange(w)[None, :] - (w - 1) / 2) / (w / 2)
    return np.clip(1.0 - strength * (x * x + y * y) / 2.0, 0.0, 1.0)


def blobs(h: int, w: int, seed: int, count: int = 6, background: float = 0.06,
          peak: float = 0.85) -> np.ndarray:
    """Dark frame with a few bright Gaussian spots: very uneven luminance."""
    rng = np.random.default_rng([seed, 202])
    y = np.arange(h)[:, None]
    x = np.arange(w)[None, :]
    out = np.full((h, w), background)
    for _ in range(count):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        r = rng.uniform(0.03, 0.07) * min(h, w)
        out += (peak - background) * np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / (2 * r * r))
    return np.clip(out, 0.0, 1.0)


def noise_field(h: int, w: int, seed: int) -> np.ndarray:
    return np.random.default_rng([seed, 303]).standard_normal((h, w))


def lazy_clip(frame_fn, frame_count: int, width: int, height: int, name: str = "") -> Clip:
    return Clip(loader=frame_fn, frame_count=frame_count, width=width, height=height,
                bit_depth=8, name=name)


# --- classifier corpus ----------------------------------------------------------------

def low_res_uneven_clip(seed: int, width: int = 480, height: int = 270, frames: int = 3) -> Clip:
    """Small, noisy, vignetted footage: hardware-limited by construction."""
    base = texture(height, width, seed, contrast=0.2) * vignette(height, width, 1.2)

    def load(i):
        z = np.random.default_rng([seed, 404, i]).standard_normal((height, width))
        return quantize(base + 0.05 * z)

    return lazy_clip(load, frames, width, height, f"ugc_{seed:03d}")


def high_res_uniform_clip(seed: int, width: int = 1600, height: int = 900, frames: int = 3) -> Clip:
    """Large, evenly lit, low-contrast footage: beyond both hardware bounds."""
    base = texture(height, width, seed, contrast=0.1, mean=0.55)

    def load(i):
        z = np.random.default_rng([seed, 505, i]).standard_normal((height, width))
        return quantize(base + 0.01 * z)

    return lazy_clip(load, frames, width, height, f"hq_{seed:03d}")


def classifier_corpus(n_each: int = 20, seed: int = 0) -> list[tuple[Clip, bool]]:
    """(clip, expect_lambda_above_one) pairs: n_each of each kind."""
    low = [(low_res_uneven_clip(seed * 1000 + k), False) for k in range(n_each)]
    high = [(high_res_uniform_clip(seed * 1000 + k), True) for k in range(n_each)]
    return low + high


# --- latency clip -------------------------------------------------------------------------

def latency_clip(width: int = 1920, height: int = 1080, frames: int = 150, seed: int = 0) -> Clip:
    base = texture(height, width, seed, contrast=0.15)

    def load(i):
        z = np.random.default_rng([seed, 606, i]).standard_normal((height, width))
        return quantize(base + 0.02 * z)

    return lazy_clip(load, frames, width, height, "latency")


# --- fixture quality model ------------------------------------------------------------------

def training_frames(count: int = 60, size: tuple[int, int] = (256, 384), seed: int = 0):
    """Frames with known additive-noise level, from both content families."""
    h, w = size
    rng = np.random.default_rng([seed, 707])
    out = []
    for k in range(count):
        sigma = SIGMA_MAX * k / (count - 1)
        kind = k % 2
        base = texture(h, w, seed + k) if kind == 0 else blobs(h, w, seed + k)
        out.append((quantize(base + sigma * rng.standard_normal((h, w))), sigma))
    return out


def fixture_model(seed: int = 0, fragment: FragmentConfig = FragmentConfig()):
    """Ridge model mapping fragment features to 100 * sigma / SIGMA_MAX."""
    feats, targets = [], []
    cfg = PipelineConfig(fragment=fragment, disable_spatial=True)
    for frame, sigma in training_frames(seed=seed):
        rect = crop_for(frame.height, frame.width, 0.0, cfg)
        feats.append(features(prepare_frame(frame, rect, cfg)))
        targets.append(100.0 * sigma / SIGMA_MAX)
    return train_fallback_regressor(np.array(feats), np.array(targets), ridge=1e-3)


# --- ablation dataset --------------------------------------------------------------------------

ABLATION_SIZE = (256, 384)
ABLATION_CLASSIFIER = ClassifierConfig(h_m=256, w_m=384)


def _importance(frame_count: int, x: float) -> np.ndarray:
    t = np.arange(frame_count) / max(frame_count - 1, 1)
    return temporal.density(t, x)


def ablation_clip(seed: int, kind: str, frames: int = 20):
    """One clip of the ablation dataset and its injected MOS.

    Perceived distortion is the noise level inside the central region,
    averaged over time with the linear importance for the clip's
    confidence. Two nuisance factors are only removable by the matching
    module: kind ``"temporal"`` clips (dark and uneven, x = 0) spend a fixed
    total noise budget that moves between start and end, and kind
    ``"spatial"`` clips (evenly lit, x = 0.5) carry strong unrelated noise
    in the border band that the central crop discards.
    """
    h, w = ABLATION_SIZE
    rng = np.random.default_rng([seed, 808])
    z = noise_field(h, w, seed)
    if kind == "temporal":
        base = blobs(h, w, seed)
        a = rng.uniform(0.0, SIGMA_MAX)
        t = np.arange(frames) / (frames - 1)
        sigma = a + (SIGMA_MAX - 2 * a) * t
        border = np.zeros((h, w), dtype=bool)
        border_sigma = 0.0
    elif kind == "spatial":
        base = texture(h, w, seed, contrast=0.12)
        sigma = np.full(frames, rng.uniform(0.0, SIGMA_MAX))
        rect = crop_for(h, w, 0.5, PipelineConfig())
        border = np.ones((h, w), dtype=bool)
        border[rect.row_start:rect.row_end, rect.col_start:rect.col_end] = False
        border_sigma = rng.uniform(0.05, 0.2)
    else:
        raise ValueError(f"unknown ablation clip kind {kind!r}")
    bz = noise_field(h, w, seed + 7919)

    def load(i):
        v = base + sigma[i] * z
        v = np.where(border, base + border_sigma * bz, v)
        return quantize(v)

    clip = lazy_clip(load, frames, w, h, f"{kind}_{seed:03d}")
    x = confidence(clip, ABLATION_CLASSIFIER).x
    wts = _importance(frames, x)
    distortion = float(wts @ sigma / wts.sum())
    mos = 5.0 - 4.0 * distortion / SIGMA_MAX
    return clip, mos, x


def ablation_config() -> PipelineConfig:
    return PipelineConfig(classifier=ABLATION_CLASSIFIER)


def write_config(path, cfg: PipelineConfig) -> None:
    lines = ["[classifier]"]
    lines += [f"{f.name} = {getattr(cfg.classifier, f.name)}" for f in dataclasses.fields(cfg.classifier)]
    lines += ["", "[fragment]"]
    lines += [f"{f.name} = {getattr(cfg.fragment, f.name)}" for f in dataclasses.fields(cfg.fragment)]
    lines += ["", "[pipeline]",
              f"temporal_budget = {cfg.temporal_budget}",
              f"disable_spatial = {cfg.disable_spatial}",
              f"disable_temporal = {cfg.disable_temporal}",
              f"reverse_density = {cfg.reverse_density}"]
    if cfg.model_path:
        lines.append(f"model_path = {cfg.model_path}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_ablation_dataset(out_dir, n_each: int = 20, frames: int = 20, seed: int = 0) -> Path:
    """Write clips, manifest.csv, model.json and config.ini; returns the manifest path."""
    from .brisque import save_model

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for k in range(n_each):
        for kind in ("temporal", "spatial"):
            clip, mos, _ = ablation_clip(seed * 1000 + k, kind, frames)
            fname = f"{clip.name}.y4m"
            write_y4m(out / fname, clip)
            rows.append({"clip_id": clip.name, "path": fname, "kind": "y4m", "mos": repr(mos)})
    write_manifest(out / "manifest.csv", rows)
    save_model(fixture_model(seed), out / "model.json")
    write_config(out / "config.ini", dataclasses.replace(ablation_config(), model_path="model.json"))
    return out / "manifest.csv"


# --- calibration datasets ---------------------------------------------------------------------

def calibration_clip(seed: int, front_degraded: bool, frames: int = 20, size: tuple[int, int] = (128, 192)):
    """Noise level that tracks MOS in the first half only (or everywhere, if symmetric)."""
    h, w = size
    rng = np.random.default_rng([seed, 909])
    signal = rng.uniform(0.0, SIGMA_MAX)
    nuisance = rng.uniform(0.0, SIGMA_MAX)
    base = texture(h, w, seed)
    z = noise_field(h, w, seed)
    half = frames // 2
    sigma = np.full(frames, signal)
    if front_degraded:
        sigma[half:] = nuisance

    def load(i):
        return quantize(base + sigma[i] * z)

    clip = lazy_clip(load, frames, w, h, f"cal_{seed:03d}")
    return clip, 5.0 - 4.0 * signal / SIGMA_MAX


def write_calibration_dataset(out_dir, front_degraded: bool, n_clips: int = 12, frames: int = 20,
                              seed: int = 0) -> Path:
    from .brisque import save_model

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for k in range(n_clips):
        clip, mos = calibration_clip(seed * 1000 + k, front_degraded, frames)
        fname = f"{clip.name}.y4m"
        write_y4m(out / fname, clip)
        rows.append({"clip_id": clip.name, "path": fname, "kind": "y4m", "mos": repr(mos)})
    write_manifest(out / "manifest.csv", rows)
    save_model(fixture_model(seed), out / "model.json")
    return out / "manifest.csv"


# --- corpus writers for the CLI ------------------------------------------------------------------

def write_classifier_corpus(out_dir, n_each: int = 20, seed: int = 0) -> Path:
    """Write the classifier corpus as Y4M plus a manifest (mos column left empty)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for clip, above in classifier_corpus(n_each, seed):
        fname = f"{clip.name}.y4m"
        write_y4m(out / fname, clip)
        rows.append({"clip_id": clip.name, "path": fname, "kind": "y4m", "mos": None})
    write_manifest(out / "manifest.csv", rows)
    return out / "manifest.csv"


def write_latency_clip(out_dir, frames: int = 150, seed: int = 0) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "latency_1080p.y4m"
    write_y4m(path, latency_clip(frames=frames, seed=seed))
    return path
