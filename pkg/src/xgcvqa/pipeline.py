"""End-to-end scoring: classify -> crop -> fragment -> temporal sample -> predict."""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import spatial, temporal
from .brisque import BrisquePredictor, SvrModel
from .classify import Classification, ClassifierConfig, confidence
from .media_io import Clip, LumaFrame
from .spatial import CropRect, FragmentConfig


class ConfigError(ValueError):
    """Invalid pipeline configuration."""


@dataclass(frozen=True)
class PipelineConfig:
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    fragment: FragmentConfig = field(default_factory=FragmentConfig)
    temporal_budget: int = 10
    disable_spatial: bool = False
    disable_temporal: bool = False
    reverse_density: bool = False
    model_path: str | None = None
    concurrency: int = 1

    def __post_init__(self):
        if self.temporal_budget < 1:
            raise ConfigError("temporal_budget must be >= 1")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")

    @property
    def ablation(self) -> str:
        """Which modules are abandoned, in the None/Spatial/Temporal/All vocabulary."""
        return {(False, False): "None", (True, False): "Spatial",
                (False, True): "Temporal", (True, True): "All"}[(self.disable_spatial, self.disable_temporal)]

    def with_ablation(self, label: str) -> "PipelineConfig":
        flags = {"none": (False, False), "spatial": (True, False),
                 "temporal": (False, True), "all": (True, True)}
        try:
            s, t = flags[label.lower()]
        except KeyError:
            raise ConfigError(f"unknown ablation {label!r}") from None
        return dataclasses.replace(self, disable_spatial=s, disable_temporal=t)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Hash of everything that affects scores (not paths or parallelism)."""
        d = self.to_dict()
        d.pop("model_path")
        d.pop("concurrency")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_SECTIONS = {"classifier": ClassifierConfig, "fragment": FragmentConfig}
_PIPELINE_KEYS = ("temporal_budget", "disable_spatial", "disable_temporal", "reverse_density",
                  "model_path", "concurrency")


def _coerce(section: configparser.SectionProxy, key: str, default):
    try:
        if isinstance(default, bool):
            return section.getboolean(key)
        if isinstance(default, int):
            return section.getint(key)
        if isinstance(default, float):
            return section.getfloat(key)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key}: {exc}") from None
    return section.get(key)


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Read an INI config file (sections classifier, fragment, pipeline).

    ``overrides`` maps dotted keys such as ``"fragment.seed"`` or
    ``"temporal_budget"`` to values and wins over the file.
    """
    parts: dict[str, dict] = {"classifier": {}, "fragment": {}, "pipeline": {}}
    if path is not None:
        cp = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        for name in cp.sections():
            if name not in parts:
                raise ConfigError(f"unknown config section [{name}]")
            sec = cp[name]
            if name == "pipeline":
                defaults = PipelineConfig()
                for key in sec:
                    if key not in _PIPELINE_KEYS:
                        raise ConfigError(f"unknown key {key!r} in [pipeline]")
                    parts["pipeline"][key] = _coerce(sec, key, getattr(defaults, key) if key != "model_path" else "")
            else:
                cls = _SECTIONS[name]
                defaults = cls()
                for key in sec:
                    if not hasattr(defaults, key):
                        raise ConfigError(f"unknown key {key!r} in [{name}]")
                    parts[name][key] = _coerce(sec, key, getattr(defaults, key))
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        sec, _, key = dotted.rpartition(".")
        parts[sec or "pipeline"][key] = value
    try:
        return PipelineConfig(classifier=ClassifierConfig(**parts["classifier"]),
                              fragment=FragmentConfig(**parts["fragment"]),
                              **parts["pipeline"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


class _TimedFrames:
    """Caches fetched frames and accumulates time spent decoding them."""

    def __init__(self, clip: Clip):
        self.clip = clip
        self.decode_s = 0.0
        self._cache: dict[int, LumaFrame] = {}

    def __len__(self):
        return len(self.clip)

    def __getitem__(self, i: int) -> LumaFrame:
        if i not in self._cache:
            t0 = time.perf_counter()
            self._cache[i] = self.clip[i]
            self.decode_s += time.perf_counter() - t0
        return self._cache[i]

    # classify only needs geometry plus indexing
    @property
    def width(self):
        return self.clip.width

    @property
    def height(self):
        return self.clip.height


@dataclass
class ClipResult:
    clip_id: str
    classification: Classification | None
    crop: CropRect | None
    plan: temporal.SamplingPlan
    score: float
    elapsed_ms: float
    decode_ms: float

    @property
    def quality(self) -> float:
        """Higher-is-better view of the distortion score."""
        return 100.0 - self.score

    def to_dict(self, timing: bool = True) -> dict:
        c = self.classification
        return {
            "clip_id": self.clip_id,
            "lambda": None if c is None else c.lam,
            "x": self.plan.x_used if c is None else c.x,
            "label": None if c is None else c.label,
            "branch": None if c is None else c.branch,
            "crop": None if self.crop is None else self.crop.to_dict(),
            "plan": self.plan.to_dict(),
            "score": self.score,
            "elapsed_ms": round(self.elapsed_ms, 3) if timing else None,
            "decode_ms": round(self.decode_ms, 3) if timing else None,
        }


def make_plan(frame_count: int, x: float, cfg: PipelineConfig) -> temporal.SamplingPlan:
    if cfg.disable_temporal:
        return temporal.uniform_frames(frame_count, cfg.temporal_budget)
    return temporal.sample_frames(frame_count, cfg.temporal_budget, x, cfg.reverse_density)


def crop_for(height: int, width: int, x: float, cfg: PipelineConfig) -> CropRect:
    if cfg.disable_spatial:
        return CropRect(0, height, 0, width)
    return spatial.central_crop_rect(height, width, x)


def prepare_frame(frame: LumaFrame, rect: CropRect, cfg: PipelineConfig) -> LumaFrame:
    """Crop then splice fragments: the exact input the quality model sees."""
    return spatial.fragment_sample(spatial.apply_crop(frame, rect), cfg.fragment).frame


def classify_clip(clip: Clip, cfg: PipelineConfig,
                  predictor: Callable[[LumaFrame], float] | None = None) -> Classification:
    """Confidence x with key-frame quality taken on uncropped fragments, the model's input domain."""
    if predictor is None:
        return confidence(clip, cfg.classifier)
    return confidence(clip, cfg.classifier,
                      lambda frame: predictor(spatial.fragment_sample(frame, cfg.fragment).frame))


def score_clip(clip: Clip, cfg: PipelineConfig, model: SvrModel | None = None, *,
               predictor: Callable[[LumaFrame], float] | None = None,
               clip_id: str | None = None) -> ClipResult:
    """Run the full pipeline on one clip; decode time is measured separately."""
    if predictor is None:
        if model is None:
            raise ValueError("score_clip needs a model or a predictor")
        predictor = BrisquePredictor(model)
    frames = _TimedFrames(clip)
    t0 = time.perf_counter()
    cls = classify_clip(frames, cfg, predictor)
    rect = crop_for(clip.height, clip.width, cls.x, cfg)
    plan = make_plan(len(clip), cls.x, cfg)
    scores = [predictor(prepare_frame(frames[i], rect, cfg)) for i in plan.indices]
    total = time.perf_counter() - t0
    return ClipResult(clip_id or clip.name or "", cls, rect, plan, float(np.mean(scores)),
                      1000.0 * (total - frames.decode_s), 1000.0 * frames.decode_s)


def score_frame_scores(frame_scores, x: float | None, cfg: PipelineConfig,
                       clip_id: str = "") -> ClipResult:
    """Temporal stage only, for clips given as precomputed per-frame scores."""
    s = np.asarray(frame_scores, dtype=np.float64)
    x = temporal.UNIFORM_X if x is None else float(x)
    t0 = time.perf_counter()
    plan = make_plan(s.size, x, cfg)
    score = float(np.mean(s[list(plan.indices)]))
    return ClipResult(clip_id, None, None, plan, score, 1000.0 * (time.perf_counter() - t0), 0.0)
