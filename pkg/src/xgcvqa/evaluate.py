"""Repeated 80/20 split benchmarking and ablation tables."""
from __future__ import annotations

import csv
import io
import math
import statistics
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .brisque import BrisquePredictor, SvrModel
from .media_io import DatasetManifest, DecodeError, ManifestEntry, open_clip, read_frame_scores
from .pipeline import ClipResult, PipelineConfig, score_clip, score_frame_scores
from .stats import DegenerateCorrelationWarning, krocc, plcc, srocc

ABLATIONS = ("None", "Spatial", "Temporal", "All")
METRICS = ("srocc", "krocc", "plcc")

# entry -> higher-is-better prediction; bypasses the pipeline (harness self-checks)
Scorer = Callable[[ManifestEntry], float]


@dataclass
class ClipOutcome:
    clip_id: str
    mos: float
    predicted: float
    elapsed_ms: float
    decode_ms: float
    result: ClipResult | None = None


@dataclass
class EvaluationReport:
    config_digest: str
    ablation: str
    repeats: int
    split_seed: int
    n_clips: int
    n_test: int
    per_repeat: list[dict]
    full_set: dict
    outcomes: list[ClipOutcome]
    failures: dict[str, str] = field(default_factory=dict)
    concurrency: int = 1
    logistic: bool = False

    def aggregate(self, fn) -> dict:
        return {m: float(fn([r[m] for r in self.per_repeat])) for m in METRICS}

    @property
    def mean(self) -> dict:
        return self.aggregate(statistics.fmean)

    @property
    def median(self) -> dict:
        return self.aggregate(statistics.median)

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "config_digest": self.config_digest,
            "ablation": self.ablation,
            "repeats": self.repeats,
            "split_seed": self.split_seed,
            "n_clips": self.n_clips,
            "n_test": self.n_test,
            "plcc_logistic": self.logistic,
            "per_repeat": self.per_repeat,
            "mean": self.mean,
            "median": self.median,
            "full_set": self.full_set,
            "concurrency": self.concurrency,
            "failures": dict(sorted(self.failures.items())),
            "timing": None,
        }
        if timing:
            ms = [o.elapsed_ms for o in self.outcomes]
            dec = [o.decode_ms for o in self.outcomes]
            d["timing"] = {
                "per_clip_ms": [round(v, 3) for v in ms],
                "mean_ms": round(statistics.fmean(ms), 3) if ms else None,
                "median_ms": round(statistics.median(ms), 3) if ms else None,
                "decode_per_clip_ms": [round(v, 3) for v in dec],
                "decode_mean_ms": round(statistics.fmean(dec), 3) if dec else None,
            }
        return d

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["clip_id", "predicted", "mos", "ms"])
        for o in self.outcomes:
            w.writerow([o.clip_id, repr(o.predicted), repr(o.mos),
                        f"{o.elapsed_ms:.3f}" if timing else ""])
        return buf.getvalue()


def correlations(pred, mos, logistic: bool = False) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateCorrelationWarning)
        return {"srocc": srocc(pred, mos), "krocc": krocc(pred, mos), "plcc": plcc(pred, mos, logistic)}


def split_indices(n: int, seed: int, repeat: int, test_fraction: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffle keyed on (seed, repeat); at least 2 test items."""
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, repeat])
    perm = rng.permutation(n)
    n_test = max(2, n - int(math.floor((1.0 - test_fraction) * n + 0.5)))
    return perm[n_test:], perm[:n_test]


def evaluate_entry(entry: ManifestEntry, cfg: PipelineConfig, predictor) -> ClipOutcome:
    if entry.input_kind == "scores_file":
        scores, x = read_frame_scores(entry.path)
        res = score_frame_scores(scores, x, cfg, entry.clip_id)
    else:
        clip = open_clip(entry)
        res = score_clip(clip, cfg, predictor=predictor, clip_id=entry.clip_id)
    return ClipOutcome(entry.clip_id, float(entry.mos), res.quality, res.elapsed_ms, res.decode_ms, res)


def score_entries(entries: list[ManifestEntry], cfg: PipelineConfig, model: SvrModel | None = None,
                  scorer: Scorer | None = None) -> tuple[list[ClipOutcome], dict[str, str]]:
    """Score every entry once, in clip_id order; failures are collected, not raised."""
    predictor = BrisquePredictor(model) if model is not None else None
    entries = sorted(entries, key=lambda e: e.clip_id)

    def run(entry):
        try:
            if scorer is not None:
                return ClipOutcome(entry.clip_id, float(entry.mos), float(scorer(entry)), 0.0, 0.0)
            if predictor is None and entry.input_kind != "scores_file":
                raise ValueError("no quality model configured")
            return evaluate_entry(entry, cfg, predictor)
        except (DecodeError, OSError, ValueError) as exc:
            return f"{type(exc).__name__}: {exc}"

    if cfg.concurrency > 1:
        with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
            results = list(pool.map(run, entries))
    else:
        results = [run(e) for e in entries]
    outcomes, failures = [], {}
    for e, r in zip(entries, results):
        if isinstance(r, ClipOutcome):
            outcomes.append(r)
        else:
            failures[e.clip_id] = r
    return outcomes, failures


def run_benchmark(manifest: DatasetManifest, cfg: PipelineConfig, repeats: int = 10, seed: int = 0, *,
                  model: SvrModel | None = None, scorer: Scorer | None = None,
                  logistic: bool = False) -> EvaluationReport:
    """Score all clips through the pipeline, then correlate on ``repeats`` random 20% test splits.

    The pipeline has no trained state, so each clip is scored once and the
    splits only choose which predictions enter each repeat.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    entries = manifest.scoreable()
    if len(entries) < 5:
        raise ValueError(f"need at least 5 scoreable entries, got {len(entries)}")
    outcomes, failures = score_entries(entries, cfg, model, scorer)
    if len(outcomes) < 5:
        raise ValueError(f"only {len(outcomes)} clips scored; failures: {failures}")
    pred = np.array([o.predicted for o in outcomes])
    mos = np.array([o.mos for o in outcomes])
    per_repeat = []
    n_test = 0
    for r in range(repeats):
        _, test = split_indices(len(outcomes), seed, r)
        test = np.sort(test)
        n_test = test.size
        per_repeat.append(correlations(pred[test], mos[test], logistic))
    return EvaluationReport(
        config_digest=cfg.digest(), ablation=cfg.ablation, repeats=repeats, split_seed=seed,
        n_clips=len(outcomes), n_test=n_test, per_repeat=per_repeat,
        full_set=correlations(pred, mos, logistic), outcomes=outcomes, failures=failures,
        concurrency=cfg.concurrency, logistic=logistic)


def run_ablation_table(manifest: DatasetManifest, cfg: PipelineConfig, repeats: int = 10, seed: int = 0,
                       *, model: SvrModel | None = None, scorer: Scorer | None = None,
                       logistic: bool = False, labels=ABLATIONS) -> list[EvaluationReport]:
    """One report per abandoned-module configuration (None, Spatial, Temporal, All)."""
    return [run_benchmark(manifest, cfg.with_ablation(label), repeats, seed, model=model,
                          scorer=scorer, logistic=logistic) for label in labels]
