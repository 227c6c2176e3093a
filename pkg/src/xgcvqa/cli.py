"""Command-line front end.

Exit codes: 0 success, 1 other failure, 2 input decode failure,
3 invalid configuration, 4 model load failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import brisque, calibrate, evaluate, fixtures, pipeline, spatial, temporal
from .media_io import DecodeError, ManifestError, load_manifest, open_clip, open_input, read_frame_scores

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_DECODE = 2
EXIT_CONFIG = 3
EXIT_MODEL = 4

MODEL_ENV = "XGC_MODEL"
SCORE_SUFFIXES = (".json", ".txt")


class ModelError(RuntimeError):
    pass


# --- helpers ------------------------------------------------------------------------------

def write_output(text: str, path: str | None) -> None:
    """Write to stdout, or atomically to ``path`` (temp file in the same directory + rename)."""
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def build_config(args) -> pipeline.PipelineConfig:
    overrides = {
        "fragment.seed": getattr(args, "seed", None),
        "concurrency": getattr(args, "jobs", None),
        "temporal_budget": getattr(args, "budget", None),
    }
    if getattr(args, "reverse", False):
        overrides["reverse_density"] = True
    cfg = pipeline.load_config(args.config, overrides)
    if cfg.model_path and args.config:
        # relative model paths in a config file are relative to that file
        p = Path(cfg.model_path)
        if not p.is_absolute():
            cfg = dataclasses.replace(cfg, model_path=str(Path(args.config).parent / p))
    env = os.environ.get(MODEL_ENV)
    if env:
        cfg = dataclasses.replace(cfg, model_path=env)
    if getattr(args, "model", None):
        cfg = dataclasses.replace(cfg, model_path=args.model)
    ablation = getattr(args, "ablation", None)
    if ablation:
        cfg = cfg.with_ablation(ablation)
    if getattr(args, "disable_spatial", False):
        cfg = dataclasses.replace(cfg, disable_spatial=True)
    if getattr(args, "disable_temporal", False):
        cfg = dataclasses.replace(cfg, disable_temporal=True)
    return cfg


def load_model(cfg: pipeline.PipelineConfig, required: bool = True) -> brisque.SvrModel | None:
    if not cfg.model_path:
        if required:
            raise ModelError(f"no quality model configured (set model_path, --model or {MODEL_ENV})")
        return None
    try:
        return brisque.load_model(cfg.model_path)
    except (OSError, ValueError, TypeError) as exc:
        raise ModelError(f"cannot load model {cfg.model_path}: {exc}") from None


def is_scores_file(path: str) -> bool:
    return Path(path).suffix.lower() in SCORE_SUFFIXES and Path(path).is_file()


def seed_of(args) -> int:
    return 0 if args.seed is None else args.seed


# --- commands -----------------------------------------------------------------------------

def cmd_classify(args) -> int:
    cfg = build_config(args)
    model = load_model(cfg, required=False)
    clip = open_input(args.input)
    predictor = brisque.BrisquePredictor(model) if model is not None else None
    try:
        cls = pipeline.classify_clip(clip, cfg, predictor)
    except ValueError as exc:
        if predictor is None:
            raise ModelError(str(exc)) from None
        raise
    out = {"clip_id": clip.name, "width": clip.width, "height": clip.height,
           "frame_count": len(clip), **cls.to_dict()}
    write_output(dump_json(out), args.output)
    return EXIT_OK


def cmd_score(args) -> int:
    cfg = build_config(args)
    if is_scores_file(args.input):
        scores, x = read_frame_scores(args.input)
        res = pipeline.score_frame_scores(scores, x if args.x is None else args.x, cfg, Path(args.input).stem)
    else:
        model = load_model(cfg)
        clip = open_input(args.input)
        res = pipeline.score_clip(clip, cfg, model)
    out = res.to_dict(timing=not args.no_timing)
    out["ablation"] = cfg.ablation
    out["config_digest"] = cfg.digest()
    write_output(dump_json(out), args.output)
    return EXIT_OK


def _resolve_x(args, cfg, clip) -> tuple[float, dict | None]:
    if args.x is not None:
        if not 0.0 <= args.x <= 1.0:
            raise pipeline.ConfigError("--x must lie in [0, 1]")
        return args.x, None
    if clip is None:
        raise pipeline.ConfigError("give an input clip or --x")
    model = load_model(cfg, required=False)
    predictor = brisque.BrisquePredictor(model) if model is not None else None
    try:
        cls = pipeline.classify_clip(clip, cfg, predictor)
    except ValueError as exc:
        raise ModelError(str(exc)) from None
    return cls.x, cls.to_dict()


def cmd_sample(args) -> int:
    cfg = build_config(args)
    clip = open_input(args.input) if args.input else None
    x, cls = _resolve_x(args, cfg, clip)
    if args.temporal:
        n = len(clip) if clip is not None else args.frame_count
        if n is None:
            raise pipeline.ConfigError("give an input clip or --frame-count")
        out = pipeline.make_plan(n, x, cfg).to_dict()
    else:
        if clip is not None:
            h, w = clip.height, clip.width
        elif args.width and args.height:
            h, w = args.height, args.width
        else:
            raise pipeline.ConfigError("give an input clip or --width and --height")
        rect = pipeline.crop_for(h, w, x, cfg)
        offsets = spatial.cell_offsets(rect.height, rect.width, cfg.fragment)
        out = {"x": x, "crop": rect.to_dict(),
               "fragment": {"grid_size": cfg.fragment.grid_size, "patch_size": cfg.fragment.patch_size,
                            "seed": cfg.fragment.seed, "offsets": [list(o) for o in offsets]}}
    if cls is not None:
        out["classification"] = cls
    write_output(dump_json(out), args.output)
    return EXIT_OK


def cmd_features(args) -> int:
    cfg = build_config(args)
    clip = open_input(args.input)
    if not 0 <= args.frame < len(clip):
        raise pipeline.ConfigError(f"--frame {args.frame} outside [0, {len(clip) - 1}]")
    frame = clip[args.frame]
    out = {"clip_id": clip.name, "frame": args.frame, "prepared": args.prepared}
    if args.prepared:
        x, _ = _resolve_x(args, cfg, clip)
        rect = pipeline.crop_for(clip.height, clip.width, x, cfg)
        frame = pipeline.prepare_frame(frame, rect, cfg)
        out["x"] = x
    f = brisque.features(frame)
    out["features"] = dict(zip(brisque.FEATURE_NAMES, (float(v) for v in f)))
    write_output(dump_json(out), args.output)
    return EXIT_OK


def _segment_dataset(entries, cfg, args):
    model = None
    lengths = {}
    clips = {}
    for e in entries:
        if e.input_kind == "scores_file":
            scores, _ = read_frame_scores(e.path)
            clips[e.clip_id] = scores
            lengths[e.clip_id] = scores.size
        else:
            clip = open_clip(e)
            clips[e.clip_id] = clip
            lengths[e.clip_id] = len(clip)
    shortest = min(lengths.values())
    if args.n_segments < 2 or args.n_segments > shortest:
        raise pipeline.ConfigError(
            f"n_segments must lie in [2, {shortest}] (shortest clip has {shortest} frames)")
    dataset = []
    for e in entries:
        src = clips[e.clip_id]
        if isinstance(src, np.ndarray):
            series = calibrate.segment_series_from_frame_scores(src, args.n_segments, args.stride, e.clip_id)
        else:
            if model is None:
                model = load_model(cfg)
            series = calibrate.segment_scores(src, args.n_segments, model, stride=args.stride)
        dataset.append((series, e.mos))
    return dataset, clips


def _train_model(entries, clips, cfg, path) -> dict:
    """Fit the ridge fallback on fragment features of uniformly sampled frames."""
    full = dataclasses.replace(cfg, disable_spatial=True)
    feats, targets = [], []
    ids = [e for e in entries if not isinstance(clips[e.clip_id], np.ndarray)]
    tgt = calibrate.distortion_targets([e.mos for e in ids]) if ids else []
    for e, t in zip(ids, tgt):
        clip = clips[e.clip_id]
        rect = pipeline.crop_for(clip.height, clip.width, 0.0, full)
        for i in temporal.uniform_frames(len(clip), cfg.temporal_budget).indices:
            feats.append(brisque.features(pipeline.prepare_frame(clip[i], rect, full)))
            targets.append(float(t))
    if len(feats) < 10:
        raise pipeline.ConfigError("--train-model needs at least 10 sampled frames from decodable clips")
    model = calibrate.train_fallback_regressor(np.array(feats), np.array(targets))
    brisque.save_model(model, path)
    return {"path": str(path), "kernel": model.kernel, "n_samples": len(feats)}


def cmd_calibrate(args) -> int:
    cfg = build_config(args)
    if args.stride < 1:
        raise pipeline.ConfigError("--stride must be >= 1")
    manifest = load_manifest(args.manifest)
    entries = sorted(manifest.scoreable(), key=lambda e: e.clip_id)
    if len(entries) < 5:
        raise pipeline.ConfigError(f"calibration needs at least 5 clips with MOS, got {len(entries)}")
    dataset, clips = _segment_dataset(entries, cfg, args)
    est = calibrate.estimate_weights(dataset, floor=args.floor, distortion_scores=not args.quality_scores)
    out = est.to_dict()
    if args.train_model:
        out["trained_model"] = _train_model(entries, clips, cfg, args.train_model)
    write_output(dump_json(out), args.output)
    return EXIT_OK


def _oracle(entry) -> float:
    return float(entry.mos)


def _csv(reports, timing: bool, with_label: bool) -> str:
    if not with_label:
        return reports[0].to_csv(timing)
    lines = []
    for i, r in enumerate(reports):
        rows = r.to_csv(timing).splitlines()
        if i == 0:
            lines.append("ablation," + rows[0])
        lines += [f"{r.ablation},{row}" for row in rows[1:]]
    return "\n".join(lines) + "\n"


def cmd_evaluate(args) -> int:
    cfg = build_config(args)
    manifest = load_manifest(args.manifest)
    scorer = _oracle if args.oracle else None
    needs_model = not args.oracle and any(e.input_kind != "scores_file" for e in manifest.scoreable())
    model = load_model(cfg) if needs_model else None
    seed = seed_of(args)
    timing = not args.no_timing
    if args.ablations:
        reports = evaluate.run_ablation_table(manifest, cfg, args.repeats, seed, model=model,
                                              scorer=scorer, logistic=args.logistic)
    else:
        reports = [evaluate.run_benchmark(manifest, cfg, args.repeats, seed, model=model,
                                          scorer=scorer, logistic=args.logistic)]
    if args.csv:
        write_output(_csv(reports, timing, args.ablations), args.csv)
    if args.ablations:
        out = {"ablations": [r.ablation for r in reports],
               "reports": [r.to_dict(timing) for r in reports],
               "missing_mos": manifest.missing_mos}
    else:
        out = reports[0].to_dict(timing)
        out["missing_mos"] = manifest.missing_mos
    write_output(dump_json(out), args.output)
    return EXIT_OK


FIXTURE_KINDS = ("ablation", "calibration-front", "calibration-symmetric", "classify", "latency")
# the 1080p latency clip is large on disk, so "all" leaves it out
ALL_FIXTURES = FIXTURE_KINDS[:-1]


def cmd_fixtures(args) -> int:
    out_dir = Path(args.out_dir)
    seed = seed_of(args)
    written = {}
    kinds = ALL_FIXTURES if args.kind == "all" else (args.kind,)
    for kind in kinds:
        target = out_dir / kind
        if kind == "ablation":
            written[kind] = str(fixtures.write_ablation_dataset(target, n_each=args.n, seed=seed))
        elif kind == "calibration-front":
            written[kind] = str(fixtures.write_calibration_dataset(target, True, n_clips=args.n, seed=seed))
        elif kind == "calibration-symmetric":
            written[kind] = str(fixtures.write_calibration_dataset(target, False, n_clips=args.n, seed=seed))
        elif kind == "classify":
            written[kind] = str(fixtures.write_classifier_corpus(target, n_each=args.n, seed=seed))
        elif kind == "latency":
            written[kind] = str(fixtures.write_latency_clip(target, seed=seed))
    write_output(dump_json({"seed": seed, "written": written}), args.output)
    return EXIT_OK


# --- parser -------------------------------------------------------------------------------

def _global_options(suppress: bool) -> argparse.ArgumentParser:
    """Global flags, accepted both before and after the subcommand."""
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", default=d(None), help="INI config file ([classifier], [fragment], [pipeline])")
    g.add_argument("--seed", type=int, default=d(None), help="fragment / split / fixture seed")
    g.add_argument("--jobs", type=int, default=d(None), help="clips scored concurrently")
    g.add_argument("--output", "-o", default=d(None), help="output file (default: stdout)")
    g.add_argument("--model", default=d(None), help=f"quality model JSON (overrides {MODEL_ENV} and config)")
    g.add_argument("--no-timing", action="store_true", default=d(False),
                   help="null out wall-clock fields so output is byte-reproducible")
    return p


def _pipeline_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget", type=int, help="frames scored per clip")
    p.add_argument("--disable-spatial", action="store_true", help="no central crop")
    p.add_argument("--disable-temporal", action="store_true", help="uniform frame sampling")
    p.add_argument("--ablation", choices=[a.lower() for a in evaluate.ABLATIONS] + list(evaluate.ABLATIONS),
                   help="abandon modules by ablation-row name")
    p.add_argument("--reverse", action="store_true", help="mirror the temporal density (end-weighted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xgcvqa", parents=[_global_options(False)],
                                     description="Confidence-driven no-reference video quality assessment.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_global_options(True)]

    p = sub.add_parser("classify", parents=common, help="hardware performance, confidence and content label")
    p.add_argument("input", help=".y4m file or image-sequence directory")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("score", parents=common, help="score one clip through the full pipeline")
    p.add_argument("input", help=".y4m file, image directory, or per-frame scores (.json/.txt)")
    p.add_argument("--x", type=float, help="confidence for per-frame score inputs")
    _pipeline_options(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sample", parents=common, help="dump the crop/fragment layout or the frame plan")
    p.add_argument("input", nargs="?", help="clip (optional when --x and geometry are given)")
    p.add_argument("--temporal", action="store_true", help="emit the temporal sampling plan")
    p.add_argument("--x", type=float, help="confidence (skips classification)")
    p.add_argument("--frame-count", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    _pipeline_options(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("features", parents=common, help="36 natural-scene-statistics features of one frame")
    p.add_argument("input")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--prepared", action="store_true", help="features of the cropped, fragmented frame")
    p.add_argument("--x", type=float, help="confidence for --prepared (default: classify)")
    _pipeline_options(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("calibrate", parents=common, help="estimate temporal segment weights from MOS")
    p.add_argument("manifest")
    p.add_argument("--n-segments", type=int, default=10)
    p.add_argument("--stride", type=int, default=5, help="score every stride-th frame of a segment")
    p.add_argument("--floor", type=float, default=calibrate.WEIGHT_FLOOR)
    p.add_argument("--quality-scores", action="store_true",
                   help="segment scores are higher-is-better (default: distortion scores)")
    p.add_argument("--train-model", metavar="PATH", help="also fit a ridge fallback model and save it")
    p.add_argument("--budget", type=int, help="frames per clip for --train-model")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", parents=common, help="repeated 80/20 benchmark and ablations")
    p.add_argument("manifest")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--ablations", action="store_true", help="report None/Spatial/Temporal/All")
    p.add_argument("--oracle", action="store_true", help="predict MOS itself (harness self-check)")
    p.add_argument("--logistic", action="store_true", help="4-parameter logistic before PLCC")
    p.add_argument("--csv", help="per-clip CSV export path")
    _pipeline_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fixtures", parents=common, help="generate the synthetic test corpus")
    p.add_argument("out_dir")
    p.add_argument("--kind", choices=FIXTURE_KINDS + ("all",), default="all")
    p.add_argument("--n", type=int, default=20, help="clips per class (ablation/classify) or per dataset")
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DecodeError, ManifestError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DECODE
    except pipeline.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
