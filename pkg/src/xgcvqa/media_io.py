"""Luminance-only decoding of Y4M, raw planar YUV and image sequences, plus
dataset manifests binding clips to subjective scores.

All decoders return samples normalized to [0, 1] (code value divided by
``2**bit_depth - 1``). Chroma planes are skipped, never decoded.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

MIN_DECODED_SIZE = 32
SUPPORTED_BIT_DEPTHS = (8, 10)
IMAGE_EXTENSIONS = (".pgm", ".ppm", ".pnm", ".png", ".bmp", ".tif", ".tiff", ".jpg", ".jpeg")
BT709_WEIGHTS = (0.2126, 0.7152, 0.0722)

INPUT_KINDS = ("y4m", "raw_yuv", "image_seq", "scores_file")


class DecodeError(ValueError):
    """Raised when an input cannot be decoded into luma frames."""


class ManifestError(ValueError):
    """Raised for malformed dataset manifests."""


@dataclass(frozen=True, eq=False)
class LumaFrame:
    """A single normalized luminance plane.

    ``samples`` is a read-only ``(height, width)`` float64 array with values
    in [0, 1]. The 32-pixel minimum size is enforced by the decoders, not
    here, so crops and fragments of a frame are LumaFrames too.
    """

    samples: np.ndarray
    bit_depth: int = 8

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"luma samples must be a non-empty 2-D array, got shape {arr.shape}")
        if self.bit_depth not in SUPPORTED_BIT_DEPTHS:
            raise ValueError(f"unsupported bit depth {self.bit_depth}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("luma samples must lie in [0, 1]")
        if arr is self.samples and arr.flags.writeable:
            arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @classmethod
    def from_codes(cls, codes: np.ndarray, bit_depth: int) -> "LumaFrame":
        """Build a frame from integer code values."""
        if bit_depth not in SUPPORTED_BIT_DEPTHS:
            raise DecodeError(f"unsupported bit depth {bit_depth}")
        peak = (1 << bit_depth) - 1
        codes = np.asarray(codes)
        if codes.size and int(codes.max()) > peak:
            raise DecodeError(f"code value {int(codes.max())} exceeds {bit_depth}-bit range")
        samples = codes.astype(np.float64) / peak
        samples.flags.writeable = False
        return cls(samples, bit_depth)


class Clip(Sequence):
    """An ordered, indexable sequence of equally sized LumaFrames.

    Frames are either held in memory or produced on demand by ``loader``;
    consumers only rely on sequential access by index.
    """

    def __init__(self, frames: Sequence[LumaFrame] | None = None, *,
                 loader: Callable[[int], LumaFrame] | None = None,
                 frame_count: int | None = None, width: int | None = None,
                 height: int | None = None, bit_depth: int | None = None,
                 fps: float | None = None, name: str | None = None):
        if (frames is None) == (loader is None):
            raise ValueError("provide exactly one of frames or loader")
        self.fps = fps
        self.name = name
        if frames is not None:
            frames = tuple(frames)
            if not frames:
                raise ValueError("a clip needs at least one frame")
            first = frames[0]
            for fr in frames[1:]:
                if (fr.width, fr.height, fr.bit_depth) != (first.width, first.height, first.bit_depth):
                    raise ValueError("all frames of a clip must share width, height and bit depth")
            self._frames = frames
            self._loader = None
            self.frame_count = len(frames)
            self.width, self.height, self.bit_depth = first.width, first.height, first.bit_depth
        else:
            if not frame_count or frame_count < 1 or not width or not height or not bit_depth:
                raise ValueError("lazy clips need frame_count >= 1, width, height and bit_depth")
            self._frames = None
            self._loader = loader
            self.frame_count = int(frame_count)
            self.width, self.height, self.bit_depth = int(width), int(height), int(bit_depth)

    def __len__(self) -> int:
        return self.frame_count

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(self.frame_count))]
        i = int(index)
        if i < 0:
            i += self.frame_count
        if not 0 <= i < self.frame_count:
            raise IndexError(f"frame index {index} out of range for {self.frame_count} frames")
        if self._frames is not None:
            return self._frames[i]
        frame = self._loader(i)
        if (frame.width, frame.height, frame.bit_depth) != (self.width, self.height, self.bit_depth):
            raise DecodeError(f"frame {i} does not match the clip geometry")
        return frame

    def __iter__(self) -> Iterator[LumaFrame]:
        for i in range(self.frame_count):
            yield self[i]

    def __repr__(self):
        return (f"Clip(name={self.name!r}, frames={self.frame_count}, "
                f"{self.width}x{self.height}, {self.bit_depth}-bit)")


def _check_decoded_size(width: int, height: int):
    if width < MIN_DECODED_SIZE or height < MIN_DECODED_SIZE:
        raise DecodeError(f"frame size {width}x{height} is below the {MIN_DECODED_SIZE}x{MIN_DECODED_SIZE} minimum")


def _chroma_samples(width: int, height: int, layout: str) -> int:
    cw, ch = {
        "420": (math.ceil(width / 2), math.ceil(height / 2)),
        "422": (math.ceil(width / 2), height),
        "444": (width, height),
        "mono": (0, 0),
    }[layout]
    return 2 * cw * ch


def _plane_reader(path: Path, offsets: Sequence[int], width: int, height: int, bit_depth: int):
    dtype = np.dtype(np.uint8) if bit_depth == 8 else np.dtype("<u2")
    count = width * height

    def load(index: int) -> LumaFrame:
        with open(path, "rb") as fh:
            fh.seek(offsets[index])
            buf = fh.read(count * dtype.itemsize)
        if len(buf) != count * dtype.itemsize:
            raise DecodeError(f"{path}: truncated frame payload at frame {index}")
        codes = np.frombuffer(buf, dtype=dtype).reshape(height, width)
        return LumaFrame.from_codes(codes, bit_depth)

    return load


# --- Y4M ---------------------------------------------------------------------

_Y4M_COLORSPACES = {
    "420jpeg": ("420", 8), "420paldv": ("420", 8), "420mpeg2": ("420", 8), "420": ("420", 8),
    "422": ("422", 8), "444": ("444", 8), "mono": ("mono", 8),
    "420p10": ("420", 10), "422p10": ("422", 10), "444p10": ("444", 10), "mono10": ("mono", 10),
}


def parse_y4m_header(line: bytes) -> dict:
    """Parse a YUV4MPEG2 stream header (without the trailing newline)."""
    tokens = line.split(b" ")
    if not tokens or tokens[0] != b"YUV4MPEG2":
        raise DecodeError("malformed header: missing YUV4MPEG2 signature")
    params = {}
    for tok in tokens[1:]:
        if not tok:
            continue
        params[chr(tok[0])] = tok[1:].decode("ascii", errors="replace")
    try:
        width, height = int(params["W"]), int(params["H"])
    except (KeyError, ValueError):
        raise DecodeError("malformed header: W and H are required integers") from None
    if width <= 0 or height <= 0:
        raise DecodeError("malformed header: non-positive frame size")
    colorspace = params.get("C", "420jpeg")
    if colorspace not in _Y4M_COLORSPACES:
        depth = colorspace.partition("p")[2]
        if depth.isdigit():
            raise DecodeError(f"unsupported bit depth {depth} (colorspace C{colorspace})")
        raise DecodeError(f"malformed header: unsupported colorspace C{colorspace}")
    layout, bit_depth = _Y4M_COLORSPACES[colorspace]
    fps = None
    if "F" in params:
        num, _, den = params["F"].partition(":")
        try:
            fps = int(num) / int(den or 1)
        except (ValueError, ZeroDivisionError):
            raise DecodeError("malformed header: bad frame rate") from None
    return {"width": width, "height": height, "chroma": layout, "bit_depth": bit_depth,
            "fps": fps, "colorspace": colorspace}


def read_y4m(path) -> Clip:
    """Index a Y4M file and return a lazily decoded luma Clip."""
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as fh:
        head = fh.read(4096)
        nl = head.find(b"\n")
        if nl < 0:
            raise DecodeError(f"{path}: malformed header: no terminating newline")
        hdr = parse_y4m_header(head[:nl])
        width, height, bit_depth = hdr["width"], hdr["height"], hdr["bit_depth"]
        sample_bytes = 1 if bit_depth == 8 else 2
        frame_bytes = sample_bytes * (width * height + _chroma_samples(width, height, hdr["chroma"]))
        offsets = []
        pos = nl + 1
        while pos < size:
            fh.seek(pos)
            marker = fh.read(256)
            end = marker.find(b"\n")
            if not marker.startswith(b"FRAME") or end < 0:
                raise DecodeError(f"{path}: malformed FRAME marker at byte {pos}")
            payload = pos + end + 1
            if payload + frame_bytes > size:
                raise DecodeError(f"{path}: truncated frame payload at frame {len(offsets)}")
            offsets.append(payload)
            pos = payload + frame_bytes
    if not offsets:
        raise DecodeError(f"{path}: no frames")
    _check_decoded_size(width, height)
    return Clip(loader=_plane_reader(path, offsets, width, height, bit_depth),
                frame_count=len(offsets), width=width, height=height,
                bit_depth=bit_depth, fps=hdr["fps"], name=path.stem)


def write_y4m(path, frames: Iterable[LumaFrame], fps: tuple[int, int] = (25, 1),
              chroma: str = "420") -> None:
    """Write luma frames to Y4M with neutral chroma.

    Samples are quantized with round-half-up, so frames that came from code
    values round-trip bit-identically.
    """
    frames = iter(frames)
    try:
        first = next(frames)
    except StopIteration:
        raise ValueError("nothing to write") from None
    width, height, bit_depth = first.width, first.height, first.bit_depth
    if chroma not in ("420", "422", "444", "mono"):
        raise ValueError(f"unsupported chroma layout {chroma!r}")
    colorspace = chroma if bit_depth == 8 else ("mono10" if chroma == "mono" else f"{chroma}p10")
    peak = (1 << bit_depth) - 1
    dtype = np.uint8 if bit_depth == 8 else np.dtype("<u2")
    neutral = np.full(_chroma_samples(width, height, chroma), 1 << (bit_depth - 1), dtype=dtype)
    header = f"YUV4MPEG2 W{width} H{height} F{fps[0]}:{fps[1]} Ip A1:1 C{colorspace}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for fr in itertools.chain([first], frames):
            if (fr.width, fr.height, fr.bit_depth) != (width, height, bit_depth):
                raise ValueError("all frames must share geometry")
            codes = np.floor(fr.samples * peak + 0.5).astype(dtype)
            fh.write(b"FRAME\n")
            fh.write(codes.tobytes())
            fh.write(neutral.tobytes())


# --- raw planar YUV -------------------------------------------------------------

def read_raw_yuv(path, width: int, height: int, bit_depth: int = 8,
                 chroma_layout: str = "420") -> Clip:
    """Open headerless planar YUV (Y plane first, little-endian above 8 bits)."""
    path = Path(path)
    if width <= 0 or height <= 0:
        raise DecodeError("zero dimensions")
    if bit_depth not in SUPPORTED_BIT_DEPTHS:
        raise DecodeError(f"unsupported bit depth {bit_depth}")
    if chroma_layout not in ("420", "422", "444", "mono"):
        raise DecodeError(f"unsupported chroma layout {chroma_layout!r}")
    sample_bytes = 1 if bit_depth == 8 else 2
    frame_bytes = sample_bytes * (width * height + _chroma_samples(width, height, chroma_layout))
    size = path.stat().st_size
    if size == 0 or size % frame_bytes:
        raise DecodeError(f"{path}: size mismatch ({size} bytes is not a multiple of {frame_bytes})")
    _check_decoded_size(width, height)
    count = size // frame_bytes
    offsets = [k * frame_bytes for k in range(count)]
    return Clip(loader=_plane_reader(path, offsets, width, height, bit_depth),
                frame_count=count, width=width, height=height, bit_depth=bit_depth,
                name=path.stem)


# --- image sequences ----------------------------------------------------------------

def image_to_luma(img) -> LumaFrame:
    """Convert a PIL image to an 8-bit-normalized luma frame (BT.709 for color)."""
    if img.mode == "1":
        img = img.convert("L")
    if img.mode == "L":
        return LumaFrame.from_codes(np.asarray(img, dtype=np.uint8), 8)
    if img.mode in ("I;16", "I;16B", "I;16L", "I", "F"):
        raise DecodeError(f"unsupported image mode {img.mode} (only 8-bit images are read)")
    rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    luma = rgb @ np.asarray(BT709_WEIGHTS)
    return LumaFrame(np.clip(luma, 0.0, 1.0), 8)


def read_image_sequence(directory) -> Clip:
    """Read every image in ``directory`` in lexicographic filename order."""
    from PIL import Image

    directory = Path(directory)
    if not directory.is_dir():
        raise DecodeError(f"{directory}: not a directory")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    if not files:
        raise DecodeError(f"{directory}: no images found")
    frames = []
    for p in files:
        try:
            with Image.open(p) as img:
                frames.append(image_to_luma(img))
        except OSError as exc:
            raise DecodeError(f"{p}: unreadable file ({exc})") from exc
    shapes = {(f.width, f.height) for f in frames}
    if len(shapes) > 1:
        raise DecodeError(f"{directory}: mixed dimensions {sorted(shapes)}")
    _check_decoded_size(frames[0].width, frames[0].height)
    return Clip(frames, name=directory.name)


# --- per-frame score files ------------------------------------------------------------

def read_frame_scores(path) -> tuple[np.ndarray, float | None]:
    """Read precomputed per-frame quality scores.

    Accepts a JSON object ``{"frame_scores": [...], "x": optional}``, a bare
    JSON array, or plain text with one number per line. Returns the scores
    and the stored confidence parameter, if any.
    """
    text = Path(path).read_text(encoding="utf-8").strip()
    x = None
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = [line for line in text.splitlines() if line.strip()]
    if isinstance(data, dict):
        x = data.get("x")
        data = data.get("frame_scores", [])
    try:
        scores = np.asarray([float(v) for v in data], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise DecodeError(f"{path}: unparsable score ({exc})") from exc
    if scores.size == 0 or not np.all(np.isfinite(scores)):
        raise DecodeError(f"{path}: no usable frame scores")
    return scores, (None if x is None else float(x))


# --- manifests ---------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    clip_id: str
    path: Path
    input_kind: str
    mos: float | None
    width: int | None = None
    height: int | None = None
    bit_depth: int | None = None
    chroma: str = "420"

    @property
    def has_mos(self) -> bool:
        return self.mos is not None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    source: Path | None = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def scoreable(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.has_mos]

    @property
    def missing_mos(self) -> list[str]:
        return [e.clip_id for e in self.entries if not e.has_mos]


_REQUIRED_COLUMNS = ("clip_id", "path", "kind", "mos")
_OPTIONAL_COLUMNS = ("width", "height", "bit_depth", "chroma")


def _optional_int(value: str, column: str, line: int) -> int | None:
    if value is None or not value.strip():
        return None
    try:
        return int(value)
    except ValueError:
        raise ManifestError(f"line {line}: unparsable {column} {value!r}") from None


def load_manifest(path) -> DatasetManifest:
    """Parse a manifest CSV (``clip_id,path,kind,mos[,width,height,bit_depth]``).

    Relative paths resolve against the manifest's directory. Rows with an
    empty mos are kept and reported through ``missing_mos``.
    """
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ManifestError(f"{path}: empty manifest") from None
        missing = [c for c in _REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ManifestError(f"{path}: header lacks {', '.join(missing)}")
        unknown = [c for c in header if c not in _REQUIRED_COLUMNS + _OPTIONAL_COLUMNS]
        if unknown:
            raise ManifestError(f"{path}: unknown columns {', '.join(unknown)}")
        col = {name: i for i, name in enumerate(header)}
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ManifestError(f"line {line}: expected {len(header)} fields, got {len(row)} "
                                    "(paths containing commas are not supported)")
            get = lambda name: row[col[name]].strip() if name in col else None  # noqa: E731
            clip_id, rel, kind, mos_text = get("clip_id"), get("path"), get("kind"), get("mos")
            if not clip_id:
                raise ManifestError(f"line {line}: empty clip_id")
            if clip_id in seen:
                raise ManifestError(f"line {line}: duplicate clip_id {clip_id!r}")
            if "," in rel:
                raise ManifestError(f"line {line}: paths containing commas are not supported")
            if kind not in INPUT_KINDS:
                raise ManifestError(f"line {line}: unknown kind {kind!r}")
            mos = None
            if mos_text:
                try:
                    mos = float(mos_text)
                except ValueError:
                    raise ManifestError(f"line {line}: unparsable mos {mos_text!r}") from None
                if not math.isfinite(mos):
                    raise ManifestError(f"line {line}: non-finite mos {mos_text!r}")
            seen.add(clip_id)
            p = Path(rel)
            entries.append(ManifestEntry(
                clip_id=clip_id,
                path=p if p.is_absolute() else base / p,
                input_kind=kind,
                mos=mos,
                width=_optional_int(get("width"), "width", line),
                height=_optional_int(get("height"), "height", line),
                bit_depth=_optional_int(get("bit_depth"), "bit_depth", line),
                chroma=get("chroma") or "420",
            ))
    return DatasetManifest(entries, source=path)


def write_manifest(path, rows: Sequence[dict]) -> None:
    """Write manifest rows (dicts keyed by column name) as CSV."""
    columns = list(_REQUIRED_COLUMNS)
    for extra in _OPTIONAL_COLUMNS:
        if any(r.get(extra) is not None for r in rows):
            columns.append(extra)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow(["" if r.get(c) is None else r[c] for c in columns])


def open_clip(entry: ManifestEntry) -> Clip:
    """Decode a manifest entry into a Clip (not valid for ``scores_file``)."""
    if not os.path.exists(entry.path):
        raise DecodeError(f"{entry.path}: no such file")
    if entry.input_kind == "y4m":
        clip = read_y4m(entry.path)
    elif entry.input_kind == "raw_yuv":
        if entry.width is None or entry.height is None:
            raise DecodeError(f"{entry.clip_id}: raw_yuv entries need width and height")
        clip = read_raw_yuv(entry.path, entry.width, entry.height, entry.bit_depth or 8, entry.chroma)
    elif entry.input_kind == "image_seq":
        clip = read_image_sequence(entry.path)
    else:
        raise DecodeError(f"{entry.clip_id}: {entry.input_kind} entries carry scores, not frames")
    clip.name = entry.clip_id
    return clip


def open_input(path) -> Clip:
    """Guess the decoder for a CLI input path: directory, .y4m, or error."""
    path = Path(path)
    if not path.exists():
        raise DecodeError(f"{path}: no such file or directory")
    if path.is_dir():
        return read_image_sequence(path)
    if path.suffix.lower() == ".y4m":
        return read_y4m(path)
    raise DecodeError(f"{path}: cannot infer input kind (use .y4m or an image directory)")
