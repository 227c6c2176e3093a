"""Scalar-loop reference for the BRISQUE feature path.

Deliberately naive: explicit loops, a full 2-D kernel, math.lgamma. Only
used by tests, and to regenerate tests/data/brisque_golden.json:

    python3 tests/brisque_oracle.py
"""
import json
import math
from pathlib import Path

import numpy as np

GOLDEN = Path(__file__).parent / "data" / "brisque_golden.json"


def kernel2d(size=7, sigma=7.0 / 6.0):
    half = size // 2
    k = [[math.exp(-((i - half) ** 2 + (j - half) ** 2) / (2 * sigma * sigma)) for j in range(size)]
         for i in range(size)]
    s = sum(map(sum, k))
    return [[v / s for v in row] for row in k]


def reflect(i, n):
    # half-sample symmetric: d c b a | a b c d | d c b a
    while i < 0 or i >= n:
        i = -i - 1 if i < 0 else 2 * n - i - 1
    return i


def conv(img, k):
    h, w = len(img), len(img[0])
    half = len(k) // 2
    out = [[0.0] * w for _ in range(h)]
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for i in range(len(k)):
                rr = reflect(r + i - half, h)
                for j in range(len(k)):
                    acc += k[i][j] * img[rr][reflect(c + j - half, w)]
            out[r][c] = acc
    return out


def mscn(img, C=1.0 / 255.0):
    k = kernel2d()
    mu = conv(img, k)
    sq = conv([[v * v for v in row] for row in img], k)
    h, w = len(img), len(img[0])
    return [[(img[r][c] - mu[r][c]) / (math.sqrt(max(sq[r][c] - mu[r][c] ** 2, 0.0)) + C)
             for c in range(w)] for r in range(h)]


def products(m):
    h, w = len(m), len(m[0])
    H = [m[r][c] * m[r][c + 1] for r in range(h) for c in range(w - 1)]
    V = [m[r][c] * m[r + 1][c] for r in range(h - 1) for c in range(w)]
    D1 = [m[r][c] * m[r + 1][c + 1] for r in range(h - 1) for c in range(w - 1)]
    D2 = [m[r][c] * m[r + 1][c - 1] for r in range(h - 1) for c in range(1, w)]
    return H, V, D1, D2


GRID = [k / 1000.0 for k in range(200, 10001)]


def argmin_grid(target, fn):
    best, best_d = None, math.inf
    for g in GRID:
        d = abs(fn(g) - target)
        if d < best_d:
            best, best_d = g, d
    return best


def ggd(xs):
    n = len(xs)
    second = sum(v * v for v in xs) / n
    first = sum(abs(v) for v in xs) / n
    if second == 0.0:
        return 10.0, 0.0
    rho = second / (first * first)
    shape = argmin_grid(rho, lambda g: math.exp(math.lgamma(1 / g) + math.lgamma(3 / g) - 2 * math.lgamma(2 / g)))
    return shape, second


def aggd(xs):
    n = len(xs)
    left = [v for v in xs if v < 0]
    right = [v for v in xs if v > 0]
    lv = sum(v * v for v in left) / len(left) if left else 0.0
    rv = sum(v * v for v in right) / len(right) if right else 0.0
    second = sum(v * v for v in xs) / n
    if second == 0.0:
        return 10.0, 0.0, 0.0, 0.0
    first = sum(abs(v) for v in xs) / n
    r_hat = first * first / second
    sl, sr = math.sqrt(lv), math.sqrt(rv)
    if sr == 0.0:
        corr = 1.0
    else:
        g = sl / sr
        corr = (g ** 3 + 1) * (g + 1) / (g * g + 1) ** 2
    target = r_hat * corr
    shape = argmin_grid(target, lambda a: math.exp(2 * math.lgamma(2 / a) - math.lgamma(1 / a) - math.lgamma(3 / a)))
    mean = (sr - sl) * math.exp(math.lgamma(2 / shape) - 0.5 * (math.lgamma(1 / shape) + math.lgamma(3 / shape)))
    return shape, mean, lv, rv


def downsample(img):
    h, w = len(img) // 2, len(img[0]) // 2
    return [[(img[2 * r][2 * c] + img[2 * r + 1][2 * c] + img[2 * r][2 * c + 1] + img[2 * r + 1][2 * c + 1]) / 4
             for c in range(w)] for r in range(h)]


def features(img):
    out = []
    for scale_img in (img, downsample(img)):
        m = mscn(scale_img)
        out += list(ggd([v for row in m for v in row]))
        for p in products(m):
            out += list(aggd(p))
    return out


def fixture_frame():
    """40x48 8-bit frame: a smooth ramp plus fixed-seed noise, as code values / 255."""
    rng = np.random.default_rng(2024)
    r, c = np.indices((40, 48))
    base = 96 + 2 * r + c + rng.normal(0, 18, size=(40, 48))
    codes = np.clip(np.floor(base + 0.5), 0, 255).astype(int)
    return (codes / 255.0).tolist()


if __name__ == "__main__":
    GOLDEN.parent.mkdir(exist_ok=True)
    GOLDEN.write_text(json.dumps({"frame": "fixture_frame() in tests/brisque_oracle.py",
                                  "features": features(fixture_frame())}, indent=1) + "\n")
    print(f"wrote {GOLDEN}")
