"""SRoCC, KRoCC (tau-b) and PLCC between predictions and subjective scores.

Degenerate inputs (no variance, or all pairs tied) return 0.0 and emit a
``DegenerateCorrelationWarning``.
"""
from __future__ import annotations

import math
import warnings

import numpy as np


class DegenerateCorrelationWarning(RuntimeWarning):
    pass


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("correlation needs at least 2 pairs")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("correlation inputs must be finite")
    return a, b


def _degenerate(name: str) -> float:
    warnings.warn(f"{name}: zero variance, correlation defined as 0", DegenerateCorrelationWarning,
                  stacklevel=3)
    return 0.0


def rankdata(a) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    a = np.asarray(a, dtype=np.float64).ravel()
    order = np.argsort(a, kind="mergesort")
    sa = a[order]
    # start index of each run of equal values
    starts = np.flatnonzero(np.r_[True, sa[1:] != sa[:-1]])
    ends = np.r_[starts[1:], sa.size]
    avg = (starts + ends + 1) / 2.0
    ranks = np.empty(a.size, dtype=np.float64)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def _pearson(a: np.ndarray, b: np.ndarray, name: str) -> float:
    da = a - a.mean()
    db = b - b.mean()
    saa = float(da @ da)
    sbb = float(db @ db)
    if saa == 0.0 or sbb == 0.0:
        return _degenerate(name)
    r = float(da @ db) / math.sqrt(saa * sbb)
    return min(max(r, -1.0), 1.0)


def srocc(a, b) -> float:
    a, b = _pair(a, b)
    return _pearson(rankdata(a), rankdata(b), "srocc")


def _merge_count(values: list) -> int:
    """Sort ``values`` in place (stable, bottom-up) and return the number of swaps (inversions)."""
    n = len(values)
    swaps = 0
    width = 1
    buf = values[:]
    src, dst = values, buf
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if src[j] < src[i]:
                    dst[k] = src[j]
                    swaps += mid - i
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            dst[k:hi] = src[i:mid] if i < mid else src[j:hi]
        src, dst = dst, src
        width *= 2
    if src is not values:
        values[:] = src
    return swaps


def _tie_pairs(sorted_vals) -> int:
    total = 0
    run = 1
    for prev, cur in zip(sorted_vals, sorted_vals[1:]):
        if cur == prev:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    return total + run * (run - 1) // 2


def krocc(a, b) -> float:
    """Kendall tau-b in O(n log n) (Knight's merge-sort inversion count)."""
    a, b = _pair(a, b)
    n = a.size
    order = np.lexsort((b, a))
    sa = a[order].tolist()
    sb = b[order].tolist()
    n0 = n * (n - 1) // 2
    ties_a = _tie_pairs(sa)
    # joint ties: runs equal in both a and b (sb is sorted within equal-a runs)
    ties_ab = 0
    run = 1
    for k in range(1, n):
        if sa[k] == sa[k - 1] and sb[k] == sb[k - 1]:
            run += 1
        else:
            ties_ab += run * (run - 1) // 2
            run = 1
    ties_ab += run * (run - 1) // 2
    swaps = _merge_count(sb)
    ties_b = _tie_pairs(sb)
    denom = (n0 - ties_a) * (n0 - ties_b)
    if denom == 0:
        return _degenerate("krocc")
    tau = (n0 - ties_a - ties_b + ties_ab - 2 * swaps) / math.sqrt(denom)
    return min(max(tau, -1.0), 1.0)


def logistic4(x, b1: float, b2: float, b3: float, b4: float):
    """Monotone 4-parameter logistic: b2 + (b1 - b2) / (1 + exp(-(x - b3) / |b4|))."""
    z = -(np.asarray(x, dtype=np.float64) - b3) / abs(b4)
    return b2 + (b1 - b2) / (1.0 + np.exp(np.clip(z, -500.0, 500.0)))


def fit_logistic(a, b, max_iter: int = 200) -> np.ndarray:
    """Least-squares fit of ``logistic4`` mapping a -> b by damped Gauss-Newton (LM).

    Initialization: b1 = max(b), b2 = min(b) (swapped for a negative trend),
    b3 = mean(a), b4 = std(a) (1 if a is constant).
    """
    a, b = _pair(a, b)
    lo, hi = float(b.min()), float(b.max())
    trend = float(np.dot(a - a.mean(), b - b.mean()))
    b1, b2 = (hi, lo) if trend >= 0 else (lo, hi)
    scale = float(a.std()) or 1.0
    p = np.array([b1, b2, float(a.mean()), scale])

    def residual(q):
        return logistic4(a, *q) - b

    def jacobian(q):
        z = np.clip((a - q[2]) / abs(q[3]), -500.0, 500.0)
        s = 1.0 / (1.0 + np.exp(-z))
        ds = s * (1.0 - s)
        return np.column_stack([
            s,
            1.0 - s,
            -(q[0] - q[1]) * ds / abs(q[3]),
            -(q[0] - q[1]) * ds * z / q[3],
        ])

    r = residual(p)
    cost = float(r @ r)
    damping = 1e-3
    for _ in range(max_iter):
        J = jacobian(p)
        JtJ = J.T @ J
        g = J.T @ r
        improved = False
        while damping < 1e12:
            A = JtJ + damping * np.diag(np.diag(JtJ) + 1e-12)
            try:
                step = np.linalg.solve(A, -g)
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            cand = p + step
            if cand[3] == 0.0:
                damping *= 10.0
                continue
            rc = residual(cand)
            c = float(rc @ rc)
            if c < cost:
                improved = True
                rel = (cost - c) / max(cost, 1e-300)
                p, r, cost = cand, rc, c
                damping = max(damping / 10.0, 1e-12)
                break
            damping *= 10.0
        if not improved or rel < 1e-12:
            break
    return p


def plcc(a, b, logistic: bool = False) -> float:
    """Pearson correlation, optionally after a logistic mapping of a onto b."""
    a, b = _pair(a, b)
    if logistic:
        if a.std() == 0.0 or b.std() == 0.0:
            return _degenerate("plcc")
        a = logistic4(a, *fit_logistic(a, b))
    return _pearson(a, b, "plcc")
