"""Non-uniform frame selection and proportional frame-budget allocation.

Importance over normalized time t in [0, 1] is linear,
``w(t) = 5 + (3x - 2) t``, so ``w(0) / w(1) = 5 / (3 + 3x)``: front-heavy
(5:3) for x = 0, back-heavy (5:6) for x = 1, uniform at x = 2/3.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

UNIFORM_X = 2.0 / 3.0


def density(t, x: float, reverse: bool = False):
    """Unnormalized importance w(t); ``reverse`` mirrors it in time."""
    t = np.asarray(t, dtype=np.float64)
    if reverse:
        t = 1.0 - t
    return 5.0 + (3.0 * x - 2.0) * t


def density_cdf_inverse(u: float, x: float, reverse: bool = False) -> float:
    """Solve W(t) / W(1) = u for t, where W is the integral of w from 0."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must be in [0, 1], got {u}")
    if reverse:
        return 1.0 - density_cdf_inverse(1.0 - u, x)
    a = (3.0 * x - 2.0) / 2.0
    c = u * (8.0 + 3.0 * x) / 2.0
    # a t^2 + 5 t - c = 0; this root form is stable as a -> 0
    t = 2.0 * c / (5.0 + math.sqrt(25.0 + 4.0 * a * c))
    return min(max(t, 0.0), 1.0)


@dataclass(frozen=True)
class SamplingPlan:
    indices: tuple[int, ...]
    budget: int
    x_used: float
    frame_count: int = field(default=0, compare=False)

    def to_dict(self) -> dict:
        return {"x": self.x_used, "budget": self.budget, "indices": list(self.indices)}


def _nearest_free(idx: int, used: set, n: int) -> int:
    if idx not in used:
        return idx
    for d in range(1, n):
        for cand in (idx + d, idx - d):
            if 0 <= cand < n and cand not in used:
                return cand
    raise RuntimeError("no free frame index")  # unreachable while budget < n


def sample_frames(frame_count: int, budget: int, x: float, reverse: bool = False) -> SamplingPlan:
    """Pick ``budget`` frames at the density's quantile midpoints."""
    if frame_count < 1 or budget < 1:
        raise ValueError("frame_count and budget must be >= 1")
    if budget >= frame_count:
        return SamplingPlan(tuple(range(frame_count)), budget, x, frame_count)
    last = frame_count - 1
    used: set[int] = set()
    for k in range(1, budget + 1):
        t = density_cdf_inverse((k - 0.5) / budget, x, reverse)
        idx = int(math.floor(t * last + 0.5))
        used.add(_nearest_free(idx, used, frame_count))
    return SamplingPlan(tuple(sorted(used)), budget, x, frame_count)


def uniform_frames(frame_count: int, budget: int) -> SamplingPlan:
    """Evenly spaced midpoints at the same budget (temporal ablation)."""
    return sample_frames(frame_count, budget, UNIFORM_X)


def allocation_objective(weights, counts) -> float:
    """Sum of w_i log(fr_i); -inf when any segment gets no frames."""
    total = 0.0
    for w, c in zip(weights, counts):
        if c <= 0:
            return -math.inf
        total += w * math.log(c)
    return total


def allocate_frames(weights, budget: int) -> list[int]:
    """Integer frame counts maximizing sum(w_i log fr_i) with sum(fr_i) == budget.

    The continuous optimum is fr_i proportional to w_i. The integer optimum
    is reached by handing out frames one at a time to the segment with the
    largest marginal gain w_i log((f+1)/f), which is exact because the
    objective is separable and concave. Ties go to the lower index. With
    fewer frames than segments, the heaviest segments get one frame each.
    """
    w = [float(v) for v in weights]
    if not w:
        raise ValueError("empty weights")
    if any(not v > 0 for v in w):
        raise ValueError("weights must be positive")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    n = len(w)
    counts = [0] * n
    if budget < n:
        for i in sorted(range(n), key=lambda i: (-w[i], i))[:budget]:
            counts[i] = 1
        return counts
    counts = [1] * n
    heap = [(-w[i] * math.log(2.0), i) for i in range(n)]
    heapq.heapify(heap)
    for _ in range(budget - n):
        _, i = heapq.heappop(heap)
        counts[i] += 1
        f = counts[i]
        heapq.heappush(heap, (-w[i] * math.log((f + 1) / f), i))
    return counts
