"""Reference collision kernels in plain numpy.

The compiled extension (_kernels_cy) follows the exact same arithmetic,
in the same order, so the two give identical boolean answers. Boxes are
assumed pre-inflated by the caller.
"""

from __future__ import annotations

import numpy as np

# Below this, a segment direction component counts as axis-parallel.
PARALLEL_EPS = 1e-12


def points_clear(pts: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """True for each point that lies inside no box."""
    pts = np.asarray(pts, dtype=np.float64)
    if len(lo) == 0:
        return np.ones(len(pts), dtype=bool)
    inside = np.all(
        (pts[:, None, :] >= lo[None, :, :]) & (pts[:, None, :] <= hi[None, :, :]),
        axis=2,
    )
    return ~np.any(inside, axis=1)


def _segment_hits(p0: np.ndarray, p1: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> bool:
    """Slab test of one segment against every box."""
    nboxes = len(lo)
    t0 = np.zeros(nboxes)
    t1 = np.ones(nboxes)
    for ax in range(3):
        d = p1[ax] - p0[ax]
        if abs(d) < PARALLEL_EPS:
            outside = (p0[ax] < lo[:, ax]) | (p0[ax] > hi[:, ax])
            t0 = np.where(outside, 2.0, t0)
        else:
            ta = (lo[:, ax] - p0[ax]) / d
            tb = (hi[:, ax] - p0[ax]) / d
            t0 = np.maximum(t0, np.minimum(ta, tb))
            t1 = np.minimum(t1, np.maximum(ta, tb))
    return bool(np.any(t0 <= t1))


def segments_clear(
    p0s: np.ndarray, p1s: np.ndarray, lo: np.ndarray, hi: np.ndarray
) -> np.ndarray:
    """True for each segment that crosses no box."""
    p0s = np.asarray(p0s, dtype=np.float64)
    p1s = np.asarray(p1s, dtype=np.float64)
    out = np.ones(len(p0s), dtype=bool)
    if len(lo) == 0:
        return out
    for i in range(len(p0s)):
        if _segment_hits(p0s[i], p1s[i], lo, hi):
            out[i] = False
    return out
