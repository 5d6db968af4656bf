"""Probabilistic roadmap over box worlds.

Construction is deterministic for a given seed, and the sampler draws
fixed-size candidate chunks so that a larger sample budget extends the
point set without reshuffling the prefix. Collision checks treat the
robot as a sphere: boxes are inflated once by the clearance radius and
points/segments are tested against the inflated set.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

import numpy as np

from .kernels import get_kernels

# Candidates drawn per rejection-sampling round.
_CHUNK = 256


@dataclass(frozen=True)
class RoadmapParams:
    n_samples: int = 500
    connect_radius: float = 1.0
    inflation: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.connect_radius <= 0 or self.inflation < 0:
            raise ValueError("connect_radius must be positive, inflation non-negative")


class Roadmap:
    def __init__(self, points: np.ndarray, adjacency: list[list[int]], params: RoadmapParams):
        self.points = points
        self.adjacency = adjacency
        self.params = params

    @property
    def n_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2


def _sample_free(rng, lo, hi, n, inflated_lo, inflated_hi, kern) -> np.ndarray:
    """Rejection-sample n collision-free points, chunk by chunk."""
    out: list[np.ndarray] = []
    have = 0
    # A fully blocked volume would loop forever; cap the attempts.
    for _ in range(max(64, 40 * (n // _CHUNK + 1))):
        cand = rng.uniform(lo, hi, size=(_CHUNK, 3))
        keep = cand[kern.points_clear(cand, inflated_lo, inflated_hi)]
        if len(keep):
            out.append(keep)
            have += len(keep)
        if have >= n:
            break
    if have < n:
        raise RuntimeError(
            f"could not sample {n} free points; free space too small or absent"
        )
    return np.concatenate(out)[:n]


def build_roadmap(
    bounds_lo,
    bounds_hi,
    boxes_lo,
    boxes_hi,
    params: RoadmapParams = RoadmapParams(),
    kernel: str | None = None,
) -> Roadmap:
    kern = get_kernels(kernel)
    lo = np.asarray(bounds_lo, dtype=np.float64)
    hi = np.asarray(bounds_hi, dtype=np.float64)
    blo = np.asarray(boxes_lo, dtype=np.float64).reshape(-1, 3)
    bhi = np.asarray(boxes_hi, dtype=np.float64).reshape(-1, 3)
    ilo = blo - params.inflation
    ihi = bhi + params.inflation

    rng = np.random.default_rng(params.seed)
    points = _sample_free(rng, lo, hi, params.n_samples, ilo, ihi, kern)

    diff = points[:, None, :] - points[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    within = dist2 <= params.connect_radius**2
    ii, jj = np.nonzero(np.triu(within, k=1))
    clear = kern.segments_clear(points[ii], points[jj], ilo, ihi)

    adjacency: list[list[int]] = [[] for _ in range(len(points))]
    for i, j in zip(ii[clear], jj[clear]):
        adjacency[int(i)].append(int(j))
        adjacency[int(j)].append(int(i))
    return Roadmap(points, adjacency, params)


class FeasibilityChecker:
    """Binary reachability between 3D points in a fixed box world."""

    def __init__(
        self,
        bounds_lo,
        bounds_hi,
        boxes_lo,
        boxes_hi,
        params: RoadmapParams = RoadmapParams(),
        kernel: str | None = None,
    ):
        self.bounds_lo = np.asarray(bounds_lo, dtype=np.float64)
        self.bounds_hi = np.asarray(bounds_hi, dtype=np.float64)
        self._blo = np.asarray(boxes_lo, dtype=np.float64).reshape(-1, 3)
        self._bhi = np.asarray(boxes_hi, dtype=np.float64).reshape(-1, 3)
        self._ilo = self._blo - params.inflation
        self._ihi = self._bhi + params.inflation
        self.params = params
        self._kern = get_kernels(kernel)
        self.roadmap = build_roadmap(
            bounds_lo, bounds_hi, boxes_lo, boxes_hi, params, kernel
        )

    @classmethod
    def from_world(cls, world, params: RoadmapParams = RoadmapParams(), kernel=None):
        lo, hi = world.solid_box_arrays()
        return cls(world.bounds.lo, world.bounds.hi, lo, hi, params, kernel)

    def _in_bounds(self, p: np.ndarray) -> bool:
        return bool(np.all(p >= self.bounds_lo) and np.all(p <= self.bounds_hi))

    def _point_clear(self, p: np.ndarray) -> bool:
        return bool(self._kern.points_clear(p[None, :], self._ilo, self._ihi)[0])

    def _attach(self, p: np.ndarray) -> np.ndarray:
        """Indices of roadmap points reachable from p by one clear segment."""
        pts = self.roadmap.points
        d2 = np.einsum("ij,ij->i", pts - p, pts - p)
        near = np.nonzero(d2 <= self.params.connect_radius**2)[0]
        if len(near) == 0:
            return near
        starts = np.broadcast_to(p, (len(near), 3))
        ok = self._kern.segments_clear(starts, pts[near], self._ilo, self._ihi)
        return near[ok]

    def query(self, start, target) -> int:
        """1 if a collision-free path exists, else 0."""
        s = np.asarray(start, dtype=np.float64)
        t = np.asarray(target, dtype=np.float64)
        if not (self._in_bounds(s) and self._in_bounds(t)):
            return 0
        if not (self._point_clear(s) and self._point_clear(t)):
            return 0
        if bool(self._kern.segments_clear(s[None, :], t[None, :], self._ilo, self._ihi)[0]):
            return 1
        from_s = self._attach(s)
        to_t = self._attach(t)
        if len(from_s) == 0 or len(to_t) == 0:
            return 0
        goal = set(int(i) for i in to_t)
        seen = set(int(i) for i in from_s)
        queue = deque(seen)
        adj = self.roadmap.adjacency
        while queue:
            node = queue.popleft()
            if node in goal:
                return 1
            for nxt in adj[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return 0

    def shortest_path(self, start, target) -> list[tuple[float, float, float]] | None:
        """Euclidean-shortest roadmap polyline, or None when unreachable."""
        s = np.asarray(start, dtype=np.float64)
        t = np.asarray(target, dtype=np.float64)
        if self.query(start, target) == 0:
            return None
        if bool(self._kern.segments_clear(s[None, :], t[None, :], self._ilo, self._ihi)[0]):
            return [tuple(s), tuple(t)]
        pts = self.roadmap.points
        from_s = self._attach(s)
        to_t = set(int(i) for i in self._attach(t))
        dist = {int(i): float(np.linalg.norm(pts[i] - s)) for i in from_s}
        prev: dict[int, int | None] = {int(i): None for i in from_s}
        heap = [(d, i) for i, d in dist.items()]
        heapq.heapify(heap)
        best_end, best_total = None, float("inf")
        while heap:
            d, node = heapq.heappop(heap)
            if d > dist.get(node, float("inf")):
                continue
            if node in to_t:
                total = d + float(np.linalg.norm(pts[node] - t))
                if total < best_total:
                    best_end, best_total = node, total
                continue
            for nxt in self.roadmap.adjacency[node]:
                nd = d + float(np.linalg.norm(pts[nxt] - pts[node]))
                if nd < dist.get(nxt, float("inf")):
                    dist[nxt] = nd
                    prev[nxt] = node
                    heapq.heappush(heap, (nd, nxt))
        if best_end is None:
            return None
        chain = [tuple(t)]
        node: int | None = best_end
        while node is not None:
            chain.append(tuple(pts[node]))
            node = prev[node]
        chain.append(tuple(s))
        chain.reverse()
        return chain
