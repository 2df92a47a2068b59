"""Exact arc arithmetic on the utility circle for three outcomes.

With three outcomes the zero-sum utilities form a plane. A polyhedral cone
meets the unit circle of that plane in a finite union of closed arcs, so
measures under the uniform prior are arc lengths divided by 2*pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-12

# Orthonormal basis of the zero-sum plane in R^3, as columns.
PLANE_BASIS = np.column_stack(
    [
        np.array([1.0, -1.0, 0.0]) / math.sqrt(2.0),
        np.array([1.0, 1.0, -2.0]) / math.sqrt(6.0),
    ]
)


def direction(theta: float) -> np.ndarray:
    """Unit zero-sum utility in R^3 at angle ``theta`` (radians)."""
    return PLANE_BASIS @ np.array([math.cos(theta), math.sin(theta)])


def angle_of(u) -> float:
    v = PLANE_BASIS.T @ np.asarray(u, dtype=float)
    return math.atan2(v[1], v[0]) % TWO_PI


@dataclass(frozen=True)
class ArcSet:
    """Finite union of closed arcs, stored as sorted disjoint intervals in [0, 2pi]."""

    intervals: tuple[tuple[float, float], ...] = ()

    @classmethod
    def full(cls) -> "ArcSet":
        return cls(((0.0, TWO_PI),))

    @classmethod
    def empty(cls) -> "ArcSet":
        return cls(())

    @classmethod
    def arc(cls, start: float, length: float) -> "ArcSet":
        """Closed arc running counter-clockwise from ``start``."""
        if length >= TWO_PI - ANGLE_TOL:
            return cls.full()
        a = start % TWO_PI
        b = a + length
        if b <= TWO_PI:
            return cls(((a, b),))
        return _normalize([(0.0, b - TWO_PI), (a, TWO_PI)])

    @classmethod
    def halfplane(cls, h) -> "ArcSet":
        """Directions v in the plane with v . h <= 0."""
        hx, hy = float(h[0]), float(h[1])
        if math.hypot(hx, hy) < 1e-15:
            return cls.full()
        center = math.atan2(hy, hx) + math.pi
        return cls.arc(center - math.pi / 2.0, math.pi)

    @property
    def length(self) -> float:
        return sum(b - a for a, b in self.intervals)

    @property
    def measure(self) -> float:
        return min(1.0, self.length / TWO_PI)

    def is_null(self, tol: float = ANGLE_TOL) -> bool:
        return self.length <= tol

    def contains(self, theta: float, tol: float = ANGLE_TOL) -> bool:
        t = theta % TWO_PI
        for a, b in self.intervals:
            if a - tol <= t <= b + tol:
                return True
        # wrap-around at 0 / 2pi
        if t > TWO_PI - tol:
            return self.contains(0.0, tol)
        return False

    def union(self, other: "ArcSet") -> "ArcSet":
        return _normalize(list(self.intervals) + list(other.intervals))

    def intersect(self, other: "ArcSet") -> "ArcSet":
        out = []
        i = j = 0
        xs, ys = self.intervals, other.intervals
        while i < len(xs) and j < len(ys):
            a = max(xs[i][0], ys[j][0])
            b = min(xs[i][1], ys[j][1])
            if a <= b + ANGLE_TOL:
                out.append((a, max(a, b)))
            if xs[i][1] < ys[j][1]:
                i += 1
            else:
                j += 1
        return _normalize(out)

    def boundaries(self) -> list[float]:
        """Arc endpoints, with the artificial cut at 0 / 2pi removed."""
        pts = []
        for a, b in self.intervals:
            pts.extend([a, b])
        full_wrap = (
            self.intervals
            and self.intervals[0][0] <= ANGLE_TOL
            and self.intervals[-1][1] >= TWO_PI - ANGLE_TOL
        )
        if full_wrap:
            pts = pts[1:-1]
        return sorted({p % TWO_PI for p in pts})

    def distance_to_boundary(self, theta: float) -> float:
        pts = self.boundaries()
        if not pts:
            return math.inf
        t = theta % TWO_PI
        return min(min(abs(t - p), TWO_PI - abs(t - p)) for p in pts)


def _normalize(intervals) -> ArcSet:
    ivs = sorted((float(a), float(b)) for a, b in intervals)
    merged: list[list[float]] = []
    for a, b in ivs:
        if merged and a <= merged[-1][1] + ANGLE_TOL:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return ArcSet(tuple((a, b) for a, b in merged))


def cone_arcs(halfspaces) -> ArcSet:
    """Arcs of the unit circle inside {u : u . g <= 0 for every row g}."""
    G = np.asarray(halfspaces, dtype=float).reshape(-1, 3)
    arcs = ArcSet.full()
    for h in G @ PLANE_BASIS:
        arcs = arcs.intersect(ArcSet.halfplane(h))
        if not arcs.intervals:
            break
    return arcs
