"""Convex geometry over the lottery simplex and the zero-sum utility sphere.

Lotteries are probability vectors in R^l. Utilities are linear functionals
on lotteries, canonicalised to zero-sum unit vectors (adding a constant or
rescaling by a positive factor does not change any choice). Cones are kept
in halfspace form: ``{u : u . g <= 0 for every row g}``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from . import circle
from .errors import InputError, LPFailure, SizeOverflow

EPS_GEOM = 1e-9
DELTA_STRICT = 1e-9
MAX_MINKOWSKI_POINTS = 20000


def lottery(coords) -> np.ndarray:
    """Validate a probability vector and return it renormalised."""
    x = np.asarray(coords, dtype=float).ravel()
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise InputError(f"not a lottery: {coords!r}")
    if np.any(x < -EPS_GEOM) or abs(x.sum() - 1.0) > EPS_GEOM:
        raise InputError(f"not a probability vector: {x.tolist()}")
    x = np.clip(x, 0.0, None)
    return x / x.sum()


def canonical_utility(u) -> np.ndarray:
    """Project onto the zero-sum hyperplane and scale to unit length."""
    u = np.asarray(u, dtype=float).ravel()
    v = u - u.mean()
    norm = np.linalg.norm(v)
    if norm < EPS_GEOM:
        raise InputError("utility is constant on lotteries (no direction)")
    return v / norm


def zero_sum_basis(dim: int) -> np.ndarray:
    """Orthonormal basis (columns) of {u in R^dim : sum(u) = 0}."""
    if dim == 3:
        return circle.PLANE_BASIS
    q, _ = np.linalg.qr(np.eye(dim)[:, :-1] - 1.0 / dim)
    return q[:, : dim - 1]


@dataclass(frozen=True, eq=False)
class Menu:
    """A finite decision problem: distinct lotteries over the same outcomes.

    ``provenance`` optionally records, per point, every parent tuple that
    produced it (Minkowski parents, or strategy names for compiled games).
    """

    points: np.ndarray
    labels: tuple[str, ...] | None = None
    provenance: tuple[tuple[Any, ...], ...] | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InputError("menu must be a non-empty list of lotteries")
        pts = np.array([lottery(p) for p in pts])
        for i, j in itertools.combinations(range(len(pts)), 2):
            if np.max(np.abs(pts[i] - pts[j])) <= EPS_GEOM:
                raise InputError(f"duplicate menu points {i} and {j}: {pts[i].tolist()}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != len(pts):
                raise InputError("one label per menu point required")
            object.__setattr__(self, "labels", labels)
        if self.provenance is not None and len(self.provenance) != len(pts):
            raise InputError("one provenance entry per menu point required")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i) -> np.ndarray:
        return self.points[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Menu) or self.points.shape != other.points.shape:
            return False
        return bool(np.allclose(self.points, other.points, atol=EPS_GEOM, rtol=0.0)) and (
            self.labels == other.labels
        )

    __hash__ = object.__hash__

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels is not None else str(i)

    def index_of(self, x) -> int:
        x = np.asarray(x, dtype=float)
        d = np.max(np.abs(self.points - x), axis=1)
        i = int(np.argmin(d))
        if d[i] > EPS_GEOM:
            raise InputError(f"point {x.tolist()} is not in the menu")
        return i

    def subset(self, indices: Sequence[int]) -> "Menu":
        idx = list(indices)
        return Menu(
            self.points[idx],
            labels=None if self.labels is None else tuple(self.labels[i] for i in idx),
            provenance=None if self.provenance is None else tuple(self.provenance[i] for i in idx),
        )

    def same_points(self, other: "Menu") -> bool:
        """Set equality of points, ignoring order and labels."""
        if len(self) != len(other):
            return False
        try:
            return sorted(other.index_of(p) for p in self.points) == list(range(len(other)))
        except InputError:
            return False


@dataclass(frozen=True, eq=False)
class PolyCone:
    """Closed polyhedral cone ``{u : u . g <= 0 for each row g of halfspaces}``."""

    halfspaces: np.ndarray
    dim: int

    def __post_init__(self):
        G = np.asarray(self.halfspaces, dtype=float).reshape(-1, self.dim)
        G.setflags(write=False)
        object.__setattr__(self, "halfspaces", G)

    @classmethod
    def whole(cls, dim: int) -> "PolyCone":
        return cls(np.zeros((0, dim)), dim)

    def contains(self, U, tol: float = 1e-12) -> np.ndarray | bool:
        U = np.asarray(U, dtype=float)
        if self.halfspaces.shape[0] == 0:
            return np.ones(U.shape[:-1], dtype=bool) if U.ndim > 1 else True
        vals = U @ self.halfspaces.T
        out = np.all(vals <= tol, axis=-1)
        return out if U.ndim > 1 else bool(out)

    def intersect(self, other: "PolyCone") -> "PolyCone":
        return PolyCone(np.vstack([self.halfspaces, other.halfspaces]), self.dim)

    @cached_property
    def arcs(self) -> circle.ArcSet:
        if self.dim != 3:
            raise InputError("arc representation only exists for three outcomes")
        return circle.cone_arcs(self.halfspaces)


@dataclass(frozen=True, eq=False)
class ConeUnion:
    """Finite union of polyhedral cones; ``open_flags[k]`` marks a relative interior."""

    cones: tuple[PolyCone, ...]
    dim: int
    open_flags: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        cones = tuple(self.cones)
        object.__setattr__(self, "cones", cones)
        flags = tuple(self.open_flags) if self.open_flags else (False,) * len(cones)
        if len(flags) != len(cones):
            raise InputError("one openness flag per cone required")
        object.__setattr__(self, "open_flags", flags)

    @classmethod
    def whole(cls, dim: int) -> "ConeUnion":
        return cls((PolyCone.whole(dim),), dim)

    @classmethod
    def empty(cls, dim: int) -> "ConeUnion":
        return cls((), dim)

    def contains(self, U, tol: float = 1e-12):
        U = np.asarray(U, dtype=float)
        if not self.cones:
            return np.zeros(U.shape[:-1], dtype=bool) if U.ndim > 1 else False
        if U.ndim == 1:
            return any(K.contains(U, tol) for K in self.cones)
        out = np.zeros(U.shape[0], dtype=bool)
        for K in self.cones:
            out |= K.contains(U, tol)
        return out

    def union(self, other: "ConeUnion") -> "ConeUnion":
        return ConeUnion(self.cones + other.cones, self.dim, self.open_flags + other.open_flags)

    def intersect(self, other: "ConeUnion") -> "ConeUnion":
        cones, flags = [], []
        for K, fk in zip(self.cones, self.open_flags):
            for L, fl in zip(other.cones, other.open_flags):
                cones.append(K.intersect(L))
                flags.append(fk or fl)
        return ConeUnion(tuple(cones), self.dim, tuple(flags))

    @cached_property
    def arcs(self) -> circle.ArcSet:
        out = circle.ArcSet.empty()
        for K in self.cones:
            out = out.union(K.arcs)
        return out


# ---------------------------------------------------------------- menus


def minkowski_average(menus: Sequence[Menu], weights: Sequence[float] | None = None) -> Menu:
    """Weighted Minkowski combination ``sum_k w_k A_k`` with parent provenance.

    Near-duplicate points are merged; each output point lists every parent
    index tuple that produced it, first-found first.
    """
    if not menus:
        raise InputError("at least one menu required")
    k = len(menus)
    w = np.full(k, 1.0 / k) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (k,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise InputError(f"mixing weights must be a probability vector, got {w.tolist()}")
    dim = menus[0].dim
    if any(m.dim != dim for m in menus):
        raise InputError("menus must share the outcome dimension")
    total = math.prod(len(m) for m in menus)
    if total > MAX_MINKOWSKI_POINTS:
        raise SizeOverflow(f"Minkowski combination would have {total} points")
    points: list[np.ndarray] = []
    parents: list[list[tuple[int, ...]]] = []
    for idx in itertools.product(*(range(len(m)) for m in menus)):
        z = sum(w[j] * menus[j].points[i] for j, i in enumerate(idx))
        for p, plist in zip(points, parents):
            if np.max(np.abs(p - z)) <= EPS_GEOM:
                plist.append(idx)
                break
        else:
            points.append(z)
            parents.append([idx])
    return Menu(np.array(points), provenance=tuple(tuple(p) for p in parents))


def mix_menus(alpha: float, A: Menu, B: Menu) -> Menu:
    """``alpha*A + (1-alpha)*B``; provenance entries are ``(i, j)`` index pairs."""
    if not 0.0 <= alpha <= 1.0:
        raise InputError(f"alpha must lie in [0, 1], got {alpha}")
    return minkowski_average([A, B], [alpha, 1.0 - alpha])


# ---------------------------------------------------------------- cones


def normal_cone(A: Menu, x) -> PolyCone:
    """Utilities maximised at ``x`` over ``A``: one halfspace ``u.(y-x) <= 0`` per y."""
    i = int(x) if np.ndim(x) == 0 else A.index_of(x)
    if not 0 <= i < len(A):
        raise InputError(f"menu has no point {i}")
    others = np.delete(A.points, i, axis=0)
    return PolyCone(others - A.points[i], A.dim)


def face_cone(X: Menu, face: Iterable[int]) -> PolyCone:
    """Normal cone of the face of conv(X) spanned by the given point indices."""
    face = sorted(face)
    x0 = X.points[face[0]]
    rows = [y - x0 for y in X.points]
    rows += [x0 - X.points[j] for j in face[1:]]
    return PolyCone(np.array(rows), X.dim)


def cell_union(A: Menu, cell: Iterable[int]) -> ConeUnion:
    cones = tuple(normal_cone(A, i) for i in cell)
    return ConeUnion(cones, A.dim)


def argmax_set(u, A: Menu, tol: float = 0.0) -> tuple[tuple[int, ...], bool]:
    """Indices within ``tol`` of the best value and whether there is a tie."""
    if tol < 0:
        raise InputError("tol must be non-negative")
    vals = A.points @ np.asarray(u, dtype=float)
    best = vals.max()
    idx = tuple(int(i) for i in np.flatnonzero(vals >= best - tol))
    return idx, len(idx) >= 2


# ---------------------------------------------------------------- LPs


def _solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    return res


def _projected(G: np.ndarray) -> np.ndarray:
    """Drop the all-ones component of each row and normalise; vacuous rows removed."""
    if G.shape[0] == 0:
        return G
    P = G - G.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(P, axis=1)
    keep = norms > 1e-14
    return P[keep] / norms[keep, None]


def strict_slack(G: np.ndarray, dim: int) -> tuple[float, np.ndarray]:
    """Maximise t with ``g.u + t <= 0`` for projected rows, ``sum(u)=0``, ``|u_i| <= 1``.

    Returns ``(t, u)`` with t capped at 1; a large t means the cone has interior.
    """
    P = _projected(np.asarray(G, dtype=float).reshape(-1, dim))
    if P.shape[0] == 0:
        u = canonical_utility(np.arange(dim, dtype=float))
        return 1.0, u
    n = dim + 1
    c = np.zeros(n)
    c[-1] = -1.0
    A_ub = np.hstack([P, np.ones((P.shape[0], 1))])
    b_ub = np.zeros(P.shape[0])
    A_eq = np.zeros((1, n))
    A_eq[0, :dim] = 1.0
    bounds = [(-1.0, 1.0)] * dim + [(None, 1.0)]
    res = _solve(c, A_ub, b_ub, A_eq, np.zeros(1), bounds)
    if res.status != 0:
        raise LPFailure(res.status, res.message)
    return float(res.x[-1]), res.x[:dim]


def cone_is_empty_interior(K: PolyCone) -> bool:
    """True when K has no interior relative to the zero-sum hyperplane."""
    t, _ = strict_slack(K.halfspaces, K.dim)
    return t <= DELTA_STRICT


def cone_contains(K1: PolyCone, K2: PolyCone) -> bool:
    """Whether K2 is a subset of K1 (on the zero-sum hyperplane)."""
    dim = K1.dim
    G2 = K2.halfspaces
    for g in _projected(K1.halfspaces):
        c = np.asarray(-g)
        A_eq = np.ones((1, dim))
        res = _solve(
            c,
            A_ub=G2 if G2.shape[0] else None,
            b_ub=np.zeros(G2.shape[0]) if G2.shape[0] else None,
            A_eq=A_eq,
            b_eq=np.zeros(1),
            bounds=[(-1.0, 1.0)] * dim,
        )
        if res.status != 0:
            raise LPFailure(res.status, res.message)
        if -res.fun > DELTA_STRICT:
            return False
    return True


def cone_equal(K1: PolyCone, K2: PolyCone) -> bool:
    return cone_contains(K1, K2) and cone_contains(K2, K1)


def cones_overlap(K1: PolyCone, K2: PolyCone) -> bool:
    """Whether the relative interiors of two full-dimensional cones meet."""
    return not cone_is_empty_interior(K1.intersect(K2))


def in_convex_hull(x, Y: np.ndarray) -> bool:
    """LP feasibility of ``x = sum l_i y_i`` with ``l >= 0``, ``sum l = 1``."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] == 0:
        return False
    k = Y.shape[0]
    A_eq = np.vstack([Y.T, np.ones((1, k))])
    b_eq = np.concatenate([np.asarray(x, dtype=float), [1.0]])
    res = _solve(np.zeros(k), A_eq=A_eq, b_eq=b_eq, bounds=[(0.0, None)] * k)
    if res.status == 2:
        return False
    if res.status != 0:
        raise LPFailure(res.status, res.message)
    resid = np.max(np.abs(Y.T @ res.x - np.asarray(x)))
    return resid <= 1e-8


def extreme_indices(A: Menu) -> tuple[int, ...]:
    if len(A) <= 2:
        return tuple(range(len(A)))
    out = []
    for i in range(len(A)):
        others = np.delete(A.points, i, axis=0)
        if not in_convex_hull(A.points[i], others):
            out.append(i)
    return tuple(out)


def extreme_points(A: Menu) -> Menu:
    """The points of A that are vertices of conv(A)."""
    return A.subset(extreme_indices(A))


# ---------------------------------------------------------------- faces


@dataclass(frozen=True)
class Face:
    """A face of conv(X): its vertex indices into X and a relative-interior normal.

    ``direction`` is None when the normal cone is the zero cone (the face is
    all of a full-dimensional X), which has no point on the utility sphere.
    """

    vertices: tuple[int, ...]
    direction: np.ndarray | None


def _strict_direction(M: np.ndarray, N: np.ndarray) -> np.ndarray | None:
    """Find z with ``M @ N @ z < 0`` row-wise; return ``N @ z`` or None."""
    k = N.shape[1]
    if k == 0:
        return None
    R = M @ N
    if R.shape[0] == 0:
        return N[:, 0]
    if k == 1:
        for s in (1.0, -1.0):
            vals = R[:, 0] * s
            if np.all(vals < -DELTA_STRICT * np.maximum(1.0, np.abs(R[:, 0]))):
                return N[:, 0] * s
            if np.all(vals < 0) and np.min(-vals) > 1e-12:
                return N[:, 0] * s
        return None
    if k == 2:
        arcs = circle.ArcSet.full()
        for r in R:
            arcs = arcs.intersect(circle.ArcSet.halfplane(r))
        best, theta = 0.0, None
        for a, b in arcs.intervals:
            if b - a > best:
                best, theta = b - a, 0.5 * (a + b)
        if theta is None or best <= 1e-9:
            return None
        return N @ np.array([math.cos(theta), math.sin(theta)])
    # general case: LP in the null-space coordinates
    Rn = R / np.maximum(np.linalg.norm(R, axis=1, keepdims=True), 1e-300)
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.hstack([Rn, np.ones((Rn.shape[0], 1))])
    res = _solve(c, A_ub, np.zeros(Rn.shape[0]), bounds=[(-1.0, 1.0)] * k + [(None, 1.0)])
    if res.status != 0:
        raise LPFailure(res.status, res.message)
    if res.x[-1] <= DELTA_STRICT:
        return None
    return N @ res.x[:k]


def _null_space(A: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis of {u : A u = 0, sum(u) = 0}."""
    B = zero_sum_basis(dim)
    if A.shape[0] == 0:
        return B
    C = A @ B
    _, s, vt = np.linalg.svd(C)
    rank = int(np.sum(s > 1e-10))
    return B @ vt[rank:].T


def faces(X: Menu) -> list[Face]:
    """All non-empty faces of conv(X), by brute force over vertex subsets.

    A vertex subset S spans a face exactly when some utility attains its
    maximum over X on S and nowhere else.
    """
    ext = list(extreme_indices(X))
    if len(ext) > 16:
        raise SizeOverflow(f"face enumeration over {len(ext)} vertices is out of scope")
    P = X.points
    out: list[Face] = []
    for r in range(1, len(ext) + 1):
        for S in itertools.combinations(ext, r):
            x0 = P[S[0]]
            eq = np.array([P[s] - x0 for s in S[1:]]).reshape(-1, X.dim)
            N = _null_space(eq, X.dim)
            rest = [y for y in ext if y not in S]
            M = np.array([P[y] - x0 for y in rest]).reshape(-1, X.dim)
            if not rest:
                d = None if N.shape[1] == 0 else N[:, 0]
                out.append(Face(tuple(S), None if d is None else canonical_utility(d)))
                continue
            d = _strict_direction(M, N)
            if d is not None:
                out.append(Face(tuple(S), canonical_utility(d)))
    return out
