"""Prior models over utility directions and measure estimation for cone unions.

Monte Carlo draws come from per-block seed substreams, so the first n
samples of a prior are the same regardless of how many were requested
before or which thread asked. For three outcomes under the uniform prior
an exact arc-length path is available.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConditioningOnNull, InputError
from .geometry import ConeUnion, canonical_utility, zero_sum_basis

DEFAULT_SAMPLES = 100_000
BLOCK_SIZE = 8192
MAX_SAMPLES = 10**7


@dataclass(frozen=True)
class Patch:
    """Spherical cap of utility directions: angular ``radius`` around ``center``."""

    weight: float
    center: tuple[float, ...]
    radius: float


@dataclass(frozen=True, eq=False)
class PriorModel:
    """A probability over zero-sum unit utilities.

    kind is ``"uniform"``, ``"mixture"`` (weighted caps, each uniform on
    its cap) or ``"empirical"`` (a fixed sample set, used in full).
    """

    kind: str
    dim: int
    seed: int = 0
    patches: tuple[Patch, ...] = ()
    samples: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("uniform", "mixture", "empirical"):
            raise InputError(f"unknown prior kind {self.kind!r}")
        if self.dim < 2:
            raise InputError("need at least two outcomes")
        if not 0 <= int(self.seed) < 2**64:
            raise InputError("seed must be a 64-bit non-negative integer")
        if self.kind == "mixture":
            if not self.patches:
                raise InputError("mixture prior needs at least one patch")
            w = np.array([p.weight for p in self.patches])
            if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
                raise InputError("patch weights must be positive and sum to 1")
            for p in self.patches:
                if len(p.center) != self.dim or not 0 < p.radius <= math.pi:
                    raise InputError(f"bad patch {p}")
        if self.kind == "empirical":
            if self.samples is None or len(self.samples) == 0:
                raise InputError("empirical prior needs samples")
            S = np.array([canonical_utility(s) for s in np.asarray(self.samples, dtype=float)])
            if S.shape[1] != self.dim:
                raise InputError("sample dimension mismatch")
            S.setflags(write=False)
            object.__setattr__(self, "samples", S)

    @classmethod
    def uniform(cls, dim: int = 3, seed: int = 0) -> "PriorModel":
        return cls("uniform", dim, seed)

    @classmethod
    def empirical(cls, samples, seed: int = 0) -> "PriorModel":
        S = np.asarray(samples, dtype=float)
        return cls("empirical", S.shape[1], seed, samples=S)

    @property
    def exact_available(self) -> bool:
        return self.kind == "uniform" and self.dim == 3

    def with_seed(self, seed: int) -> "PriorModel":
        return PriorModel(self.kind, self.dim, seed, self.patches, self.samples)

    # -- sampling

    def _block(self, k: int) -> np.ndarray:
        with self._lock:
            hit = self._cache.get(k)
        if hit is not None:
            return hit
        rng = np.random.default_rng(np.random.SeedSequence(int(self.seed), spawn_key=(k,)))
        block = _draw(self, rng, BLOCK_SIZE)
        block.setflags(write=False)
        with self._lock:
            self._cache.setdefault(k, block)
            return self._cache[k]

    def draw(self, n: int) -> np.ndarray:
        """First ``n`` directions of this prior's stream, shape ``(n, dim)``."""
        if n < 1:
            raise InputError("n must be at least 1")
        if n > MAX_SAMPLES:
            raise InputError(f"refusing to draw more than {MAX_SAMPLES} samples")
        if self.kind == "empirical":
            k = len(self.samples)
            if n == k:
                return self.samples
            rng = np.random.default_rng(np.random.SeedSequence(int(self.seed), spawn_key=(0,)))
            return self.samples[rng.integers(0, k, size=n)]
        blocks = [self._block(k) for k in range(-(-n // BLOCK_SIZE))]
        return np.concatenate(blocks)[:n]

    def evaluation_samples(self, n: int | None) -> np.ndarray:
        """Samples used for measures: the whole set for empirical priors."""
        if self.kind == "empirical":
            return self.samples
        return self.draw(DEFAULT_SAMPLES if n is None else n)


def _uniform_sphere(rng: np.random.Generator, dim: int, n: int) -> np.ndarray:
    basis = zero_sum_basis(dim)
    z = rng.standard_normal((n, dim - 1))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z @ basis.T


def _draw(prior: PriorModel, rng: np.random.Generator, n: int) -> np.ndarray:
    if prior.kind == "uniform":
        return _uniform_sphere(rng, prior.dim, n)
    weights = np.array([p.weight for p in prior.patches])
    which = rng.choice(len(prior.patches), size=n, p=weights / weights.sum())
    out = np.empty((n, prior.dim))
    for j, p in enumerate(prior.patches):
        need = int(np.sum(which == j))
        c = canonical_utility(p.center)
        cos_r = math.cos(p.radius)
        got: list[np.ndarray] = []
        have = 0
        while have < need:
            cand = _uniform_sphere(rng, prior.dim, max(64, 2 * (need - have)))
            cand = cand[cand @ c >= cos_r]
            got.append(cand)
            have += len(cand)
        if need:
            out[which == j] = np.concatenate(got)[:need]
    return out


def sample(prior: PriorModel, n: int) -> np.ndarray:
    """``n`` i.i.d. utility directions, deterministic given the prior's seed."""
    return prior.draw(n).copy()


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    std_error: float
    n_samples: int
    exact: bool

    @classmethod
    def from_count(cls, hits: int, n: int) -> "MeasureEstimate":
        p = hits / n
        return cls(p, math.sqrt(p * (1.0 - p) / n), n, False)

    @classmethod
    def exact_value(cls, p: float) -> "MeasureEstimate":
        return cls(min(1.0, max(0.0, p)), 0.0, 0, True)


def use_exact(prior: PriorModel, exact: bool | None) -> bool:
    """Resolve the exact-path toggle: None means use it when available."""
    if exact and not prior.exact_available:
        raise InputError("exact measures require the uniform prior on three outcomes")
    return prior.exact_available if exact is None else bool(exact)


def measure(
    prior: PriorModel, W: ConeUnion, n: int | None = None, exact: bool | None = None
) -> MeasureEstimate:
    """Prior probability of the closed cone union W."""
    if W.dim != prior.dim:
        raise InputError("cone and prior dimensions differ")
    if use_exact(prior, exact):
        return MeasureEstimate.exact_value(W.arcs.measure)
    U = prior.evaluation_samples(n)
    return MeasureEstimate.from_count(int(np.sum(W.contains(U))), len(U))


def conditional_measure(
    prior: PriorModel,
    W: ConeUnion,
    V: ConeUnion,
    n: int | None = None,
    exact: bool | None = None,
) -> MeasureEstimate:
    """``mu(W | V)``; raises ConditioningOnNull when V carries no mass."""
    if use_exact(prior, exact):
        mv = V.arcs.measure
        if mv <= 0.0:
            raise ConditioningOnNull("conditioning set has prior measure zero")
        return MeasureEstimate.exact_value(W.arcs.intersect(V.arcs).measure / mv)
    U = prior.evaluation_samples(n)
    in_v = V.contains(U)
    nv = int(np.sum(in_v))
    if nv == 0:
        raise ConditioningOnNull("no samples fall in the conditioning set")
    hits = int(np.sum(W.contains(U[in_v])))
    return MeasureEstimate.from_count(hits, nv)


def measures_of_cells(
    prior: PriorModel, cells: Sequence[ConeUnion], n: int | None = None, exact: bool | None = None
) -> list[MeasureEstimate]:
    return [measure(prior, W, n, exact) for W in cells]
