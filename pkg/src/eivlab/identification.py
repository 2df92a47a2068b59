"""Experiments, identified families, mu-equivalence, coarsening and transparency."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence, Union

import numpy as np

from . import circle
from .errors import DegenerateTies, InputError, InvalidExperiment
from .geometry import ConeUnion, Menu, cell_union
from .prior import MeasureEstimate, PriorModel, use_exact

TIE_TOL = 1e-12
MAX_TIE_RATE = 1e-4
MU_TOL = 1e-9
MC_CAP = 10**6

Cells = tuple[tuple[int, ...], ...]


def _normalize_partition(partition: Iterable[Iterable[int]], size: int) -> Cells:
    cells = tuple(tuple(sorted(int(i) for i in cell)) for cell in partition)
    seen: list[int] = []
    for cell in cells:
        if not cell:
            raise InvalidExperiment("partition cells must be non-empty")
        seen.extend(cell)
    if sorted(seen) != list(range(size)):
        raise InvalidExperiment(
            f"partition must cover indices 0..{size - 1} exactly once, got {[list(c) for c in cells]}"
        )
    return cells


@dataclass(frozen=True, eq=False)
class Experiment:
    """A menu with an observability partition given by menu indices."""

    menu: Menu
    partition: Cells
    cell_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "partition", _normalize_partition(self.partition, len(self.menu)))
        if self.cell_labels is not None:
            labels = tuple(str(s) for s in self.cell_labels)
            if len(labels) != len(self.partition):
                raise InvalidExperiment("one label per partition cell required")
            object.__setattr__(self, "cell_labels", labels)

    @classmethod
    def discrete(cls, menu: Menu) -> "Experiment":
        return cls(menu, tuple((i,) for i in range(len(menu))))

    @classmethod
    def trivial(cls, menu: Menu) -> "Experiment":
        return cls(menu, (tuple(range(len(menu))),))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Experiment)
            and self.menu == other.menu
            and self.partition == other.partition
            and self.cell_labels == other.cell_labels
        )

    __hash__ = object.__hash__

    @property
    def n_cells(self) -> int:
        return len(self.partition)

    def cell_of(self, index: int) -> int:
        for k, cell in enumerate(self.partition):
            if index in cell:
                return k
        raise InputError(f"menu has no point {index}")

    def cell_index_array(self) -> np.ndarray:
        out = np.empty(len(self.menu), dtype=int)
        for k, cell in enumerate(self.partition):
            out[list(cell)] = k
        return out

    def cones(self) -> list[ConeUnion]:
        return [cell_union(self.menu, cell) for cell in self.partition]

    def with_partition(self, partition) -> "Experiment":
        return Experiment(self.menu, partition)

    def is_finer_than(self, other: "Experiment") -> bool:
        """Whether every cell of self sits inside a cell of ``other`` (same menu)."""
        if not self.menu.same_points(other.menu) or len(self.menu) != len(other.menu):
            return False
        owner = other.cell_index_array()
        return all(len({owner[i] for i in cell}) == 1 for cell in self.partition)


@dataclass(frozen=True, eq=False)
class RandomizedExperiment:
    """Finitely supported lottery over experiments."""

    atoms: tuple[tuple[Experiment, float], ...]

    def __post_init__(self):
        atoms = tuple((e, float(w)) for e, w in self.atoms)
        if not atoms:
            raise InvalidExperiment("randomized experiment needs at least one atom")
        for e, w in atoms:
            if not isinstance(e, Experiment):
                raise InvalidExperiment("atoms must be experiments")
            if not w > 0.0:
                raise InvalidExperiment(f"atom weights must be positive, got {w}")
        total = sum(w for _, w in atoms)
        if abs(total - 1.0) > 1e-12:
            raise InvalidExperiment(f"atom weights must sum to 1, got {total!r}")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def single(cls, e: Experiment) -> "RandomizedExperiment":
        return cls(((e, 1.0),))

    @classmethod
    def mix(cls, alpha: float, p: "RandomizedExperiment | Experiment", q) -> "RandomizedExperiment":
        """``alpha p + (1-alpha) q``; degenerate alpha drops the unused side."""
        p, q = as_randomized(p), as_randomized(q)
        if not 0.0 <= alpha <= 1.0:
            raise InputError(f"alpha must lie in [0, 1], got {alpha}")
        atoms = [(e, alpha * w) for e, w in p.atoms if alpha > 0]
        atoms += [(e, (1.0 - alpha) * w) for e, w in q.atoms if alpha < 1]
        total = sum(w for _, w in atoms)
        return cls(tuple((e, w / total) for e, w in atoms))


def as_randomized(x) -> RandomizedExperiment:
    return x if isinstance(x, RandomizedExperiment) else RandomizedExperiment.single(x)


# ---------------------------------------------------------------- families


Region = Union[ConeUnion, circle.ArcSet, np.ndarray]


@dataclass(frozen=True, eq=False)
class IdentifiedFamily:
    """Identified sets of one experiment (or any finite family of regions) with measures.

    ``regions`` are cone unions, arc sets (exact path) or boolean sample masks
    (Monte Carlo path, aligned with the prior's evaluation samples).
    """

    regions: tuple[Region, ...]
    measures: tuple[MeasureEstimate, ...]
    prior: PriorModel
    exact: bool
    n_samples: int = 0
    tie_rate: float = 0.0
    masks: tuple[np.ndarray, ...] | None = field(default=None, repr=False)

    @property
    def cells(self) -> list[tuple[Region, MeasureEstimate]]:
        return list(zip(self.regions, self.measures))

    def values(self) -> np.ndarray:
        return np.array([m.value for m in self.measures])

    def positive(self, tol: float | None = None) -> list[int]:
        if tol is None:
            tol = MU_TOL if self.exact else 0.0
        return [k for k, m in enumerate(self.measures) if m.value > tol]

    def arcs(self, k: int) -> circle.ArcSet:
        r = self.regions[k]
        return r if isinstance(r, circle.ArcSet) else r.arcs

    def mask(self, k: int, U: np.ndarray) -> np.ndarray:
        if self.masks is not None and len(self.masks[k]) == len(U):
            return self.masks[k]
        r = self.regions[k]
        if isinstance(r, np.ndarray):
            if len(r) != len(U):
                raise InputError("sample mask does not match the sample set")
            return r
        if isinstance(r, circle.ArcSet):
            thetas = np.array([circle.angle_of(u) for u in U])
            return np.array([r.contains(t, 0.0) for t in thetas])
        return r.contains(U)


def identified_family(
    e: Experiment, prior: PriorModel, n: int | None = None, exact: bool | None = None
) -> IdentifiedFamily:
    """The family ``{W_{A,P}}`` with measures; checks no-overlap and sum to one.

    On the Monte Carlo path each sample is credited to the cell of its first
    maximiser; a tie rate above ``MAX_TIE_RATE`` aborts.
    """
    if e.menu.dim != prior.dim:
        raise InputError("experiment and prior dimensions differ")
    cones = e.cones()
    if use_exact(prior, exact):
        arcs = [W.arcs for W in cones]
        for i, j in itertools.combinations(range(len(arcs)), 2):
            overlap = arcs[i].intersect(arcs[j]).length
            if overlap > 1e-9:
                raise InvalidExperiment(f"cells {i} and {j} overlap with positive measure")
        ms = tuple(MeasureEstimate.exact_value(a.measure) for a in arcs)
        total = sum(m.value for m in ms)
        if abs(total - 1.0) > 1e-9:
            raise InvalidExperiment(f"cell measures sum to {total}, not 1")
        return IdentifiedFamily(tuple(cones), ms, prior, True)
    U = prior.evaluation_samples(n)
    vals = U @ e.menu.points.T
    best = vals.max(axis=1)
    ties = np.sum(vals >= best[:, None] - TIE_TOL, axis=1) >= 2
    tie_rate = float(np.mean(ties))
    if tie_rate > MAX_TIE_RATE:
        raise DegenerateTies(f"tie rate {tie_rate:.2e} exceeds {MAX_TIE_RATE:.0e}")
    owner = e.cell_index_array()[np.argmax(vals, axis=1)]
    masks = tuple(owner == k for k in range(e.n_cells))
    ms = tuple(MeasureEstimate.from_count(int(m.sum()), len(U)) for m in masks)
    return IdentifiedFamily(tuple(cones), ms, prior, False, len(U), tie_rate, masks)


def family_of_regions(
    regions: Sequence[Region], prior: PriorModel, n: int | None = None, exact: bool | None = None
) -> IdentifiedFamily:
    """Wrap an arbitrary finite family of regions (cone unions, arcs or masks)."""
    if use_exact(prior, exact):
        arcs = []
        for r in regions:
            if isinstance(r, np.ndarray):
                raise InputError("sample masks have no exact measure")
            arcs.append(r if isinstance(r, circle.ArcSet) else r.arcs)
        ms = tuple(MeasureEstimate.exact_value(a.measure) for a in arcs)
        return IdentifiedFamily(tuple(regions), ms, prior, True)
    U = prior.evaluation_samples(n)
    tmp = IdentifiedFamily(tuple(regions), (), prior, False, len(U))
    masks = tuple(tmp.mask(k, U) for k in range(len(regions)))
    ms = tuple(MeasureEstimate.from_count(int(m.sum()), len(U)) for m in masks)
    return IdentifiedFamily(tuple(regions), ms, prior, False, len(U), 0.0, masks)


# ---------------------------------------------------------------- equivalence


@dataclass(frozen=True)
class MuEquivalence:
    equivalent: bool
    matching: dict[int, int]
    witness: dict[str, Any] | None = None

    def __bool__(self) -> bool:
        return self.equivalent


def _exact_same(W: circle.ArcSet, V: circle.ArcSet, tol: float) -> bool:
    inter = W.intersect(V).measure
    return abs(W.measure - inter) <= tol and abs(V.measure - inter) <= tol


def _match(pos1, pos2, same) -> tuple[dict[int, int], dict[str, Any] | None]:
    matching: dict[int, int] = {}
    for i in pos1:
        hits = [j for j in pos2 if same(i, j)]
        if len(hits) != 1:
            return matching, {"side": "first", "cell": i, "candidates": hits}
        matching[i] = hits[0]
    for j in pos2:
        if not any(same(i, j) for i in pos1):
            return matching, {"side": "second", "cell": j, "candidates": []}
    return matching, None


def mu_equivalent(
    F1: IdentifiedFamily, F2: IdentifiedFamily, tol: float = MU_TOL
) -> MuEquivalence:
    """Look for the measure-preserving bijection between positive cells.

    Exact families compare arc measures at ``tol``. Monte Carlo families
    compare symmetric-difference mass on shared samples against
    ``4 * std_error``, doubling the sample size (up to ``MC_CAP``) when a
    verdict is within ``2 * std_error`` of the threshold.
    """
    if F1.exact and F2.exact:
        arcs1 = [F1.arcs(k) for k in range(len(F1.regions))]
        arcs2 = [F2.arcs(k) for k in range(len(F2.regions))]
        matching, witness = _match(
            F1.positive(tol),
            F2.positive(tol),
            lambda i, j: _exact_same(arcs1[i], arcs2[j], tol),
        )
        return MuEquivalence(witness is None, matching, witness)
    prior = F1.prior
    n = max(F1.n_samples, F2.n_samples, 1)
    while True:
        U = prior.evaluation_samples(n)
        m1 = [F1.mask(k, U) for k in range(len(F1.regions))]
        m2 = [F2.mask(k, U) for k in range(len(F2.regions))]
        N = len(U)
        pos1 = [k for k, m in enumerate(m1) if m.any()]
        pos2 = [k for k, m in enumerate(m2) if m.any()]
        borderline = False

        def same(i, j):
            nonlocal borderline
            d = np.count_nonzero(m1[i] ^ m2[j]) / N
            p = max(m1[i].mean(), m2[j].mean())
            thr = 4.0 * math.sqrt(p * (1.0 - p) / N)
            se_d = math.sqrt(d * (1.0 - d) / N)
            if d > 0 and abs(d - thr) < 2.0 * se_d:
                borderline = True
            return d <= thr

        matching, witness = _match(pos1, pos2, same)
        can_grow = prior.kind != "empirical" and 2 * n <= MC_CAP and not _has_masks(F1, F2)
        if borderline and can_grow:
            n *= 2
            continue
        return MuEquivalence(witness is None, matching, witness)


def _has_masks(*families: IdentifiedFamily) -> bool:
    return any(isinstance(r, np.ndarray) for F in families for r in F.regions)


# ---------------------------------------------------------------- coarsening


def coarsen(e: Experiment, merge: Iterable[Sequence[int]]) -> Experiment:
    """Merge groups (usually pairs) of cell indices; merged cells keep first-seen order."""
    parent = list(range(e.n_cells))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for group in merge:
        group = list(group)
        if len(group) < 1 or any(not 0 <= int(k) < e.n_cells for k in group):
            raise InvalidExperiment(f"bad merge group {group} for {e.n_cells} cells")
        for k in group[1:]:
            ri, rk = find(int(group[0])), find(int(k))
            if ri != rk:
                parent[max(ri, rk)] = min(ri, rk)
    groups: dict[int, list[int]] = {}
    for k in range(e.n_cells):
        groups.setdefault(find(k), []).extend(e.partition[k])
    return Experiment(e.menu, tuple(tuple(sorted(v)) for v in groups.values()))


def disjointify(F: IdentifiedFamily) -> IdentifiedFamily:
    """Reference transform: ``D_k = W_k minus the union of W_j for j < k``."""
    if F.exact:
        regions: list[Region] = []
        covered = circle.ArcSet.empty()
        for k in range(len(F.regions)):
            W = F.arcs(k)
            regions.append(_arc_difference(W, covered))
            covered = covered.union(W)
        return family_of_regions(regions, F.prior, exact=True)
    U = F.prior.evaluation_samples(F.n_samples or None)
    covered = np.zeros(len(U), dtype=bool)
    masks = []
    for k in range(len(F.regions)):
        m = F.mask(k, U)
        masks.append(m & ~covered)
        covered |= m
    return family_of_regions(masks, F.prior, n=len(U), exact=False)


def _arc_difference(W: circle.ArcSet, V: circle.ArcSet) -> circle.ArcSet:
    complement = []
    prev = 0.0
    for a, b in V.intervals:
        if a > prev:
            complement.append((prev, a))
        prev = max(prev, b)
    if prev < circle.TWO_PI:
        complement.append((prev, circle.TWO_PI))
    return W.intersect(circle.ArcSet(tuple(complement)))


# ---------------------------------------------------------------- transparency


@dataclass(frozen=True)
class TransparencyReport:
    transparent: bool
    by_panel: bool
    by_prior: bool | None
    agree: bool | None
    panel_size: int
    witness: dict[str, Any] | None = None


def transparency(
    source: Experiment,
    cell: int,
    valuation: Callable[[RandomizedExperiment], float],
    prior: PriorModel | None = None,
    tol: float | None = None,
    exact: bool | None = None,
) -> TransparencyReport:
    """Whether cell ``cell`` of ``source`` is transparent for ``valuation``.

    The panel merges the cell with each sibling, both in ``source`` and in
    every coarsening of ``source`` that merges one other pair of siblings.
    With a prior, the answer is cross-checked against ``mu(V) = 0``; the
    cross-check is skipped when V carries all the mass (no sibling with
    positive measure exists to merge into).
    """
    if tol is None:
        tol = getattr(valuation, "tol", 1e-9)
    if not 0 <= cell < source.n_cells:
        raise InputError(f"experiment has no cell {cell}")
    bases = [source]
    others = [k for k in range(source.n_cells) if k != cell]
    for i, j in itertools.combinations(others, 2):
        bases.append(coarsen(source, [(i, j)]))
    witness = None
    size = 0
    for base in bases:
        k = _cell_containing(base, source.partition[cell])
        v0 = valuation(RandomizedExperiment.single(base))
        for j in range(base.n_cells):
            if j == k:
                continue
            merged = coarsen(base, [(k, j)])
            v1 = valuation(RandomizedExperiment.single(merged))
            size += 1
            if abs(v1 - v0) > tol and witness is None:
                witness = {
                    "base_partition": [list(c) for c in base.partition],
                    "merged_with": j,
                    "value_before": v0,
                    "value_after": v1,
                }
    by_panel = witness is None
    by_prior = agree = None
    if prior is not None:
        fam = identified_family(source, prior, exact=exact)
        mu_v = fam.measures[cell].value
        tol_mu = MU_TOL if fam.exact else 4.0 * fam.measures[cell].std_error
        by_prior = mu_v <= tol_mu
        if mu_v < 1.0 - tol_mu:
            agree = by_panel == by_prior
    return TransparencyReport(by_panel, by_panel, by_prior, agree, size, witness)


def _cell_containing(e: Experiment, members: Sequence[int]) -> int:
    k = e.cell_of(members[0])
    return k


def is_transparent(
    V: ConeUnion | tuple[Experiment, int],
    prior: PriorModel | None,
    valuation: Callable[[RandomizedExperiment], float] | None = None,
    exact: bool | None = None,
) -> bool:
    """Transparency of V.

    V is either a ``(source experiment, cell index)`` pair, judged by the
    merge panel, or a bare cone union, judged by its prior measure. The
    empty union is always transparent.
    """
    if isinstance(V, ConeUnion):
        if not V.cones:
            return True
        if prior is None:
            raise InputError("a bare cone union needs a prior to judge transparency")
        from .prior import measure

        m = measure(prior, V, exact=exact)
        return m.value <= (MU_TOL if m.exact else 4.0 * m.std_error)
    source, cell = V
    if valuation is None:
        raise InputError("panel transparency needs a valuation")
    return transparency(source, cell, valuation, prior, exact=exact).transparent
