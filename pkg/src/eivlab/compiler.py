"""Compile batteries, adaptive trees and dynamic games into static experiments,
and build experiments that realise a target partition of utility space.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence, Union

import numpy as np

from . import circle
from .errors import CollisionError, InputError, RealizationError, SizeOverflow
from .geometry import (
    EPS_GEOM,
    ConeUnion,
    Menu,
    PolyCone,
    argmax_set,
    face_cone,
    faces,
    minkowski_average,
)
from .identification import Experiment, RandomizedExperiment

MAX_STRATEGIES = 10**4
MAX_DEPTH = 4


def compile_batch(menus: Sequence[Menu]) -> Experiment:
    """Observing one choice from each menu equals one choice from their average."""
    if not menus:
        raise InputError("compile_batch needs at least one menu")
    return Experiment.discrete(minkowski_average(list(menus)))


# ---------------------------------------------------------------- adaptive


@dataclass(frozen=True, eq=False)
class AdaptiveTree:
    """A menu and, per menu point, the follow-up tree (or None to stop)."""

    menu: Menu
    children: tuple["AdaptiveTree | None", ...] = ()

    def __post_init__(self):
        kids = tuple(self.children) or (None,) * len(self.menu)
        if len(kids) != len(self.menu):
            raise InputError("one child slot per menu point required")
        object.__setattr__(self, "children", kids)
        if self.depth > MAX_DEPTH:
            raise SizeOverflow(f"adaptive trees deeper than {MAX_DEPTH} are out of scope")

    @property
    def depth(self) -> int:
        return 1 + max((c.depth for c in self.children if c is not None), default=0)

    def nodes(self) -> list["AdaptiveTree"]:
        """Pre-order list of decision nodes."""
        out = [self]
        for c in self.children:
            if c is not None:
                out.extend(c.nodes())
        return out

    def simulate(self, u) -> tuple[int, ...]:
        """On-path choices of a utility u, breaking ties by lowest index."""
        path, node = [], self
        while node is not None:
            i = int(np.argmax(node.menu.points @ np.asarray(u)))
            path.append(i)
            node = node.children[i]
        return tuple(path)


def _observation(tree: AdaptiveTree, order: dict[int, int], strategy: tuple[int, ...]) -> tuple[int, ...]:
    path, node = [], tree
    while node is not None:
        i = strategy[order[id(node)]]
        path.append(i)
        node = node.children[i]
    return tuple(path)


def _path_label(tree: AdaptiveTree, obs: Sequence[int]) -> str:
    names, node = [], tree
    for i in obs:
        names.append(node.menu.label(i))
        node = node.children[i]
    return "/".join(names)


@dataclass(frozen=True, eq=False)
class CompiledAdaptive:
    experiment: Experiment
    observations: tuple[tuple[int, ...], ...]

    def cell_of_observation(self, obs: Sequence[int]) -> int:
        return self.observations.index(tuple(obs))


def compile_adaptive(tree: AdaptiveTree) -> CompiledAdaptive:
    """Static experiment equivalent to running the adaptive procedure.

    A strategy picks one point at every node; it is embedded as the uniform
    average of its picks over all nodes, so a linear utility's best strategy
    picks the best point at every node. Strategies are grouped by the choices
    they reveal on their own path; off-path picks stay unobserved.
    """
    nodes = tree.nodes()
    sizes = [len(nd.menu) for nd in nodes]
    if math.prod(sizes) > MAX_STRATEGIES:
        raise SizeOverflow(f"{math.prod(sizes)} strategies exceed {MAX_STRATEGIES}")
    order = {id(nd): k for k, nd in enumerate(nodes)}
    w = 1.0 / len(nodes)
    points: list[np.ndarray] = []
    strategies: list[list[tuple[int, ...]]] = []
    obs_of_point: list[tuple[int, ...]] = []
    for s in itertools.product(*(range(k) for k in sizes)):
        z = w * sum(nd.menu.points[i] for nd, i in zip(nodes, s))
        obs = _observation(tree, order, s)
        for k, p in enumerate(points):
            if np.max(np.abs(p - z)) <= EPS_GEOM:
                if obs_of_point[k] != obs:
                    raise CollisionError(
                        f"strategies {strategies[k][0]} and {s} give the same lottery "
                        f"{np.round(z, 12).tolist()} but reveal {obs_of_point[k]} vs {obs}"
                    )
                strategies[k].append(s)
                break
        else:
            points.append(z)
            strategies.append([s])
            obs_of_point.append(obs)
    observations = sorted(set(obs_of_point))
    labels = tuple(_path_label(tree, o) for o in obs_of_point)
    menu = Menu(np.array(points), labels=labels, provenance=tuple(tuple(s) for s in strategies))
    partition = tuple(
        tuple(k for k, o in enumerate(obs_of_point) if o == obs) for obs in observations
    )
    cell_labels = tuple(_path_label(tree, o) for o in observations)
    return CompiledAdaptive(Experiment(menu, partition, cell_labels), tuple(observations))


# ---------------------------------------------------------------- games


@dataclass(frozen=True)
class Terminal:
    lottery: tuple[float, ...]


@dataclass(frozen=True)
class Decision:
    name: str
    actions: tuple[tuple[str, "GameNode"], ...]


@dataclass(frozen=True)
class Chance:
    name: str
    outcomes: tuple[tuple[str, float, "GameNode"], ...]

    def __post_init__(self):
        total = sum(p for _, p, _ in self.outcomes)
        if any(p < 0 for _, p, _ in self.outcomes) or abs(total - 1.0) > 1e-12:
            raise InputError(f"chance node {self.name!r} probabilities must sum to 1")


GameNode = Union[Terminal, Decision, Chance]


def _collect(node: GameNode, dec: list[Decision], cha: list[Chance]) -> None:
    if isinstance(node, Decision):
        dec.append(node)
        for _, child in node.actions:
            _collect(child, dec, cha)
    elif isinstance(node, Chance):
        cha.append(node)
        for _, _, child in node.outcomes:
            _collect(child, dec, cha)


def _play(node: GameNode, strat: dict[str, str], chance: dict[str, str] | None):
    """Return (lottery, observation). With ``chance=None`` the lottery is averaged."""
    obs: list[str] = []
    while True:
        if isinstance(node, Terminal):
            return np.asarray(node.lottery, dtype=float), tuple(obs)
        if isinstance(node, Decision):
            a = strat[node.name]
            obs.append(a)
            node = dict(node.actions)[a]
            continue
        if chance is not None:
            pick = chance[node.name]
            node = next(child for name, _, child in node.outcomes if name == pick)
            continue
        total = 0.0
        for _, p, child in node.outcomes:
            if p > 0:
                lot, _ = _play(child, strat, None)
                total = total + p * lot
        return total, tuple(obs)


def strategy_names(game: GameNode) -> tuple[list[Decision], list[tuple[str, ...]]]:
    dec: list[Decision] = []
    _collect(game, dec, [])
    names = [d.name for d in dec]
    if len(set(names)) != len(names):
        raise InputError("decision node names must be unique")
    combos = list(itertools.product(*([a for a, _ in d.actions] for d in dec)))
    return dec, combos


def compile_game(game: GameNode) -> RandomizedExperiment:
    """Randomized experiment equivalent to observing on-path play of ``game``.

    The menu holds the subject's pure strategies, each embedded as the
    outcome lottery it induces in expectation over chance. Each joint chance
    realisation is an atom whose partition groups strategies by the subject
    actions seen on its path; identical atoms are merged and zero-probability
    realisations dropped.
    """
    dec, combos = strategy_names(game)
    cha: list[Chance] = []
    _collect(game, [], cha)
    n_real = math.prod(len(c.outcomes) for c in cha) if cha else 1
    if len(combos) > MAX_STRATEGIES or len(combos) * n_real > 10 * MAX_STRATEGIES:
        raise SizeOverflow(f"{len(combos)} strategies exceed {MAX_STRATEGIES}")
    realizations = []
    for picks in itertools.product(*([(n, p) for n, p, _ in c.outcomes] for c in cha)):
        prob = math.prod(p for _, p in picks)
        if prob > 0:
            realizations.append(({c.name: n for c, (n, _) in zip(cha, picks)}, prob))
    names = [",".join(s) for s in combos]
    points: list[np.ndarray] = []
    members: list[list[int]] = []
    for k, s in enumerate(combos):
        strat = {d.name: a for d, a in zip(dec, s)}
        lot, _ = _play(game, strat, None)
        for j, p in enumerate(points):
            if np.max(np.abs(p - lot)) <= EPS_GEOM:
                members[j].append(k)
                break
        else:
            points.append(lot)
            members.append([k])
    atoms: list[tuple[Experiment, float]] = []
    menu = Menu(
        np.array(points),
        labels=tuple("|".join(names[k] for k in m) for m in members),
        provenance=tuple(tuple(names[k] for k in m) for m in members),
    )
    for chance, prob in realizations:
        obs_of = []
        for m in members:
            seen = {
                _play(game, {d.name: a for d, a in zip(dec, combos[k])}, chance)[1] for k in m
            }
            if len(seen) > 1:
                raise CollisionError(
                    f"strategies {[names[k] for k in m]} induce the same lottery but are "
                    f"observed differently under chance {chance}"
                )
            obs_of.append(seen.pop())
        keys = sorted(set(obs_of))
        partition = tuple(tuple(j for j, o in enumerate(obs_of) if o == key) for key in keys)
        e = Experiment(menu, partition, tuple(",".join(k) for k in keys))
        for idx, (other, w) in enumerate(atoms):
            if other.partition == e.partition:
                atoms[idx] = (other, w + prob)
                break
        else:
            atoms.append((e, prob))
    total = sum(w for _, w in atoms)
    return RandomizedExperiment(tuple((e, w / total) for e, w in atoms))


def strategy_partition(e: Experiment) -> set[frozenset[str]]:
    """Cells of a compiled game atom as sets of strategy names."""
    prov = e.menu.provenance
    if prov is None:
        raise InputError("experiment carries no strategy provenance")
    return {frozenset(s for j in cell for s in prov[j]) for cell in e.partition}


# ---------------------------------------------------------------- targets


Piece = tuple[tuple[int, frozenset], ...]


def _piece_cone(generators: Sequence[Menu], piece: Piece) -> PolyCone:
    dim = generators[0].dim
    rows = [face_cone(generators[g], sorted(F)).halfspaces for g, F in piece]
    return PolyCone(np.vstack(rows) if rows else np.zeros((0, dim)), dim)


def _piece_contains(generators: Sequence[Menu], piece: Piece, u, tol: float = 1e-10) -> bool:
    return all(
        frozenset(argmax_set(u, generators[g], tol)[0]) == F for g, F in piece
    )


@dataclass(frozen=True, eq=False)
class TargetPartition:
    """A partition of utility space into unions of relative-interior pieces.

    A piece fixes a face of each listed generator and denotes the set of
    utilities whose maximisers over generator g are exactly that face.
    Only full-dimensional pieces need to be listed: lower-dimensional ones
    carry no mass.
    """

    generators: tuple[Menu, ...]
    cells: tuple[tuple[Piece, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        cells = tuple(tuple(tuple((int(g), frozenset(F)) for g, F in p) for p in c) for c in self.cells)
        object.__setattr__(self, "cells", cells)
        if not self.generators:
            raise InputError("target partition needs generators")
        dim = self.generators[0].dim
        if any(m.dim != dim for m in self.generators):
            raise InputError("generators must share the outcome dimension")

    @property
    def dim(self) -> int:
        return self.generators[0].dim

    def cone_unions(self) -> list[ConeUnion]:
        """Closures of the cells, one cone per piece (flagged as relative interiors)."""
        out = []
        for cell in self.cells:
            cones = tuple(_piece_cone(self.generators, p) for p in cell)
            out.append(ConeUnion(cones, self.dim, (True,) * len(cones)))
        return out

    def cell_containing(self, u) -> int | None:
        for i, cell in enumerate(self.cells):
            if any(_piece_contains(self.generators, p, u) for p in cell):
                return i
        return None

    @classmethod
    def common_refinement_pieces(cls, generators: Sequence[Menu]) -> list[Piece]:
        """Full-dimensional pieces of the common refinement of the generators' fans."""
        X = minkowski_average(list(generators))
        pieces = []
        for f in faces(X):
            if len(f.vertices) != 1 or f.direction is None:
                continue
            pieces.append(
                tuple((g, frozenset(argmax_set(f.direction, m, 1e-10)[0])) for g, m in enumerate(generators))
            )
        return pieces

    @classmethod
    def from_fan(
        cls, generators: Sequence[Menu], grouping: Sequence[int] | None = None
    ) -> "TargetPartition":
        """Group the common-refinement pieces; ``grouping[k]`` is piece k's cell."""
        pieces = cls.common_refinement_pieces(generators)
        if grouping is None:
            grouping = list(range(len(pieces)))
        if len(grouping) != len(pieces):
            raise InputError(f"grouping must list a cell for each of {len(pieces)} pieces")
        labels = sorted(set(grouping), key=list(grouping).index)
        cells = tuple(
            tuple(p for p, g in zip(pieces, grouping) if g == lab) for lab in labels
        )
        return cls(tuple(generators), cells)

    @classmethod
    def from_experiment(cls, e: Experiment) -> "TargetPartition":
        """The identified family of ``e`` as a target over its own menu."""
        cells = []
        for cell in e.partition:
            cells.append(tuple(((0, frozenset([i])),) for i in cell))
        return cls((e.menu,), tuple(cells))


def realize_partition(target: TargetPartition) -> Experiment:
    """Build an experiment whose identified family reproduces the target.

    X is the uniform Minkowski average of the generators. Every face of X
    contributes the barycenter of its vertices; the barycenter joins the
    target cell containing the relative interior of the face's normal cone.
    Faces with a lower-dimensional cone (measure zero) follow their first
    vertex; the zero cone of a full-dimensional X goes to the first cell.
    """
    X = minkowski_average(list(target.generators))
    fs = faces(X)
    vertex_cell: dict[int, int] = {}
    for f in fs:
        if len(f.vertices) == 1 and f.direction is not None:
            c = target.cell_containing(f.direction)
            if c is None:
                raise RealizationError(
                    f"vertex {X.points[f.vertices[0]].tolist()} has a normal cone in no target cell",
                    witness={"vertex": X.points[f.vertices[0]].tolist(), "direction": f.direction.tolist()},
                )
            vertex_cell[f.vertices[0]] = c
    points, owner = [], []
    for f in fs:
        bary = X.points[list(f.vertices)].mean(axis=0)
        if f.direction is None:
            c = 0
        elif len(f.vertices) == 1:
            c = vertex_cell[f.vertices[0]]
        else:
            c = target.cell_containing(f.direction)
            if c is None:
                c = vertex_cell[f.vertices[0]]
        points.append(bary)
        owner.append(c)
    menu = Menu(np.array(points), labels=tuple("+".join(map(str, f.vertices)) for f in fs))
    used = sorted(set(owner))
    partition = tuple(tuple(k for k, c in enumerate(owner) if c == i) for i in used)
    return Experiment(menu, partition, tuple(f"cell{i}" for i in used))


# ---------------------------------------------------------------- random targets


def arc_polygon(angles: Sequence[float], scale: float = 0.2) -> Menu:
    """Polygon in the 3-outcome simplex whose fan rays sit at the given angles.

    Vertex k maximises exactly the directions between ``angles[k]`` and
    ``angles[k+1]``; consecutive gaps must be below pi.
    """
    th = sorted(float(a) % circle.TWO_PI for a in angles)
    if len(th) < 3:
        raise InputError("need at least three angles")
    gaps = [(th[(k + 1) % len(th)] - th[k]) % circle.TWO_PI for k in range(len(th))]
    if max(gaps) >= math.pi - 1e-9:
        raise InputError("consecutive angles must be less than pi apart")
    pts = []
    for k in range(len(th)):
        a, b = th[k], th[(k + 1) % len(th)]
        na = np.array([math.cos(a), math.sin(a)])
        nb = np.array([math.cos(b), math.sin(b)])
        p = np.linalg.solve(np.vstack([na, nb]), np.ones(2))
        pts.append(p)
    pts = np.array(pts)
    pts *= scale / np.max(np.linalg.norm(pts, axis=1))
    center = np.full(3, 1.0 / 3.0)
    return Menu(center + pts @ circle.PLANE_BASIS.T)


def random_polytope(rng: np.random.Generator, dim: int = 3, max_vertices: int = 4) -> Menu:
    """Random point set in the simplex with 2..max_vertices points."""
    k = int(rng.integers(2, max_vertices + 1))
    return Menu(rng.dirichlet(np.ones(dim), size=k))


def random_target(
    rng: np.random.Generator, n_generators: int = 2, max_vertices: int = 4, dim: int = 3
) -> TargetPartition:
    """Random grouping of the common refinement of random polytopes' fans."""
    gens = tuple(random_polytope(rng, dim, max_vertices) for _ in range(n_generators))
    pieces = TargetPartition.common_refinement_pieces(gens)
    k = int(rng.integers(1, len(pieces) + 1))
    grouping = [int(rng.integers(k)) for _ in pieces]
    return TargetPartition.from_fan(gens, grouping)
