"""Randomised falsification harness for valuation functionals over experiments.

Each check draws trial instances from a seeded generator, evaluates the
functional on the two sides of an axiom and records every disagreement as a
serialised witness. A pass is bounded certification, not proof.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import circle
from .compiler import TargetPartition, arc_polygon, compile_batch, random_target, realize_partition
from .errors import EIVError, InputError
from .geometry import EPS_GEOM, Menu, extreme_indices, minkowski_average, mix_menus
from .identification import (
    Experiment,
    RandomizedExperiment,
    coarsen,
    identified_family,
    mu_equivalent,
)
from .io import dumps, randomized_to_dict
from .prior import PriorModel
from .valuation import IdentificationIndex, eiv

AXIOMS = (
    "monotonicity",
    "structural_invariance",
    "identification_separability",
    "translation_invariance",
    "belief_consistency",
    "symmetry",
    "entropic_additivity",
)


@dataclass(frozen=True)
class ValuationFunctional:
    """A callable value over randomized experiments with a declared tolerance."""

    fn: Callable[[RandomizedExperiment], float]
    tol: float = 1e-6
    name: str = "functional"
    prior: PriorModel | None = None

    def __call__(self, pi) -> float:
        if isinstance(pi, Experiment):
            pi = RandomizedExperiment.single(pi)
        return float(self.fn(pi))


def entropy_eiv(prior: PriorModel, exact: bool | None = None, n: int | None = None, tol: float = 1e-6) -> ValuationFunctional:
    index = IdentificationIndex.entropy()
    return ValuationFunctional(lambda pi: eiv(pi, index, prior, n=n, exact=exact).value, tol, "entropy-eiv", prior)


def perturbed_entropy_eiv(
    prior: PriorModel, delta: float = 0.05, exact: bool | None = None, n: int | None = None, tol: float = 1e-6
) -> ValuationFunctional:
    """Entropy EIV plus ``delta`` times the measure of each atom's first cell.

    The bonus depends on how cells are listed, which breaks structural
    invariance while leaving most other checks intact.
    """
    index = IdentificationIndex.entropy()

    def fn(pi: RandomizedExperiment) -> float:
        res = eiv(pi, index, prior, n=n, exact=exact)
        bonus = sum(w * rows[0].mu for w, rows in res.breakdown if rows)
        return res.value + delta * bonus

    return ValuationFunctional(fn, tol, "perturbed-entropy-eiv", prior)


def negated(v: ValuationFunctional) -> ValuationFunctional:
    return ValuationFunctional(lambda pi: -v(pi), v.tol, f"negated-{v.name}", v.prior)


@dataclass(frozen=True)
class AxiomReport:
    axiom: str
    trials: int
    violations: tuple[dict[str, Any], ...]
    skipped: int = 0

    @property
    def verdict(self) -> str:
        return "pass" if not self.violations else "fail"

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def minimal_witness(self) -> dict[str, Any] | None:
        if not self.violations:
            return None
        return min(self.violations, key=lambda w: (w["size"], dumps(w, indent=None)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "axiom": self.axiom,
            "verdict": self.verdict,
            "trials": self.trials,
            "skipped": self.skipped,
            "violations": list(self.violations),
            "minimal_witness": self.minimal_witness,
        }


# ---------------------------------------------------------------- generators


def _rng(seed: int, axiom: str, trial: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), AXIOMS.index(axiom) if axiom in AXIOMS else 99, trial])


def random_menu(rng: np.random.Generator, dim: int = 3, lo: int = 3, hi: int = 8) -> Menu:
    k = int(rng.integers(lo, hi + 1))
    return Menu(rng.dirichlet(np.ones(dim), size=k))


def random_partition(rng: np.random.Generator, size: int) -> tuple[tuple[int, ...], ...]:
    """Random merges of the discrete partition."""
    cells = [[i] for i in range(size)]
    merges = int(rng.integers(0, size))
    for _ in range(merges):
        if len(cells) < 2:
            break
        i, j = sorted(rng.choice(len(cells), size=2, replace=False))
        cells[i].extend(cells.pop(j))
    return tuple(tuple(sorted(c)) for c in cells)


def random_experiment(rng: np.random.Generator, dim: int = 3, lo: int = 3, hi: int = 8) -> Experiment:
    menu = random_menu(rng, dim, lo, hi)
    return Experiment(menu, random_partition(rng, len(menu)))


def random_coarsening(rng: np.random.Generator, e: Experiment) -> Experiment:
    if e.n_cells < 2:
        return e
    k = int(rng.integers(1, e.n_cells))
    pairs = [tuple(rng.choice(e.n_cells, size=2, replace=False)) for _ in range(k)]
    return coarsen(e, pairs)


def _size(*pis) -> int:
    return sum(len(e.menu) * len(e.partition) for pi in pis for e, _ in _as_pi(pi).atoms)


def _as_pi(x) -> RandomizedExperiment:
    return x if isinstance(x, RandomizedExperiment) else RandomizedExperiment.single(x)


def _witness(trial: int, left, right, vl: float, vr: float, **extra) -> dict[str, Any]:
    w = {
        "trial": trial,
        "size": _size(left, right),
        "left": randomized_to_dict(_as_pi(left)),
        "right": randomized_to_dict(_as_pi(right)),
        "value_left": vl,
        "value_right": vr,
    }
    w.update(extra)
    return json.loads(dumps(w, indent=None))


def _finish(axiom: str, trials: int, violations: list, skipped: int = 0) -> AxiomReport:
    ordered = sorted(violations, key=lambda w: dumps(w, indent=None))
    return AxiomReport(axiom, trials, tuple(ordered), skipped)


def _dim(v: ValuationFunctional) -> int:
    return v.prior.dim if v.prior is not None else 3


# ---------------------------------------------------------------- checks


def check_monotonicity(v: ValuationFunctional, trials: int = 100, seed: int = 0) -> AxiomReport:
    """A finer partition of the same menu is never valued below a coarser one."""
    out = []
    for t in range(trials):
        rng = _rng(seed, "monotonicity", t)
        if t == 0:
            fine = Experiment.trivial(random_menu(rng, _dim(v)))
            coarse = fine
        else:
            fine = random_experiment(rng, _dim(v))
            coarse = random_coarsening(rng, fine)
        vf, vc = v(fine), v(coarse)
        if vf < vc - v.tol:
            out.append(_witness(t, fine, coarse, vf, vc))
    return _finish("monotonicity", trials, out)


TWIN_A = ((1, 0, 0), (0.5, 0.5, 0), (0.5, 0, 0.5), (0, 0.5, 0.5))
TWIN_A2 = ((0, 0.6, 0.4), (0, 0.4, 0.6))
TWIN_B = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
TWIN_B2 = ((2 / 3, 1 / 3, 0), (2 / 3, 0, 1 / 3), (1 / 3, 1 / 3, 1 / 3))


def twin_batteries() -> tuple[Experiment, Experiment]:
    """The two batteries whose compiled experiments identify the same six cells."""
    return (
        compile_batch([Menu(TWIN_A), Menu(TWIN_A2)]),
        compile_batch([Menu(TWIN_B), Menu(TWIN_B2)]),
    )


def _permuted_cells(rng, e: Experiment) -> Experiment:
    order = rng.permutation(e.n_cells)
    if e.n_cells > 1 and np.all(order == np.arange(e.n_cells)):
        order = np.roll(order, 1)
    return Experiment(e.menu, tuple(e.partition[i] for i in order))


def _equivalent_pair(rng, t: int, dim: int, prior: PriorModel | None):
    kind = t % 4
    if kind == 0 and dim == 3 and t % 8 == 0:
        return twin_batteries()
    if kind in (0, 1):
        menus = [random_menu(rng, dim, 2, 3) for _ in range(2)]
        e1 = compile_batch(menus)
        e2 = compile_batch(menus[::-1])
        e1 = Experiment(e1.menu, random_partition(rng, len(e1.menu)))
        # same grouping of parent pairs, expressed on the permuted menu
        where = {}
        for j, parents in enumerate(e2.menu.provenance):
            for p in parents:
                where[p[::-1]] = j
        cells = []
        for cell in e1.partition:
            idx = sorted({where[e1.menu.provenance[i][0]] for i in cell})
            cells.append(idx)
        return e1, Experiment(e2.menu, tuple(tuple(c) for c in cells))
    if kind == 2 and dim == 3:
        target = random_target(rng)
        e1 = realize_partition(target)
        e2 = realize_partition(TargetPartition.from_experiment(e1))
        return e1, e2
    e = random_experiment(rng, dim)
    return e, _permuted_cells(rng, e)


def check_structural_invariance(v: ValuationFunctional, trials: int = 100, seed: int = 0) -> AxiomReport:
    """Experiments with mu-equivalent identified families get equal values.

    Pairs come from reordered batteries, realisation round trips, reordered
    cells and the two twin batteries; each pair's equivalence is
    confirmed before it is used.
    """
    out, skipped = [], 0
    for t in range(trials):
        rng = _rng(seed, "structural_invariance", t)
        e1, e2 = _equivalent_pair(rng, t, _dim(v), v.prior)
        if v.prior is not None:
            if not mu_equivalent(identified_family(e1, v.prior), identified_family(e2, v.prior)):
                skipped += 1
                continue
        v1, v2 = v(e1), v(e2)
        if abs(v1 - v2) > v.tol:
            out.append(_witness(t, e1, e2, v1, v2))
    return _finish("structural_invariance", trials, out, skipped)


def join_cells(P, Q, size: int) -> list[list[int]]:
    """Cells of the finest partition coarser than both P and Q."""
    parent = list(range(size))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for cell in list(P) + list(Q):
        for j in cell[1:]:
            a, b = find(cell[0]), find(j)
            if a != b:
                parent[max(a, b)] = min(a, b)
    groups: dict[int, list[int]] = {}
    for i in range(size):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def splice(P, Q, B: set[int]) -> tuple[tuple[int, ...], ...]:
    """Cells of P inside B together with cells of Q outside B."""
    inside = [c for c in P if set(c) <= B]
    outside = [c for c in Q if not set(c) & B]
    return tuple(tuple(c) for c in inside + outside)


def separability_instance() -> tuple[RandomizedExperiment, RandomizedExperiment]:
    """Two half-half mixtures over the four-point menu that must be valued equally."""
    menu = Menu(TWIN_A)
    P = ((0,), (1,), (2,), (3,))
    P2 = ((0, 1), (2, 3))
    Q = ((0, 1), (2,), (3,))
    Q2 = ((0,), (1,), (2, 3))
    left = RandomizedExperiment.mix(0.5, Experiment(menu, P), Experiment(menu, P2))
    right = RandomizedExperiment.mix(0.5, Experiment(menu, Q), Experiment(menu, Q2))
    return left, right


def check_identification_separability(v: ValuationFunctional, trials: int = 100, seed: int = 0) -> AxiomReport:
    """``(A,P)/2 + (A,Q)/2`` matches ``(A,P_B Q)/2 + (A,Q_B P)/2`` for jointly measurable B."""
    out = []
    for t in range(trials):
        rng = _rng(seed, "identification_separability", t)
        if t == 0 and _dim(v) == 3:
            left, right = separability_instance()
        else:
            menu = random_menu(rng, _dim(v))
            P = random_partition(rng, len(menu))
            Q = random_partition(rng, len(menu))
            blocks = join_cells(P, Q, len(menu))
            pick = [b for b in blocks if rng.random() < 0.5]
            B = {i for b in pick for i in b}
            left = RandomizedExperiment.mix(0.5, Experiment(menu, P), Experiment(menu, Q))
            right = RandomizedExperiment.mix(
                0.5, Experiment(menu, splice(P, Q, B)), Experiment(menu, splice(Q, P, B))
            )
        vl, vr = v(left), v(right)
        if abs(vl - vr) > v.tol:
            out.append(_witness(t, left, right, vl, vr))
    return _finish("identification_separability", trials, out)


def translate(e: Experiment, B: Menu, alpha: float, parent: int = 0) -> Experiment:
    """``(alpha A + (1-alpha) B, Q)`` with each point filed under one of its parents' cells.

    ``parent`` picks which recorded decomposition decides the cell (0 = first,
    -1 = last); the choice affects only points of measure zero.
    """
    M = mix_menus(alpha, e.menu, B)
    owner = e.cell_index_array()
    cells: dict[int, list[int]] = {k: [] for k in range(e.n_cells)}
    for j, parents in enumerate(M.provenance):
        cells[owner[parents[parent][0]]].append(j)
    return Experiment(M, tuple(tuple(c) for c in cells.values() if c))


def check_translation_invariance(v: ValuationFunctional, trials: int = 100, seed: int = 0) -> AxiomReport:
    """Mixing the menu and every cell with a common menu B leaves the value unchanged."""
    out = []
    for t in range(trials):
        rng = _rng(seed, "translation_invariance", t)
        e = random_experiment(rng, _dim(v), 3, 6)
        B = random_menu(rng, _dim(v), 1, 4)
        alpha = float(rng.uniform(0.05, 0.95))
        e2 = translate(e, B, alpha)
        v1, v2 = v(e), v(e2)
        if abs(v1 - v2) > v.tol:
            out.append(_witness(t, e, e2, v1, v2, alpha=alpha))
    return _finish("translation_invariance", trials, out)


def with_null_cell(rng: np.random.Generator, dim: int) -> tuple[Experiment, int]:
    """A random experiment plus interior points forming a cell of measure zero."""
    base = random_menu(rng, dim, 3, 6)
    ext = list(extreme_indices(base))
    pts = [base.points[i] for i in ext]
    k = int(rng.integers(1, 3))
    interior = []
    for _ in range(k):
        w = rng.dirichlet(np.ones(len(ext)))
        interior.append(w @ base.points[ext])
    menu = Menu(np.array(pts + interior))
    m = len(ext)
    rest = random_partition(rng, m)
    null = tuple(range(m, m + k))
    return Experiment(menu, (null,) + rest), 0


def check_belief_consistency(v: ValuationFunctional, trials: int = 100, seed: int = 0) -> AxiomReport:
    """Merging a null cell into another cell leaves the value unchanged."""
    out = []
    for t in range(trials):
        rng = _rng(seed, "belief_consistency", t)
        e, k = with_null_cell(rng, _dim(v))
        j = int(rng.integers(1, e.n_cells)) if e.n_cells > 1 else 0
        merged = coarsen(e, [(k, j)])
        v1, v2 = v(e), v(merged)
        if abs(v1 - v2) > v.tol:
            out.append(_witness(t, e, merged, v1, v2))
    return _finish("belief_consistency", trials, out)


def arc_experiment(measures: Sequence[float], phase: float = 0.0) -> Experiment:
    """A 3-outcome experiment whose cells have the given uniform-prior measures.

    Positive measures become arcs of a tangential polygon (arcs of half the
    circle or more are split); zero measures become interior points.
    """
    ms = [float(m) for m in measures]
    if any(m < 0 for m in ms) or abs(sum(ms) - 1.0) > 1e-9:
        raise InputError("cell measures must form a probability vector")
    arcs = []
    pos = phase
    for k, m in enumerate(ms):
        if m <= 0:
            continue
        span = m * circle.TWO_PI
        pieces = max(1, math.ceil(span / (0.45 * circle.TWO_PI)))
        for _ in range(pieces):
            arcs.append((pos % circle.TWO_PI, k))
            pos += span / pieces
    arcs.sort()
    # vertex j of the polygon owns the arc starting at the j-th sorted angle
    poly = arc_polygon([a for a, _ in arcs])
    cells: dict[int, list[int]] = {}
    for j, (_, k) in enumerate(arcs):
        cells.setdefault(k, []).append(j)
    points = list(poly.points)
    centre = poly.points.mean(axis=0)
    nulls = [k for k, m in enumerate(ms) if m <= 0]
    for r, k in enumerate(nulls):
        shrink = 0.3 * (1.0 - r / (len(nulls) + 1))
        points.append((1.0 - shrink) * centre + shrink * poly.points[r % len(poly)])
        cells[k] = [len(points) - 1]
    partition = tuple(tuple(cells[k]) for k in range(len(ms)))
    return Experiment(Menu(np.array(points)), partition)


def _measures(v: ValuationFunctional, e: Experiment) -> np.ndarray:
    return identified_family(e, v.prior).values()


def _dominated_spread(rng, p: np.ndarray, flip: float = 0.5, tries: int = 20) -> np.ndarray | None:
    """A vector q with ``|q_i - 1/n| >= |p_i - 1/n|`` for every i, or None.

    Deviations from uniform are stretched by random factors and may change
    sign (the dominance condition only compares their sizes).
    """
    n = len(p)
    d = p - 1.0 / n
    scale = 0.3
    for _ in range(tries):
        sign = np.where(d >= 0, 1.0, -1.0)
        sign[rng.random(n) < flip] *= -1.0
        dq = sign * (1.0 + rng.exponential(scale, size=n)) * np.abs(d)
        pos, neg = dq[dq > 0].sum(), -dq[dq < 0].sum()
        if pos <= 0 or neg <= 0:
            continue
        if pos > neg:
            dq[dq < 0] *= pos / neg
        else:
            dq[dq > 0] *= neg / pos
        q = 1.0 / n + dq
        if np.all(q >= 0):
            return q / q.sum()
        scale /= 2.0
    return None


def symmetry_dominates(p: Sequence[float], q: Sequence[float], tol: float = 1e-12) -> tuple[int, ...] | None:
    """A cell ordering of q under which q is at least as uneven as p cell by cell."""
    n = len(p)
    if len(q) != n:
        return None
    for perm in itertools.permutations(range(n)):
        if all(abs(q[perm[i]] - 1.0 / n) >= abs(p[i] - 1.0 / n) - tol for i in range(n)):
            return perm
    return None


def check_symmetry(
    v: ValuationFunctional, trials: int = 100, seed: int = 0, pairs: Sequence[tuple[Experiment, Experiment]] = ()
) -> AxiomReport:
    """The more even experiment is weakly preferred when it dominates cell by cell.

    Dominance may use any ordering of the second experiment's cells (n <= 6).
    Each trial pairs a random experiment with a companion whose cell
    measures deviate more from uniform, cell by cell; odd trials shuffle the
    companion's cells. Extra ``pairs`` are checked as given.
    """
    if v.prior is None or not v.prior.exact_available:
        raise InputError("symmetry checks need the exact three-outcome prior")
    out, skipped = [], 0
    cases = [(None, a, b) for a, b in pairs] + [(t, None, None) for t in range(trials)]
    for t, a, b in cases:
        if a is None:
            rng = _rng(seed, "symmetry", t)
            a = random_experiment(rng, 3, 3, 7)
            pa = _measures(v, a)
            if len(pa) > 6:
                skipped += 1
                continue
            q = _dominated_spread(rng, pa)
            if q is None:
                skipped += 1
                continue
            b = arc_experiment(q, float(rng.uniform(0, circle.TWO_PI)))
            if t % 2 == 1:
                b = _permuted_cells(rng, b)
        pa, pb = _measures(v, a), _measures(v, b)
        if len(pa) != len(pb) or len(pa) > 6:
            skipped += 1
            continue
        if symmetry_dominates(pa, pb) is None:
            if symmetry_dominates(pb, pa) is None:
                skipped += 1
                continue
            a, b, pa, pb = b, a, pb, pa
        va, vb = v(a), v(b)
        if va < vb - v.tol:
            out.append(_witness(-1 if t is None else t, a, b, va, vb, measures_left=pa, measures_right=pb))
    return _finish("symmetry", trials + len(pairs), out, skipped)


def check_entropic_additivity(v: ValuationFunctional, trials: int = 100, seed: int = 0) -> AxiomReport:
    """``a (A,P+) + (1-a)(A,{A})`` matches ``a (A,P) + (1-a)(B,Q)`` with ``a = 1/(1+mu(P1))``.

    P+ splits the first cell P1 of P; (B,Q) is built with cell measures equal
    to the conditional measures of that split.
    """
    if v.prior is None or not v.prior.exact_available:
        raise InputError("entropic additivity checks need the exact three-outcome prior")
    out, skipped = [], 0
    for t in range(trials):
        rng = _rng(seed, "entropic_additivity", t)
        menu = random_menu(rng, 3, 3, 8)
        rest = random_partition(rng, len(menu))
        big = max(range(len(rest)), key=lambda k: len(rest[k]))
        P1 = rest[big]
        if len(P1) < 2:
            skipped += 1
            continue
        others = [c for k, c in enumerate(rest) if k != big]
        sub = random_partition(rng, len(P1))
        if len(sub) < 2:
            sub = ((0,), tuple(range(1, len(P1))))
        split = [tuple(P1[i] for i in c) for c in sub]
        P = Experiment(menu, (P1,) + tuple(others))
        dagger = Experiment(menu, tuple(split) + tuple(others))
        fam = identified_family(dagger, v.prior)
        m1 = identified_family(P, v.prior).measures[0].value
        if m1 <= 1e-9:
            skipped += 1
            continue
        cond = fam.values()[: len(split)] / m1
        cond = cond / cond.sum()
        B = arc_experiment(cond, float(rng.uniform(0, circle.TWO_PI)))
        alpha = 1.0 / (1.0 + m1)
        left = RandomizedExperiment.mix(alpha, dagger, Experiment.trivial(menu))
        right = RandomizedExperiment.mix(alpha, P, B)
        vl, vr = v(left), v(right)
        if abs(vl - vr) > v.tol:
            out.append(_witness(t, left, right, vl, vr, alpha=alpha))
    return _finish("entropic_additivity", trials, out, skipped)


CHECKS: dict[str, Callable[..., AxiomReport]] = {
    "monotonicity": check_monotonicity,
    "structural_invariance": check_structural_invariance,
    "identification_separability": check_identification_separability,
    "translation_invariance": check_translation_invariance,
    "belief_consistency": check_belief_consistency,
    "symmetry": check_symmetry,
    "entropic_additivity": check_entropic_additivity,
}


def run_checks(
    v: ValuationFunctional, names: Sequence[str] | None = None, trials: int = 100, seed: int = 0
) -> list[AxiomReport]:
    names = list(AXIOMS if not names else names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise InputError(f"unknown axiom check(s): {', '.join(unknown)}")
    return [CHECKS[n](v, trials=trials, seed=seed) for n in names]
