"""Identification indices, the expected identification value, T1 checks and eta."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import circle
from .errors import InputError, NullIdentification
from .geometry import ConeUnion, Menu
from .identification import (
    MU_TOL,
    Experiment,
    IdentifiedFamily,
    RandomizedExperiment,
    Region,
    as_randomized,
    identified_family,
)
from .prior import MeasureEstimate, PriorModel, use_exact

NULL_TOL = 1e-12
INDEX_KINDS = ("entropy", "hypothesis", "promotion", "table", "belief-free")


class _Space:
    """Measures of regions on one evaluation path (arcs or shared samples)."""

    def __init__(self, prior: PriorModel, n: int | None, exact: bool | None):
        self.prior = prior
        self.exact = use_exact(prior, exact)
        self.U = None if self.exact else prior.evaluation_samples(n)

    def arcs(self, W: Region) -> circle.ArcSet:
        if isinstance(W, circle.ArcSet):
            return W
        if isinstance(W, np.ndarray):
            raise InputError("sample masks have no exact measure")
        return W.arcs

    def mask(self, W: Region) -> np.ndarray:
        if isinstance(W, np.ndarray):
            return W
        if isinstance(W, circle.ArcSet):
            return np.array([W.contains(circle.angle_of(u), 0.0) for u in self.U])
        return W.contains(self.U)

    def measure(self, W: Region) -> float:
        if self.exact:
            return self.arcs(W).measure
        return float(np.mean(self.mask(W)))

    def inter(self, W: Region, V: Region) -> float:
        if self.exact:
            return self.arcs(W).intersect(self.arcs(V)).measure
        return float(np.mean(self.mask(W) & self.mask(V)))

    def null(self, m: float) -> bool:
        return m <= (NULL_TOL if self.exact else 0.0)


@dataclass(frozen=True, eq=False)
class IdentificationIndex:
    """The analyst's value tau of learning that the utility lies in W.

    kinds:
      ``entropy``: ``-log mu(W)``.
      ``hypothesis``: 1 when W decides ``w_star`` (W inside it or disjoint
      from it up to null sets), else 0.
      ``promotion``: ``max_a E[xi(a,u) | W] - max_a E[xi(a,u)]`` for a payoff
      ``xi(a, U) -> values`` over actions ``a in {0, 1}``.
      ``table``: explicit values on unions of named ``atoms`` (a partition
      of utility space); keys are frozensets of atom indices.
      ``belief-free``: a table whose values are summed without mu weights.
    """

    kind: str
    w_star: Region | None = None
    payoff: Callable[[int, np.ndarray], np.ndarray] | None = None
    atoms: tuple[Region, ...] = ()
    values: dict[frozenset, float] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.kind not in INDEX_KINDS:
            raise InputError(f"unknown index kind {self.kind!r}")
        if self.kind == "hypothesis" and self.w_star is None:
            raise InputError("hypothesis index needs w_star")
        if self.kind == "promotion" and self.payoff is None:
            raise InputError("promotion index needs a payoff")
        if self.kind in ("table", "belief-free"):
            if not self.atoms:
                raise InputError("table index needs atoms")
            vals = {frozenset(int(i) for i in k): float(v) for k, v in self.values.items()}
            full = frozenset(range(len(self.atoms)))
            if self.kind == "table" and abs(vals.get(full, 0.0)) > 1e-12:
                raise InputError("table index must give the whole space value 0")
            vals.setdefault(full, 0.0)
            object.__setattr__(self, "values", vals)

    @classmethod
    def entropy(cls) -> "IdentificationIndex":
        return cls("entropy", name="entropy")

    @classmethod
    def hypothesis(cls, w_star: Region) -> "IdentificationIndex":
        return cls("hypothesis", w_star=w_star, name="hypothesis")

    @classmethod
    def promotion(cls, payoff) -> "IdentificationIndex":
        return cls("promotion", payoff=payoff, name="promotion")

    @classmethod
    def table(cls, atoms: Sequence[Region], values: dict, kind: str = "table") -> "IdentificationIndex":
        return cls(kind, atoms=tuple(atoms), values=dict(values), name=kind)


def _atoms_of(index: IdentificationIndex, W: Region, space: _Space) -> frozenset:
    mW = space.measure(W)
    members, covered = [], 0.0
    for i, atom in enumerate(index.atoms):
        m = space.inter(W, atom)
        if not space.null(m):
            members.append(i)
            covered += m
    tol = MU_TOL if space.exact else 1.0 / max(1, 0 if space.U is None else len(space.U))
    member_mass = sum(space.measure(index.atoms[i]) for i in members)
    if abs(covered - mW) > tol or abs(member_mass - mW) > tol:
        raise InputError("set is not a union of the table's atoms up to null sets")
    return frozenset(members)


def tau(
    index: IdentificationIndex,
    W: Region,
    prior: PriorModel,
    n: int | None = None,
    exact: bool | None = None,
    _space: _Space | None = None,
) -> float:
    """Index value of the identified set W."""
    space = _space or _Space(prior, n, exact)
    kind = index.kind
    if kind == "entropy":
        m = space.measure(W)
        if space.null(m):
            raise NullIdentification("entropy index evaluated on a null set")
        return -math.log(m)
    if kind == "hypothesis":
        m = space.measure(W)
        inside = space.inter(W, index.w_star)
        return 1.0 if space.null(m - inside) or space.null(inside) else 0.0
    if kind == "promotion":
        U = space.U if space.U is not None else prior.draw(n or 100_000)
        sub = space.mask(W) if space.U is not None else W.contains(U)
        if not sub.any():
            raise NullIdentification("promotion index evaluated on a null set")
        pay = [np.asarray(index.payoff(a, U), dtype=float) for a in (0, 1)]
        cond = max(p[sub].mean() for p in pay)
        base = max(p.mean() for p in pay)
        return float(cond - base)
    key = _atoms_of(index, W, space)
    if key not in index.values:
        raise InputError(f"table has no value for atom set {sorted(key)}")
    return index.values[key]


# ---------------------------------------------------------------- EIV


@dataclass(frozen=True)
class CellValue:
    cell: tuple[int, ...]
    tau: float
    mu: float
    contribution: float


@dataclass(frozen=True)
class EIVResult:
    value: float
    std_error: float
    exact: bool
    breakdown: tuple[tuple[float, tuple[CellValue, ...]], ...]

    def __float__(self) -> float:
        return self.value


def _experiment_value(
    e: Experiment, index: IdentificationIndex, space: _Space, n: int | None
) -> tuple[float, float, tuple[CellValue, ...]]:
    fam: IdentifiedFamily = identified_family(e, space.prior, n=n, exact=space.exact)
    rows, contribs, derivs, probs = [], [], [], []
    for k, (W, m) in enumerate(fam.cells):
        p = m.value
        if space.null(p):
            continue
        region = W if space.exact else fam.masks[k]
        if index.kind == "entropy":
            t = -math.log(p)
        elif index.kind == "belief-free":
            t = tau(index, region, space.prior, _space=space)
        else:
            t = tau(index, region, space.prior, _space=space)
        c = t if index.kind == "belief-free" else t * p
        rows.append(CellValue(e.partition[k], t, p, c))
        contribs.append(c)
        probs.append(p)
        derivs.append(-(math.log(p) + 1.0) if index.kind == "entropy" else t)
    value = float(sum(contribs))
    se = 0.0
    if not space.exact and index.kind != "belief-free":
        d, p = np.array(derivs), np.array(probs)
        var = (np.sum(d * d * p) - np.sum(d * p) ** 2) / len(space.U)
        se = math.sqrt(max(var, 0.0))
    return value, se, tuple(rows)


def eiv(
    pi: RandomizedExperiment | Experiment,
    index: IdentificationIndex,
    prior: PriorModel,
    n: int | None = None,
    exact: bool | None = None,
) -> EIVResult:
    """Expected identification value ``sum_e pi(e) sum_P tau(W_P) mu(W_P)``.

    Null cells are dropped before tau is evaluated. The Monte Carlo error is
    the delta-method standard error per atom, summed across atoms (atoms
    share samples, so this is a conservative bound).
    """
    pi = as_randomized(pi)
    space = _Space(prior, n, exact)
    total, se, parts = 0.0, 0.0, []
    for e, w in pi.atoms:
        v, s, rows = _experiment_value(e, index, space, n)
        total += w * v
        se += w * s
        parts.append((w, rows))
    return EIVResult(total, se, space.exact, tuple(parts))


# ---------------------------------------------------------------- T1


@dataclass(frozen=True)
class T1Report:
    passed: bool
    trials: int
    equality_cases: int
    violations: tuple[dict[str, Any], ...]


def _random_menu(rng: np.random.Generator, dim: int, lo: int = 3, hi: int = 8) -> Menu:
    k = int(rng.integers(lo, hi + 1))
    return Menu(rng.dirichlet(np.ones(dim), size=k))


def _t1_check(index, W, V, rest, space, tol):
    mV = space.measure(V)
    if space.null(mV):
        return None
    mW = space.inter(W, V)
    q = mW / mV
    tV = tau(index, V, space.prior, _space=space)
    lhs = 0.0
    if not space.null(mW):
        lhs += tau(index, W, space.prior, _space=space) * q
    if not space.null(mV - mW):
        lhs += tau(index, rest, space.prior, _space=space) * (1.0 - q)
    equality = space.null(mW) or space.null(mV - mW)
    ok = lhs >= tV - tol and (not equality or abs(lhs - tV) <= tol)
    return ok, equality, {"mu_W_given_V": q, "lhs": lhs, "tau_V": tV}


def verify_T1(
    index: IdentificationIndex,
    prior: PriorModel,
    trials: int,
    seed: int = 0,
    tol: float = 1e-9,
    n: int | None = None,
    exact: bool | None = None,
) -> T1Report:
    """Check ``tau(W) mu(W|V) + tau(V-W) (1 - mu(W|V)) >= tau(V)`` on random nested pairs.

    Table indices draw pairs from unions of their atoms; other kinds from
    unions of cells of random menus. When W or V-W is null the inequality
    must hold with equality. Pairs with a null V are redrawn, up to ten
    draws per requested pair.
    """
    if trials < 1:
        raise InputError("trials must be at least 1")
    space = _Space(prior, n, exact)
    rng = np.random.default_rng(seed)
    violations, eq_cases, done = [], 0, 0
    t = -1
    while done < trials and t < 10 * trials:
        t += 1
        if index.kind in ("table", "belief-free"):
            pieces = list(index.atoms)
        else:
            menu = _random_menu(rng, prior.dim)
            pieces = Experiment.discrete(menu).cones()
        k = len(pieces)
        v_idx = [i for i in range(k) if rng.random() < 0.7] or [int(rng.integers(k))]
        w_idx = [i for i in v_idx if rng.random() < 0.5]
        if done % 10 == 0:
            w_idx = list(v_idx)
        r_idx = [i for i in v_idx if i not in w_idx]
        V = _union(pieces, v_idx, space)
        W = _union(pieces, w_idx, space)
        R = _union(pieces, r_idx, space)
        out = _t1_check(index, W, V, R, space, tol)
        if out is None:
            continue
        done += 1
        ok, equality, info = out
        eq_cases += equality
        if not ok:
            info.update(trial=t, W=w_idx, V=v_idx)
            violations.append(info)
    return T1Report(not violations, done, eq_cases, tuple(violations))


def _union(pieces, idx, space: _Space):
    if not idx:
        if space.exact:
            return circle.ArcSet.empty()
        return np.zeros(len(space.U), dtype=bool)
    regs = [pieces[i] for i in idx]
    if all(isinstance(r, ConeUnion) for r in regs):
        out = regs[0]
        for r in regs[1:]:
            out = out.union(r)
        return out
    if space.exact:
        out = circle.ArcSet.empty()
        for r in regs:
            out = out.union(space.arcs(r))
        return out
    out = np.zeros(len(space.U), dtype=bool)
    for r in regs:
        out |= space.mask(r)
    return out


def random_table_index(
    atoms: Sequence[Region],
    prior: PriorModel,
    rng: np.random.Generator,
    features: int = 3,
    exact: bool | None = None,
) -> IdentificationIndex:
    """A random T1-passing table over every union of ``atoms``.

    Each atom gets a random feature vector; a set's value is a convex
    function of the mu-weighted mean feature, shifted so the whole space
    scores 0. Jensen's inequality then gives T1.
    """
    space = _Space(prior, None, exact)
    mus = np.array([space.measure(a) for a in atoms])
    X = rng.normal(size=(len(atoms), features))
    M = rng.normal(size=(features, features))
    c = rng.normal(size=features)

    def f(z):
        return float(np.sum((M @ z) ** 2) + np.max(z * c))

    def mean(S):
        w = mus[list(S)]
        if w.sum() <= 0:
            return np.zeros(features)
        return (w[:, None] * X[list(S)]).sum(axis=0) / w.sum()

    full = tuple(range(len(atoms)))
    base = f(mean(full))
    values = {}
    for r in range(1, len(atoms) + 1):
        for S in itertools.combinations(full, r):
            values[frozenset(S)] = f(mean(S)) - base
    values[frozenset(full)] = 0.0
    return IdentificationIndex.table(atoms, values)


# ---------------------------------------------------------------- eta


@dataclass(frozen=True)
class ProbVector:
    entries: tuple[float, ...]

    def __post_init__(self):
        p = tuple(float(x) for x in self.entries)
        if not p or any(not 0.0 <= x <= 1.0 for x in p) or abs(sum(p) - 1.0) > 1e-12:
            raise InputError(f"not a probability vector: {p}")
        object.__setattr__(self, "entries", p)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def eta(p: ProbVector | Sequence[float]) -> float:
    """Shannon entropy with natural log and ``0 log 0 = 0``."""
    p = p if isinstance(p, ProbVector) else ProbVector(tuple(p))
    return -math.fsum(x * math.log(x) for x in p if x > 0.0)


def compound(p: ProbVector | Sequence[float], qs: Sequence[ProbVector | Sequence[float]]) -> ProbVector:
    """The vector ``(p_i q^i_j)`` over all i, j."""
    p = list(p)
    if len(qs) != len(p):
        raise InputError("one conditional vector per entry of p required")
    entries = [pi * qj for pi, q in zip(p, qs) for qj in q]
    s = math.fsum(entries)
    return ProbVector(tuple(x / s for x in entries))


def measure_vector(F: IdentifiedFamily) -> ProbVector:
    """The positive cell measures of a family, renormalised."""
    vals = [m.value for m in F.measures if m.value > 0.0]
    s = math.fsum(vals)
    return ProbVector(tuple(v / s for v in vals))
