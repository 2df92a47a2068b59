"""JSON (de)serialisation for menus, experiments, priors, indices and designs.

Every document carries ``"schema": "eiv/1"`` when emitted; loaders accept
documents without the tag. Floats are written with 17 significant digits so
values survive a round trip bit for bit.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from .compiler import AdaptiveTree, Chance, Decision, GameNode, TargetPartition, Terminal
from .errors import SchemaError
from .geometry import ConeUnion, Menu, cell_union
from .identification import Experiment, RandomizedExperiment
from .prior import Patch, PriorModel
from .valuation import IdentificationIndex

SCHEMA = "eiv/1"


# ---------------------------------------------------------------- encoding


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise SchemaError(f"cannot serialise non-finite number {x}")
    if x == int(x) and abs(x) < 1e16:
        return f"{int(x)}.0"
    return format(x, ".17g")


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return [_plain(x) for x in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    if isinstance(obj, (frozenset, set)):
        return sorted(_plain(x) for x in obj)
    return obj


def _encode(obj: Any, indent: int | None, level: int) -> str:
    import json

    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = "," if indent is not None else ", "
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if indent is not None and all(not isinstance(x, (list, dict)) for x in obj):
            return "[" + ", ".join(_encode(x, None, 0) for x in obj) + "]"
        return "[" + sep.join(pad + _encode(x, indent, level + 1) for x in obj) + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            pad + json.dumps(str(k)) + ": " + _encode(v, indent, level + 1) for k, v in obj.items()
        ]
        return "{" + sep.join(items) + end + "}"
    raise SchemaError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any, indent: int | None = 2) -> str:
    """Deterministic JSON text with 17-significant-digit floats."""
    return _encode(_plain(obj), indent, 0)


# ---------------------------------------------------------------- helpers


def _require(doc: Any, key: str, path: str) -> Any:
    if not isinstance(doc, dict):
        raise SchemaError("expected an object", path)
    if key not in doc:
        raise SchemaError(f"missing field {key!r}", path)
    return doc[key]


def _check_schema(doc: Any, path: str) -> None:
    if isinstance(doc, dict) and "schema" in doc and doc["schema"] != SCHEMA:
        raise SchemaError(f"unsupported schema {doc['schema']!r}, expected {SCHEMA!r}", path)


def _matrix(x: Any, path: str) -> np.ndarray:
    try:
        arr = np.asarray(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"expected a list of number lists ({exc})", path) from None
    if arr.ndim != 2:
        raise SchemaError("expected a list of number lists", path)
    return arr


# ---------------------------------------------------------------- menus


def menu_to_dict(m: Menu) -> Any:
    if m.labels is None:
        return m.points
    return {"points": m.points, "labels": list(m.labels)}


def menu_from_json(doc: Any, path: str = "menu") -> Menu:
    labels = None
    if isinstance(doc, dict):
        labels = doc.get("labels")
        doc = _require(doc, "points", path)
    try:
        return Menu(_matrix(doc, path), labels=labels)
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(str(exc), path) from None


def experiment_to_dict(e: Experiment) -> dict:
    out: dict[str, Any] = {"schema": SCHEMA, "menu": e.menu.points}
    if e.menu.labels is not None:
        out["labels"] = list(e.menu.labels)
    out["partition"] = [list(c) for c in e.partition]
    if e.cell_labels is not None:
        out["cell_labels"] = list(e.cell_labels)
    if e.menu.provenance is not None and all(
        isinstance(s, str) for p in e.menu.provenance for s in p
    ):
        out["strategies"] = [list(p) for p in e.menu.provenance]
    return out


def experiment_from_json(doc: Any, path: str = "experiment") -> Experiment:
    _check_schema(doc, path)
    pts = _matrix(_require(doc, "menu", path), f"{path}.menu")
    part = doc.get("partition")
    labels = doc.get("labels")
    prov = doc.get("strategies")
    try:
        menu = Menu(pts, labels=labels, provenance=None if prov is None else tuple(tuple(p) for p in prov))
        if part is None:
            return Experiment.discrete(menu)
        if not isinstance(part, list) or not all(isinstance(c, list) for c in part):
            raise SchemaError("partition must be a list of index lists", f"{path}.partition")
        return Experiment(menu, part, doc.get("cell_labels"))
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(str(exc), path) from None


def randomized_to_dict(pi: RandomizedExperiment) -> dict:
    return {
        "schema": SCHEMA,
        "atoms": [
            {"experiment": {k: v for k, v in experiment_to_dict(e).items() if k != "schema"}, "weight": w}
            for e, w in pi.atoms
        ],
    }


def randomized_from_json(doc: Any, path: str = "design") -> RandomizedExperiment:
    """Accepts either a randomized experiment or a plain experiment document."""
    _check_schema(doc, path)
    if isinstance(doc, dict) and "atoms" in doc:
        atoms = doc["atoms"]
        if not isinstance(atoms, list):
            raise SchemaError("atoms must be a list", f"{path}.atoms")
        out = []
        for k, a in enumerate(atoms):
            p = f"{path}.atoms[{k}]"
            e = experiment_from_json(_require(a, "experiment", p), f"{p}.experiment")
            w = _require(a, "weight", p)
            if not isinstance(w, (int, float)):
                raise SchemaError("weight must be a number", f"{p}.weight")
            out.append((e, float(w)))
        try:
            return RandomizedExperiment(tuple(out))
        except ValueError as exc:
            raise SchemaError(str(exc), path) from None
    return RandomizedExperiment.single(experiment_from_json(doc, path))


# ---------------------------------------------------------------- priors


def prior_to_dict(p: PriorModel) -> dict:
    out: dict[str, Any] = {"schema": SCHEMA, "kind": p.kind, "l": p.dim, "seed": int(p.seed)}
    if p.kind == "mixture":
        out["patches"] = [
            {"weight": q.weight, "center": list(q.center), "radius": q.radius} for q in p.patches
        ]
    if p.kind == "empirical":
        out["samples"] = p.samples
    return out


def prior_from_json(doc: Any, path: str = "prior", seed: int | None = None) -> PriorModel:
    _check_schema(doc, path)
    kind = _require(doc, "kind", path)
    s = doc.get("seed", 0) if seed is None else seed
    if not isinstance(s, int) or isinstance(s, bool):
        raise SchemaError("seed must be an integer", f"{path}.seed")
    try:
        if kind == "uniform":
            return PriorModel.uniform(int(doc.get("l", 3)), s)
        if kind == "empirical":
            return PriorModel.empirical(_matrix(_require(doc, "samples", path), f"{path}.samples"), s)
        if kind == "mixture":
            l = int(_require(doc, "l", path))
            patches = tuple(
                Patch(float(q["weight"]), tuple(float(c) for c in q["center"]), float(q["radius"]))
                for q in _require(doc, "patches", path)
            )
            return PriorModel("mixture", l, s, patches)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed prior ({exc})", path) from None
    except ValueError as exc:
        raise SchemaError(str(exc), path) from None
    raise SchemaError(f"unknown prior kind {kind!r}", f"{path}.kind")


# ---------------------------------------------------------------- indices


def cone_union_from_json(doc: Any, path: str) -> ConeUnion:
    """``{"menu": [...], "points": [i, ...]}`` denotes ``W_{menu, points}``."""
    menu = menu_from_json(_require(doc, "menu", path), f"{path}.menu")
    idx = _require(doc, "points", path)
    if not isinstance(idx, list) or not all(isinstance(i, int) and 0 <= i < len(menu) for i in idx):
        raise SchemaError("points must list menu indices", f"{path}.points")
    return cell_union(menu, idx)


def _linear_payoff(weights: np.ndarray):
    def xi(a: int, U: np.ndarray) -> np.ndarray:
        return U @ weights[a]

    return xi


def index_from_json(doc: Any, path: str = "index") -> IdentificationIndex:
    _check_schema(doc, path)
    kind = _require(doc, "kind", path)
    if kind == "entropy":
        return IdentificationIndex.entropy()
    if kind == "hypothesis":
        return IdentificationIndex.hypothesis(cone_union_from_json(_require(doc, "w_star", path), f"{path}.w_star"))
    if kind == "promotion":
        pay = _require(doc, "payoff", path)
        W = _matrix(_require(pay, "weights", f"{path}.payoff"), f"{path}.payoff.weights")
        if W.shape[0] != 2:
            raise SchemaError("promotion payoff needs one weight row per action 0 and 1", f"{path}.payoff")
        return IdentificationIndex.promotion(_linear_payoff(W))
    if kind in ("table", "belief-free"):
        cells = _require(doc, "cells", path)
        atoms = [cone_union_from_json(c, f"{path}.cells[{k}]") for k, c in enumerate(cells)]
        values = {}
        for k, v in enumerate(_require(doc, "values", path)):
            if isinstance(v, (int, float)):
                values[frozenset([k])] = float(v)
            else:
                values[frozenset(_require(v, "cells", f"{path}.values[{k}]"))] = float(
                    _require(v, "value", f"{path}.values[{k}]")
                )
        try:
            return IdentificationIndex.table(atoms, values, kind=kind)
        except ValueError as exc:
            raise SchemaError(str(exc), path) from None
    raise SchemaError(f"unknown index kind {kind!r}", f"{path}.kind")


# ---------------------------------------------------------------- designs


def tree_from_json(doc: Any, path: str = "tree") -> AdaptiveTree:
    menu = menu_from_json(
        {"points": _require(doc, "menu", path), "labels": doc.get("labels")}
        if doc.get("labels") is not None
        else _require(doc, "menu", path),
        f"{path}.menu",
    )
    kids = doc.get("children") or [None] * len(menu)
    if not isinstance(kids, list):
        raise SchemaError("children must be a list", f"{path}.children")
    children = tuple(
        None if c is None else tree_from_json(c, f"{path}.children[{k}]") for k, c in enumerate(kids)
    )
    try:
        return AdaptiveTree(menu, children)
    except ValueError as exc:
        raise SchemaError(str(exc), path) from None


def tree_to_dict(t: AdaptiveTree) -> dict:
    out: dict[str, Any] = {"menu": t.menu.points}
    if t.menu.labels is not None:
        out["labels"] = list(t.menu.labels)
    out["children"] = [None if c is None else tree_to_dict(c) for c in t.children]
    return out


def game_from_json(doc: Any, path: str = "game") -> GameNode:
    kind = _require(doc, "type", path)
    try:
        if kind == "terminal":
            return Terminal(tuple(float(x) for x in _require(doc, "lottery", path)))
        if kind == "decision":
            acts = _require(doc, "actions", path)
            return Decision(
                str(_require(doc, "name", path)),
                tuple(
                    (str(_require(a, "action", f"{path}.actions[{k}]")),
                     game_from_json(_require(a, "node", f"{path}.actions[{k}]"), f"{path}.actions[{k}].node"))
                    for k, a in enumerate(acts)
                ),
            )
        if kind == "chance":
            outs = _require(doc, "outcomes", path)
            return Chance(
                str(_require(doc, "name", path)),
                tuple(
                    (str(_require(o, "outcome", f"{path}.outcomes[{k}]")),
                     float(_require(o, "prob", f"{path}.outcomes[{k}]")),
                     game_from_json(_require(o, "node", f"{path}.outcomes[{k}]"), f"{path}.outcomes[{k}].node"))
                    for k, o in enumerate(outs)
                ),
            )
    except SchemaError:
        raise
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc), path) from None
    raise SchemaError(f"unknown node type {kind!r}", f"{path}.type")


def target_from_json(doc: Any, path: str = "target") -> TargetPartition:
    """``{"generators": [...], "grouping": [...]}`` or explicit ``"cells"`` of pieces."""
    _check_schema(doc, path)
    gens = [menu_from_json(g, f"{path}.generators[{k}]") for k, g in enumerate(_require(doc, "generators", path))]
    try:
        if "cells" in doc:
            cells = []
            for i, cell in enumerate(doc["cells"]):
                pieces = []
                for j, piece in enumerate(cell):
                    p = f"{path}.cells[{i}][{j}]"
                    pieces.append(
                        tuple((int(_require(f, "generator", p)), frozenset(_require(f, "face", p))) for f in piece)
                    )
                cells.append(tuple(pieces))
            return TargetPartition(tuple(gens), tuple(cells))
        return TargetPartition.from_fan(gens, doc.get("grouping"))
    except SchemaError:
        raise
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc), path) from None
