"""Command-line entry point: ``eivlab <subcommand> ...``.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 axiom
violation (``axioms --strict`` only).
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from . import axiomlab, io
from .compiler import compile_adaptive, compile_batch, compile_game, realize_partition
from .errors import EIVError, InputError, NumericalError, RealizationError, SchemaError
from .plot import render_svg
from .prior import PriorModel
from .valuation import IdentificationIndex, eiv

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_AXIOM = 0, 2, 3, 4
FUNCTIONALS = ("entropy", "perturbed-entropy", "negated-entropy")


@dataclass(frozen=True)
class RunConfig:
    seed: int | None
    n_samples: int | None
    exact: bool | None
    tol: float | None
    out: Path | None


def _config(args) -> RunConfig:
    return RunConfig(args.seed, args.samples, True if args.exact else None, args.tol, args.out)


def _load(path: str | Path) -> Any:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {p}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(p)) from None


def _prior(args, cfg: RunConfig) -> PriorModel:
    if getattr(args, "prior", None):
        doc = _load(args.prior)
        has_seed = isinstance(doc, dict) and "seed" in doc
        prior = io.prior_from_json(doc, str(args.prior), seed=cfg.seed)
        seeded = has_seed or cfg.seed is not None
    else:
        prior = PriorModel.uniform(3, 0 if cfg.seed is None else cfg.seed)
        seeded = True
    exact_path = prior.exact_available if cfg.exact is None else cfg.exact
    if cfg.exact and not prior.exact_available:
        raise InputError("--exact needs the uniform prior on three outcomes")
    if not exact_path and prior.kind != "empirical" and not seeded:
        raise InputError("Monte Carlo runs need a seed (--seed or a 'seed' field in the prior)")
    return prior


def _index(args) -> IdentificationIndex:
    if not getattr(args, "index", None):
        return IdentificationIndex.entropy()
    return io.index_from_json(_load(args.index), str(args.index))


def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.write_text(text)


# ---------------------------------------------------------------- commands


def _evaluation(path, prior, index, cfg: RunConfig) -> tuple[dict, Any]:
    pi = io.randomized_from_json(_load(path), str(path))
    res = eiv(pi, index, prior, n=cfg.n_samples, exact=cfg.exact)
    report = {
        "schema": io.SCHEMA,
        "value": res.value,
        "std_error": res.std_error,
        "exact": res.exact,
        "atoms": [
            {
                "weight": w,
                "cells": [
                    {"cell": list(r.cell), "tau": r.tau, "mu": r.mu, "contribution": r.contribution}
                    for r in rows
                ],
            }
            for w, rows in res.breakdown
        ],
    }
    return report, res


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    prior, index = _prior(args, cfg), _index(args)
    report, res = _evaluation(args.experiment, prior, index, cfg)
    _emit(io.dumps(report) + "\n", cfg)
    if not args.quiet:
        lines = [f"{'atom':>4} {'cell':<16} {'tau':>12} {'mu':>12} {'tau*mu':>12}"]
        for k, (w, rows) in enumerate(res.breakdown):
            for r in rows:
                cell = ",".join(map(str, r.cell))
                lines.append(f"{k:>4} {cell:<16} {r.tau:>12.6f} {r.mu:>12.6f} {r.contribution:>12.6f}")
        lines.append(f"value = {res.value:.12g} (std error {res.std_error:.3g}, exact={res.exact})")
        sys.stderr.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_rank(args) -> int:
    cfg = _config(args)
    prior, index = _prior(args, cfg), _index(args)
    folder = Path(args.directory)
    if not folder.is_dir():
        raise InputError(f"{folder} is not a directory")
    rows = []
    for f in sorted(folder.glob("*.json")):
        _, res = _evaluation(f, prior, index, cfg)
        rows.append((f.name, res.value, res.std_error))
    rows.sort(key=lambda r: (-r[1], r[0]))
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "file", "value", "std_error"])
    for k, (name, value, se) in enumerate(rows, start=1):
        w.writerow([k, name, format(value, ".17g"), format(se, ".17g")])
    _emit(buf.getvalue(), cfg)
    return EXIT_OK


def cmd_compile_batch(args) -> int:
    cfg = _config(args)
    doc = _load(args.input)
    menus = doc.get("menus") if isinstance(doc, dict) else doc
    if not isinstance(menus, list) or not menus:
        raise SchemaError("expected a non-empty list of menus under 'menus'", str(args.input))
    e = compile_batch([io.menu_from_json(m, f"menus[{k}]") for k, m in enumerate(menus)])
    _emit(io.dumps(io.experiment_to_dict(e)) + "\n", cfg)
    return EXIT_OK


def cmd_compile_adaptive(args) -> int:
    cfg = _config(args)
    tree = io.tree_from_json(_load(args.input), str(args.input))
    e = compile_adaptive(tree).experiment
    _emit(io.dumps(io.experiment_to_dict(e)) + "\n", cfg)
    return EXIT_OK


def cmd_compile_game(args) -> int:
    cfg = _config(args)
    pi = compile_game(io.game_from_json(_load(args.input), str(args.input)))
    _emit(io.dumps(io.randomized_to_dict(pi)) + "\n", cfg)
    return EXIT_OK


def cmd_realize(args) -> int:
    cfg = _config(args)
    e = realize_partition(io.target_from_json(_load(args.input), str(args.input)))
    _emit(io.dumps(io.experiment_to_dict(e)) + "\n", cfg)
    return EXIT_OK


def _functional(name: str, prior: PriorModel, cfg: RunConfig) -> axiomlab.ValuationFunctional:
    tol = cfg.tol if cfg.tol is not None else 1e-6
    base = axiomlab.entropy_eiv(prior, exact=cfg.exact, n=cfg.n_samples, tol=tol)
    if name == "entropy":
        return base
    if name == "perturbed-entropy":
        return axiomlab.perturbed_entropy_eiv(prior, exact=cfg.exact, n=cfg.n_samples, tol=tol)
    return axiomlab.negated(base)


def cmd_axioms(args, parser: argparse.ArgumentParser) -> int:
    cfg = _config(args)
    names = [c.strip() for c in args.checks.split(",") if c.strip()] if args.checks else list(axiomlab.AXIOMS)
    unknown = [n for n in names if n not in axiomlab.CHECKS]
    if unknown:
        parser.error(f"unknown check(s): {', '.join(unknown)}; choose from {', '.join(axiomlab.AXIOMS)}")
    prior = _prior(args, cfg)
    v = _functional(args.functional, prior, cfg)
    reports = axiomlab.run_checks(v, names, trials=args.trials, seed=0 if cfg.seed is None else cfg.seed)
    doc = {"schema": io.SCHEMA, "functional": v.name, "reports": [r.to_dict() for r in reports]}
    _emit(io.dumps(doc) + "\n", cfg)
    if not args.quiet:
        for r in reports:
            sys.stderr.write(f"{r.axiom:<30} {r.verdict} ({len(r.violations)} violations, {r.skipped} skipped)\n")
    if args.strict and any(not r.passed for r in reports):
        return EXIT_AXIOM
    return EXIT_OK


def cmd_plot(args) -> int:
    cfg = _config(args)
    prior = _prior(args, cfg)
    pi = io.randomized_from_json(_load(args.experiment), str(args.experiment))
    if len(pi.atoms) != 1:
        raise InputError("plot expects a single experiment")
    _emit(render_svg(pi.atoms[0][0], prior, args.title or ""), cfg)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for Monte Carlo sampling")
    common.add_argument("--samples", type=int, default=None, help="Monte Carlo sample size")
    common.add_argument("--exact", action="store_true", help="require the exact arc-length path")
    common.add_argument("--tol", type=float, default=None, help="comparison tolerance override")
    common.add_argument("--out", type=Path, default=None, help="write output here instead of stdout")

    parser = argparse.ArgumentParser(prog="eivlab", description="Value and compile choice experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", parents=[common], help="expected identification value of a design")
    p.add_argument("experiment")
    p.add_argument("--prior")
    p.add_argument("--index")
    p.add_argument("--quiet", action="store_true", help="skip the table on stderr")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank", parents=[common], help="rank every *.json design in a directory")
    p.add_argument("directory")
    p.add_argument("--prior")
    p.add_argument("--index")
    p.set_defaults(func=cmd_rank)

    for name, func, what in (
        ("compile-batch", cmd_compile_batch, "battery of menus"),
        ("compile-adaptive", cmd_compile_adaptive, "adaptive decision tree"),
        ("compile-game", cmd_compile_game, "dynamic game"),
        ("realize-partition", cmd_realize, "target partition"),
    ):
        p = sub.add_parser(name, parents=[common], help=f"compile a {what}")
        p.add_argument("input")
        p.set_defaults(func=func)

    p = sub.add_parser("axioms", parents=[common], help="property-test a valuation functional")
    p.add_argument("--functional", choices=FUNCTIONALS, default="entropy")
    p.add_argument("--checks", help="comma-separated subset of: " + ", ".join(axiomlab.AXIOMS))
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--prior")
    p.add_argument("--strict", action="store_true", help="exit 4 when any check fails")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=lambda a: cmd_axioms(a, parser))

    p = sub.add_parser("plot", parents=[common], help="SVG of a three-outcome experiment")
    p.add_argument("experiment")
    p.add_argument("--prior")
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, RealizationError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except EIVError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
