"""Command-line driver.

Every command writes its outputs plus ``<name>.manifest.json`` describing the
run (no timestamps, sorted keys), so identical invocations give identical
bytes.  ``veclorenz rerun MANIFEST`` replays a manifest.

Exit codes: 0 success, 2 usage, 3 data, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .closed_forms import egalitarian_from_marginal, lognormal_quantile
from .geometry import DuplicateSitesError, build_power_diagram
from .ingestion import (Allocation, DataError, load_csv, prepare, rii_average,
                        write_csv)
from .lorenz import (FittedLorenz, alpha_curves, alt_gini, gini, gini_weights,
                     ilf)
from .ordering import lorenz_compare, rank_grid, weak_lorenz_compare
from .ot_solver import ConvergenceError, SolverConfig, TransportFit, solve
from .synth import FAMILIES, SynthSpec, sample

log = logging.getLogger("veclorenz")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

VERDICT_NAMES = {
    "dominates": "B_more_unequal",
    "dominated": "A_more_unequal",
    "equal": "equal",
    "incomparable": "incomparable",
}


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------
# serialisation helpers


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, (int, str)) else repr(float(v)) for v in row])


def _write_manifest(args, outputs, inputs=(), extra=None) -> Path:
    out_dir = Path(args.out)
    first = Path(outputs[0])
    record = {
        "tool": "veclorenz",
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "subcommand": args.command,
        "argv": list(args.argv),
        "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in inputs],
        "outputs": [{"path": str(p), "sha256": _sha256(p)} for p in outputs],
        "seed": getattr(args, "seed", None),
        "solver": {"tolerance": getattr(args, "tol", None), "max_iterations": getattr(args, "max_iter", None)},
        "grid": getattr(args, "grid", None),
        "mc_samples": getattr(args, "mc", None),
        "alphas": getattr(args, "alpha", None),
    }
    if extra:
        record.update(extra)
    path = out_dir / f"{first.stem}.manifest.json"
    _dump_json(path, record)
    return path


def fit_to_dict(fit: TransportFit, allocation: Allocation) -> dict:
    return {
        "implicate": allocation.implicate,
        "means": list(allocation.means) if allocation.means is not None else None,
        "sites": fit.sites.tolist(),
        "target_weights": fit.target_weights.tolist(),
        "dual_weights": fit.dual_weights.tolist(),
        "residual": fit.residual,
        "iterations": fit.iterations,
        "cells": [list(map(list, c.vertices)) for c in fit.cells],
    }


def fit_from_dict(d: dict) -> TransportFit:
    sites = np.asarray(d["sites"], dtype=float)
    w = np.asarray(d["target_weights"], dtype=float)
    diagram = build_power_diagram(sites, np.asarray(d["dual_weights"], dtype=float))
    residual = float(np.abs(diagram.areas - w).max())
    return TransportFit(diagram, w, residual, int(d["iterations"]))


def load_fit_artifact(path) -> list:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such fit artifact: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        return [(f.get("implicate"), fit_from_dict(f)) for f in doc["fits"]]
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: not a fit artifact ({exc})") from None


def _select(fits, args):
    if getattr(args, "implicate", None) is None:
        return fits if args.rii else fits[:1]
    chosen = [f for f in fits if f[0] == args.implicate]
    if not chosen:
        raise DataError(f"implicate {args.implicate} not in artifact")
    return chosen


def _parse_alphas(text: str):
    try:
        vals = [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise UsageError(f"bad --alpha list {text!r}") from None
    if not vals or any(not 0 < a < 1 for a in vals):
        raise UsageError("--alpha values must lie in (0, 1)")
    return vals


# --------------------------------------------------------------------------
# commands


def cmd_synth(args) -> list:
    spec_kw = dict(n=args.n, sigma1=args.sigma1, sigma2=args.sigma2, kappa=args.kappa)
    if args.family == "egalitarian":
        spec_kw["egalitarian"] = egalitarian_from_marginal(
            lambda q: lognormal_quantile(q, args.sigma1), args.p)
    allocs = []
    for k in range(args.implicates):
        a = sample(SynthSpec(args.family, seed=args.seed + k, **spec_kw))
        allocs.append(Allocation(a.points, a.weights, None, k + 1))
    out = Path(args.out) / "synth.csv"
    if args.implicates == 1:
        write_csv(out, allocs[0])
    else:
        pts = np.concatenate([a.points for a in allocs])
        w = np.concatenate([a.weights for a in allocs])
        imp = np.concatenate([np.full(len(a), a.implicate) for a in allocs])
        _write_rows(out, ["x1", "x2", "weight", "implicate"],
                    ([p[0], p[1], wi, int(i)] for p, wi, i in zip(pts, w, imp)))
    return [out]


def cmd_fit(args) -> list:
    config = SolverConfig(tolerance=args.tol, max_iterations=args.max_iter)
    raws = load_csv(args.input)
    fits = []
    for raw in raws:
        ready = prepare(raw, args.duplicates, args.jitter, args.seed)
        fit = solve(ready.points, ready.weights, config)
        log.info("implicate %s: n=%d residual=%.3e iterations=%d",
                 raw.implicate, len(ready), fit.residual, fit.iterations)
        fits.append(fit_to_dict(fit, ready))
    out = Path(args.out) / "fit.json"
    _dump_json(out, {"schema_version": SCHEMA_VERSION, "fits": fits})
    return [out]


def cmd_lorenz(args) -> list:
    fits = _select(load_fit_artifact(args.fit), args)
    pts = rank_grid(args.grid)
    vals = rii_average([FittedLorenz(f)(pts) for _, f in fits])
    out = Path(args.out) / "lorenz.csv"
    _write_rows(out, ["r1", "r2", "L1", "L2"], np.column_stack([pts, vals]))
    return [out]


def _ilf_grid(fits, args):
    grids = [ilf(FittedLorenz(f), args.grid, args.mc, args.seed) for _, f in fits]
    return rii_average(grids)


def cmd_ilf(args) -> list:
    grid = _ilf_grid(_select(load_fit_artifact(args.fit), args), args)
    z1, z2 = np.meshgrid(grid.nodes, grid.nodes, indexing="ij")
    out = Path(args.out) / "ilf.csv"
    _write_rows(out, ["z1", "z2", "l"], np.column_stack([z1.ravel(), z2.ravel(), grid.values.ravel()]))
    return [out]


def cmd_curves(args) -> list:
    alphas = _parse_alphas(args.alpha)
    grid = _ilf_grid(_select(load_fit_artifact(args.fit), args), args)
    rows = []
    for curve in alpha_curves(grid, alphas):
        for seg, line in enumerate(curve.polylines):
            rows.extend([curve.alpha, seg, z[0], z[1]] for z in line)
    out = Path(args.out) / "curves.csv"
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["alpha", "segment_id", "z1", "z2"])
        for a, seg, x, y in rows:
            writer.writerow([repr(float(a)), seg, repr(float(x)), repr(float(y))])
    return [out]


def cmd_gini(args) -> list:
    fits = _select(load_fit_artifact(args.fit), args)
    per = [{"implicate": imp, "gini": gini(f), "alt_gini": alt_gini(f),
            "gini_weights_checksum": float(gini_weights(f).sum())} for imp, f in fits]
    result = {key: rii_average([p[key] for p in per])
              for key in ("gini", "alt_gini", "gini_weights_checksum")}
    if len(per) > 1:
        result["per_implicate"] = per
    out = Path(args.out) / "gini.json"
    _dump_json(out, result)
    return [out]


def cmd_compare(args) -> list:
    fa = _select(load_fit_artifact(args.fit_a), args)
    fb = _select(load_fit_artifact(args.fit_b), args)
    ev_a = [FittedLorenz(f) for _, f in fa]
    ev_b = [FittedLorenz(f) for _, f in fb]

    def avg(evs):
        return lambda r: rii_average([e(r) for e in evs])

    lv = lorenz_compare(avg(ev_a), avg(ev_b), args.grid, args.slack)
    ga = rii_average([ilf(e, args.ilf_grid, args.mc, args.seed) for e in ev_a])
    gb = rii_average([ilf(e, args.ilf_grid, args.mc, args.seed) for e in ev_b])
    wv = weak_lorenz_compare(ga, gb)
    result = {
        "lorenz": VERDICT_NAMES[lv.relation],
        "weak": VERDICT_NAMES[wv.relation],
        "lorenz_detail": {"witness": lv.witness, "max_violation": lv.max_violation,
                          "slack": lv.slack, "grid": args.grid},
        "weak_detail": {"witness": wv.witness, "max_violation": wv.max_violation,
                        "slack": "3 Monte-Carlo standard errors per node",
                        "max_slack": wv.slack, "grid": args.ilf_grid, "mc_samples": args.mc},
    }
    out = Path(args.out) / "compare.json"
    _dump_json(out, result)
    return [out]


def cmd_rerun(args) -> list:
    record = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    code = main(record["argv"])
    if code != EXIT_OK:
        raise SystemExit(code)
    return [Path(o["path"]) for o in record["outputs"]]


# --------------------------------------------------------------------------
# argument parsing


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veclorenz", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, grid_default=None, mc=False, seed=True):
        p.add_argument("--out", default=".", help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        if grid_default is not None:
            p.add_argument("--grid", type=_positive_int, default=grid_default)
        if mc:
            p.add_argument("--mc", type=_positive_int, default=100_000)

    def selection(p):
        p.add_argument("--implicate", type=int, default=None)
        p.add_argument("--rii", action="store_true", help="average over implicates")

    p = sub.add_parser("synth", help="write a synthetic sample")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--sigma1", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--p", type=float, default=1.0, help="price for the egalitarian family")
    p.add_argument("--implicates", type=_positive_int, default=1)
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="solve the transport problem for a CSV")
    p.add_argument("input")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iter", dest="max_iter", type=_positive_int, default=100)
    p.add_argument("--duplicates", choices=("merge", "jitter"), default="merge")
    p.add_argument("--jitter", type=float, default=1e-6)
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("lorenz", help="Lorenz map on a rank grid")
    p.add_argument("fit")
    common(p, grid_default=21, seed=False)
    selection(p)
    p.set_defaults(func=cmd_lorenz)

    p = sub.add_parser("ilf", help="inverse Lorenz function on a grid")
    p.add_argument("fit")
    common(p, grid_default=201, mc=True)
    selection(p)
    p.set_defaults(func=cmd_ilf)

    p = sub.add_parser("curves", help="alpha-Lorenz curves")
    p.add_argument("fit")
    p.add_argument("--alpha", default="0.5,0.75,0.9,0.99")
    common(p, grid_default=201, mc=True)
    selection(p)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("gini", help="Gini indices as JSON")
    p.add_argument("fit")
    common(p, seed=False)
    selection(p)
    p.set_defaults(func=cmd_gini)

    p = sub.add_parser("compare", help="Lorenz and weak Lorenz order verdicts")
    p.add_argument("fit_a")
    p.add_argument("fit_b")
    p.add_argument("--slack", type=float, default=1e-6)
    p.add_argument("--ilf-grid", dest="ilf_grid", type=_positive_int, default=101)
    common(p, grid_default=21, mc=True)
    selection(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("rerun", help="replay a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_rerun, out=".")
    return parser


def _inputs(args):
    names = {"fit": ["input"], "lorenz": ["fit"], "ilf": ["fit"], "curves": ["fit"],
             "gini": ["fit"], "compare": ["fit_a", "fit_b"]}
    return [Path(getattr(args, n)) for n in names.get(args.command, [])]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.argv = argv
    try:
        if args.command != "rerun":
            Path(args.out).mkdir(parents=True, exist_ok=True)
        outputs = args.func(args)
        if args.command != "rerun":
            _write_manifest(args, outputs, _inputs(args))
    except (DataError, DuplicateSitesError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
