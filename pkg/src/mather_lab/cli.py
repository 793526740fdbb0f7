"""Batch experiment harness.

Exit codes: 0 ok, 2 configuration error, 3 solver failure.  The worker pool
size comes from ``--workers`` or the ``AMLAB_WORKERS`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config, parse_override, worker_count
from .currents import current_distance, measure_of_field, moment_breakdown
from .fields import grid_for, load_field, save_field
from .lagrangian import HypothesisViolation, check_hypotheses
from .mather_functions import (
    BoundaryArgmaxWarning,
    beta_table,
    c_box_grid,
    flats,
    legendre,
    mode_locking_measure,
    senn_check,
    table_from_json,
)
from .periodic_minimizer import (
    birkhoff_check,
    default_starts,
    distinct_minimizers,
    euler_lagrange_residual,
    minimize,
    moser_bound_check,
)
from .slope_lattice import RationalSlope, format_slope, parse_slope

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class SolverFailure(RuntimeError):
    pass


def _jsonable(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def write_csv(path: Path, rows: list[dict]) -> Path:
    keys: list[str] = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)
    return path


def _provenance(cfg: ExperimentConfig, table=None, label: str | None = None) -> dict:
    out = {"N": cfg.N, "tol": cfg.tol, "seed": cfg.seed, "residual": None}
    if table is not None and label is not None:
        meta = table.meta[table.slopes.index(parse_slope(label))]
        out.update({k: meta[k] for k in ("N", "tol", "seed", "residual") if k in meta})
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_minimize(cfg: ExperimentConfig, workers: int = 1) -> int:
    model = cfg.model()
    rho = cfg.rho()
    N = cfg.beta_config().grid_N(rho)
    grid = grid_for(rho, N)
    starts = default_starts(rho, grid, m=min(rho.denominator, cfg.max_shifts),
                            r=cfg.random_starts, seed=cfg.seed)
    results = minimize(model, rho, grid, starts=starts, tol=cfg.tol, seed=cfg.seed)
    out = cfg.out_dir()
    ok = [r for r in results if r.converged]
    report = {"config": cfg.to_dict(), "slope": format_slope(rho), "grid": grid.to_json(),
              "results": [r.summary() for r in results]}
    if not ok:
        report["status"] = "no start converged"
        write_json(out / "minimize.json", report)
        raise SolverFailure(f"none of {len(results)} starts converged at slope {rho}")
    best = ok[0]
    save_field(out / "field.amf", best.field)
    verdicts = birkhoff_check(best.field)
    counts: dict[str, int] = {}
    for v in verdicts:
        counts[v.verdict] = counts.get(v.verdict, 0) + 1
    part = distinct_minimizers(results, rho)
    report.update({
        "status": "ok",
        "best": best.summary(),
        "diagnostics": {
            "euler_lagrange_residual": euler_lagrange_residual(model, best.field),
            "moser_c0": moser_bound_check(best.field),
            "birkhoff_counts": counts,
            "birkhoff_violations": [{"k": list(v.k), "j": v.j, "dmin": v.dmin, "dmax": v.dmax}
                                    for v in verdicts if v.verdict == "VIOLATION"],
        },
        "classes": {"count": part.count, "gap": part.gap, "actions": part.actions,
                    "sizes": [len(c) for c in part.classes]},
        "field_file": "field.amf",
    })
    write_json(out / "minimize.json", report)
    print(f"slope {rho}: action {best.action:.12g}, residual {best.residual:.2e}, "
          f"classes {part.count}")
    return EXIT_OK


def _table(cfg: ExperimentConfig, workers: int, eps: float | None = None):
    if cfg.beta_table is not None and eps is None:
        try:
            return table_from_json(json.loads(Path(cfg.beta_table).read_text()))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read beta table {cfg.beta_table}: {exc}") from None
    lo, hi = cfg.slope_range()
    return beta_table(cfg.model(eps), cfg.cap, lo, hi, cfg.beta_config(), n=cfg.n, workers=workers)


def _alpha(cfg: ExperimentConfig, table):
    C = c_box_grid(float(cfg.c_box[0]), float(cfg.c_box[1]), cfg.c_num, cfg.n)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BoundaryArgmaxWarning)
        alpha = legendre(table, C)
    # provenance of the supporting slope travels with each alpha row
    alpha.meta = [dict(table.meta[int(i)]) for i in alpha.support]
    notes = [str(w.message) for w in caught if issubclass(w.category, BoundaryArgmaxWarning)]
    return alpha, notes


def cmd_beta_scan(cfg: ExperimentConfig, workers: int = 1) -> int:
    table = _table(cfg, workers)
    out = cfg.out_dir()
    for row in table.meta:
        row.setdefault("resolution", cfg.resolution)
    table.to_csv(out / "beta.csv")
    data = table.to_json()
    data["config"] = cfg.to_dict()
    data["failed"] = [table.slope_label(i) for i in np.flatnonzero(~table.valid)]
    write_json(out / "beta.json", data)
    print(f"beta table: {len(table)} slopes, {len(table.flagged)} flagged, "
          f"{len(data['failed'])} failed")
    return EXIT_OK


def _flat_reports(alpha, Q=None):
    ml = mode_locking_measure(alpha, Q)
    entries = []
    for label, fl in sorted(ml.flats.items()):
        rep = senn_check(fl)
        entry = fl.to_json(rat_basis=rep.rat_basis)
        entry["senn"] = rep.to_dict()
        entries.append(entry)
    return ml, entries


def cmd_alpha_flats(cfg: ExperimentConfig, workers: int = 1) -> int:
    table = _table(cfg, workers)
    alpha, notes = _alpha(cfg, table)
    out = cfg.out_dir()
    alpha.to_csv(out / "alpha.csv")
    ml, entries = _flat_reports(alpha, cfg.cap)
    write_json(out / "flats.json", {"config": cfg.to_dict(), "flats": entries,
                                    "mode_locking_fraction": ml.fraction, "warnings": notes})
    zero = ml.flats.get(format_slope(RationalSlope.zero(cfg.n)))
    extra = f", rho=0 window width {zero.width:.6g}" if zero is not None else ""
    print(f"alpha: {len(alpha)} c-points, mode-locking fraction {ml.fraction:.6g}{extra}")
    return EXIT_OK


def cmd_mode_locking(cfg: ExperimentConfig, workers: int = 1) -> int:
    table = _table(cfg, workers)
    alpha, notes = _alpha(cfg, table)
    ml = mode_locking_measure(alpha, cfg.cap)
    out = cfg.out_dir()
    rows = [{"slope": k, "width": w} | _provenance(cfg, table, k) for k, w in sorted(ml.widths.items())]
    write_csv(out / "windows.csv", rows)
    write_json(out / "mode_locking.json", {"config": cfg.to_dict(), "fraction": ml.fraction,
                                           "widths": ml.widths, "warnings": notes})
    print(f"mode-locking fraction {ml.fraction:.6g} over {len(alpha)} c-points")
    return EXIT_OK


def cmd_perturb_scan(cfg: ExperimentConfig, workers: int = 1) -> int:
    ladder = [float(e) for e in cfg.eps_ladder]
    if not ladder:
        raise ConfigError("eps_ladder is empty")
    samples = cfg.parsed_slopes()
    out = cfg.out_dir()
    rows, per_eps = [], []
    for eps in ladder:
        table = _table(cfg, workers, eps=eps)
        alpha, notes = _alpha(cfg, table)
        ml = mode_locking_measure(alpha, cfg.cap)
        model = cfg.model(eps)
        classes = {}
        for rho in samples:
            grid = grid_for(rho, cfg.beta_config().grid_N(rho))
            starts = default_starts(rho, grid, m=min(rho.denominator, cfg.max_shifts),
                                    r=cfg.random_starts, seed=cfg.seed)
            res = minimize(model, rho, grid, starts=starts, tol=cfg.tol, seed=cfg.seed)
            part = distinct_minimizers(res, rho)
            classes[format_slope(rho)] = {"count": part.count, "gap": part.gap,
                                          "residual": min(r.residual for r in res)}
        per_eps.append({"eps": eps, "fraction": ml.fraction, "widths": ml.widths,
                        "classes": classes, "warnings": notes})
        for label, w in sorted(ml.widths.items()):
            row = {"eps": eps, "slope": label, "width": w, "fraction": ml.fraction}
            if label in classes:
                row.update(classes=classes[label]["count"], gap=classes[label]["gap"],
                           residual=classes[label]["residual"])
            rows.append(_provenance(cfg, table, label) | row)
    monotone = []
    for a, b in zip(per_eps, per_eps[1:]):
        for label, w in a["widths"].items():
            wb = b["widths"].get(label)
            if wb is not None and wb < w - 1e-9:
                monotone.append({"slope": label, "eps": [a["eps"], b["eps"]], "widths": [w, wb]})
    write_csv(out / "perturb.csv", rows)
    write_json(out / "perturb.json", {"config": cfg.to_dict(), "scan": per_eps,
                                      "monotone": not monotone, "decreases": monotone})
    print(f"perturb scan over {len(ladder)} eps values; widths monotone: {not monotone}")
    return EXIT_OK


def cmd_current_compare(cfg: ExperimentConfig, workers: int = 1) -> int:
    if not cfg.field_a or not cfg.field_b:
        raise ConfigError("current-compare needs field_a and field_b")
    try:
        fa, fb = load_field(cfg.field_a), load_field(cfg.field_b)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if not fa.grid.same_as(fb.grid) or fa.rho != fb.rho:
        raise ConfigError("fields live on different grids or slopes")
    da, db = measure_of_field(fa, cfg.K), measure_of_field(fb, cfg.K)
    dist = current_distance(da, db)
    out = cfg.out_dir()
    write_json(out / "current_compare.json", {
        "config": cfg.to_dict(), "distance": dist, "K": cfg.K, "rho": format_slope(fa.rho),
        "slope_a": da.slope, "slope_b": db.slope, "largest_moment_differences": moment_breakdown(da, db),
    })
    print(f"current distance {dist:.6g}")
    return EXIT_OK


def cmd_check_hypotheses(cfg: ExperimentConfig, workers: int = 1) -> int:
    model = cfg.model()
    out = cfg.out_dir()
    try:
        rep = check_hypotheses(model, samples=cfg.samples)
    except HypothesisViolation as exc:
        write_json(out / "hypotheses.json", {"config": cfg.to_dict(), "violation": str(exc),
                                             "certificate": exc.certificate})
        raise ConfigError(f"{exc}; certificate {exc.certificate}") from None
    write_json(out / "hypotheses.json", {"config": cfg.to_dict(), "report": rep.to_dict()})
    print(f"H3 {'pass' if rep.h3 else 'FAIL'} (spectrum [{rep.eig_min:.6g}, {rep.eig_max:.6g}], "
          f"delta {rep.delta:.6g}); H4 constant {rep.h4_constant:.6g}")
    return EXIT_OK


COMMANDS = {
    "minimize": cmd_minimize,
    "beta-scan": cmd_beta_scan,
    "alpha-flats": cmd_alpha_flats,
    "mode-locking": cmd_mode_locking,
    "perturb-scan": cmd_perturb_scan,
    "current-compare": cmd_current_compare,
    "check-hypotheses": cmd_check_hypotheses,
}

_FLAG_KEYS = {"seed": int, "slope": str, "eps": float, "N": int, "cap": int, "out": str,
              "potential": str, "tol": float, "K": int, "n": int}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mather-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        for key, typ in _FLAG_KEYS.items():
            p.add_argument(f"--{key}", type=typ, default=None)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key (value parsed as JSON when possible)")
        p.add_argument("--workers", type=int, default=None)
        if name == "current-compare":
            p.add_argument("field_a", nargs="?")
            p.add_argument("field_b", nargs="?")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        overrides = {k: getattr(args, k) for k in _FLAG_KEYS}
        for item in args.set:
            key, value = parse_override(item)
            overrides[key] = value
        if args.command == "current-compare":
            overrides["field_a"] = args.field_a or overrides.get("field_a")
            overrides["field_b"] = args.field_b or overrides.get("field_b")
        cfg = load_config(args.config, overrides)
        workers = worker_count(args.workers)
        return COMMANDS[args.command](cfg, workers)
    except ConfigError as exc:
        print(f"mather-lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"mather-lab: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
