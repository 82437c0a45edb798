"""Command-line entry point: ``henon-renorm <command> [options]``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from contextlib import nullcontext
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2

DEFAULTS = {
    "map": None,
    "out": ".",
    "depth": 12,
    "level": 0,
    "b": 10.0,
    "J": None,
    "max_steps": 50,
    "max_rows": 5,
    "tol": 1e-10,
    "degree": 40,
}

EXAMPLE_J = (-0.950, -0.947, 0.042, 0.045)
DOUBLE_J = (-0.6642, -0.6632, 0.320, 0.321)


def _clean(obj):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path: Path, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")
    return path


def parse_rect(text) -> tuple[float, float, float, float]:
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        try:
            vals = [float(v) for v in str(text).split(",")]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad rectangle {text!r}") from exc
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("rectangle needs x1,x2,y1,y2")
    return tuple(vals)  # type: ignore[return-value]


def _settings(args: argparse.Namespace) -> dict:
    """CLI flags over config file over defaults."""
    cfg: dict = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SystemExit(f"cannot read config {args.config}: {exc}")
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise SystemExit(f"unknown config keys: {', '.join(sorted(unknown))}")
    out = dict(DEFAULTS)
    out.update(cfg)
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    if out["J"] is not None:
        out["J"] = parse_rect(out["J"])
    return out


def _load(st: dict):
    from .henon import example_map, load_map

    return example_map() if st["map"] is None else load_map(st["map"])


def _tower(st: dict, depth: int | None = None):
    from .renorm import build_tower

    return build_tower(_load(st), st["depth"] if depth is None else depth)


def cmd_feigenbaum(st: dict) -> int:
    from .renorm import rescaling_trick_check
    from .unimodal import backward_orbit_b, expansion_check, solve_feigenbaum

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = solve_feigenbaum(int(st["degree"]), float(st["tol"]))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    g = sol.g.f
    dg = g.deriv()
    _, b2 = backward_orbit_b(sol)
    xs = np.linspace(-1.0, 1.0, 513)
    report = {
        "lambda": sol.lam,
        "residual": sol.residual,
        "degree": sol.degree,
        "iterations": sol.iterations,
        "coefficients": g.coeffs.tolist(),
        "warnings": [str(w.message) for w in caught],
        "identity_checks": {
            "slope_b2": float(dg(b2) + 1.0),
            "slope_fixed_points": float(dg(sol.g.q_minus1) - dg(sol.g.q0) ** 2),
            "evenness": float(np.max(np.abs(g(xs) - g(-xs)))),
            "min_expansion": expansion_check(sol),
            "rescaling_trick": {str(j): rescaling_trick_check(sol, j) for j in range(1, 5)},
            "normalization": sol.identities,
        },
    }
    write_json(Path(st["out"]) / "feigenbaum.json", report)
    print(f"lambda = {sol.lam:.15g}  residual = {sol.residual:.3g}")
    return EXIT_OK


def cmd_tower(st: dict) -> int:
    T = _tower(st)
    data = {
        "requested_depth": st["depth"],
        "depth": T.depth,
        "reason": T.reason,
        "levels": T.report(),
        "decay_ratios": T.decay_ratios(),
        "tip": None if T.tip is None else {"agreement": list(T.tip.agreement), "converged": T.tip.converged},
    }
    write_json(Path(st["out"]) / "tower.json", data)
    print(f"{T.depth} renormalizations ({T.reason})")
    return EXIT_OK if T.depth >= st["depth"] else EXIT_PARTIAL


def cmd_partition(st: dict) -> int:
    from .manifolds import build_partition, write_partition_csv

    level = int(st["level"])
    if level == 0:
        P, code = build_partition(_load(st)), EXIT_OK
    else:
        T = _tower(st, level)
        if T.depth < level:
            print(f"tower stops at level {T.depth}: {T.reason}", file=sys.stderr)
            return EXIT_PARTIAL
        P, code = T.levels[level].partition, EXIT_OK
    out = Path(st["out"]) / "partition"
    paths = write_partition_csv(P, out, prefix=f"level{level}_")
    write_json(
        out / f"level{level}_partition.json",
        {
            "level": level,
            "graphs": [
                {"label": g.label, "lipschitz": g.lipschitz, "measured_lipschitz": g.measured_lipschitz, "file": p.name}
                for g, p in zip(P.graphs, paths)
            ],
            "fixed_points": [[P.p_m1.x, P.p_m1.y], [P.p0.x, P.p0.y]],
        },
    )
    print(f"wrote {len(paths)} manifold files to {out}")
    return code


def cmd_regions(st: dict) -> int:
    from .regions import RegionError, compute_K, verify_region_geometry

    T = _tower(st)
    n = int(st["level"])
    if n >= len(T.levels):
        print(f"level {n} not in tower ({T.reason})", file=sys.stderr)
        return EXIT_PARTIAL
    code = EXIT_OK
    try:
        K = compute_K(T, n, float(st["b"]))
    except RegionError as exc:
        print(f"warning: {exc}", file=sys.stderr)
        K, code = exc.partial, EXIT_PARTIAL
    checks = None if K.infinite else verify_region_geometry(T, n, K)
    write_json(Path(st["out"]) / "regions.json", dict(K.as_dict(), geometry_checks=checks))
    print(f"level {n}: K = {'infinite' if K.infinite else int(K.K)}")
    return code


def cmd_approach(st: dict) -> int:
    from .approach import PlanarSet, closest_approach

    T = _tower(st)
    J = PlanarSet.rectangle(*(st["J"] or EXAMPLE_J))
    tr = closest_approach(T, J, int(st["max_steps"]))
    out = Path(st["out"]) / "trace.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as fh:
        for s in tr.steps:
            fh.write(json.dumps(_clean(s.as_dict()), sort_keys=True) + "\n")
    print(" ".join(tr.itinerary) + f"  [{tr.end}]")
    return EXIT_OK if tr.end == "max-steps" else EXIT_PARTIAL


def cmd_double(st: dict) -> int:
    from .approach import PlanarSet, double_sequence, rate_report

    T = _tower(st)
    J = PlanarSet.rectangle(*(st["J"] or DOUBLE_J))
    rows = double_sequence(T, J, int(st["max_rows"]), b=float(st["b"]), max_steps=int(st["max_steps"]))
    lam = next((lv.lam for lv in T.levels if lv.lam), 2.5029078750959)
    data = {"rows": [r.as_dict() for r in rows], "rate_report": rate_report(rows, T=T, b=float(st["b"]))}
    data["rate_report"]["lambda_level0"] = lam
    write_json(Path(st["out"]) / "rows.json", data)
    print(f"{len(rows)} rows, last: {rows[-1].end}")
    ok_ends = {"never-bad", "bad", "max-steps"}
    return EXIT_OK if rows[-1].end in ok_ends else EXIT_PARTIAL


COMMANDS = {
    "feigenbaum": cmd_feigenbaum,
    "tower": cmd_tower,
    "partition": cmd_partition,
    "regions": cmd_regions,
    "approach": cmd_approach,
    "double": cmd_double,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="henon-renorm", description="Renormalization of Hénon-like maps.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of defaults; flags override it")
    common.add_argument("--out", help="output directory (default .)")
    common.add_argument("--map", help="map definition JSON (default: the Example map)")
    common.add_argument("--depth", type=int, help="tower depth (default 12)")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("feigenbaum", parents=[common], help="solve for g and lambda")
    f.add_argument("--degree", type=int)
    f.add_argument("--tol", type=float)

    sub.add_parser("tower", parents=[common], help="build the renormalization tower")

    pa = sub.add_parser("partition", parents=[common], help="export partition manifolds")
    pa.add_argument("--level", type=int)

    r = sub.add_parser("regions", parents=[common], help="good/bad region boundary K_n")
    r.add_argument("--level", type=int)
    r.add_argument("--b", type=float)

    a = sub.add_parser("approach", parents=[common], help="closest-approach trace")
    a.add_argument("--J", type=parse_rect, help="rectangle x1,x2,y1,y2")
    a.add_argument("--max-steps", dest="max_steps", type=int)

    d = sub.add_parser("double", parents=[common], help="double sequence of rows")
    d.add_argument("--J", type=parse_rect, help="rectangle x1,x2,y1,y2")
    d.add_argument("--max-rows", dest="max_rows", type=int)
    d.add_argument("--max-steps", dest="max_steps", type=int)
    d.add_argument("--b", type=float)
    return p


def _thread_limit():
    n = os.environ.get("HENON_RENORM_THREADS")
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, int(n)))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    st = _settings(args)
    try:
        with _thread_limit():
            return COMMANDS[args.command](st)
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error report
        write_json(Path(st["out"]) / "error.json", {"command": args.command, "error": f"{type(exc).__name__}: {exc}"})
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
