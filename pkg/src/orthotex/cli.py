"""Command-line front end.

Exit codes: 0 success, 1 I/O or parse error, 2 validation failure,
3 construction failure, 4 inconsistent metric system.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import ppm
from .cone_geometry import ConstructionFailed, affine_rank, ambiguity_verdict
from .recovery import (DegenerateInput, GoodWarpSet, Inconsistent, ValidationFailed,
                       recover_metric, upgrade)
from .synthgen import (DomainError, HemisphereConfig, Rng, SingularWarp, hemisphere_warp,
                       paint_hemisphere, random_good_set, random_warp, render_warped_element,
                       square_outline)
from .warp_core import Tolerances, WarpError, decompose, validate

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_CONSTRUCTION, EXIT_INCONSISTENT = 0, 1, 2, 3, 4
BUILTIN_SQUARE = "builtin-square"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2, which this tool reserves for invalid warps
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _tolerances(tol: float) -> Tolerances:
    return Tolerances(eps_warp=tol, eps_cone=tol)


def parse_matrix(text: str) -> np.ndarray:
    parts = text.replace(",", " ").split()
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise UsageError(f"bad matrix {text!r}: {exc}") from None
    if len(vals) != 4 or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"matrix needs four finite numbers (row-major), got {text!r}")
    return np.array(vals).reshape(2, 2)


def _mat(m) -> list:
    return np.asarray(m, float).tolist()


def load_warp_file(path: str) -> tuple[np.ndarray, dict]:
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    if not isinstance(doc, dict) or "warps" not in doc:
        raise UsageError(f"{path}: expected an object with a 'warps' list")
    try:
        warps = np.array(doc["warps"], dtype=float)
    except (TypeError, ValueError):
        raise UsageError(f"{path}: 'warps' must be a list of 2x2 numeric matrices") from None
    if warps.ndim != 3 or warps.shape[1:] != (2, 2) or len(warps) == 0:
        raise UsageError(f"{path}: 'warps' must be a nonempty list of 2x2 matrices")
    if not np.all(np.isfinite(warps)):
        raise UsageError(f"{path}: non-finite matrix entry")
    return warps, doc.get("meta") or {}


def warp_file_text(warps, meta=None) -> str:
    doc = {"warps": [_mat(w) for w in warps], "meta": meta or {}}
    return json.dumps(doc, indent=2) + "\n"


def _emit(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as f:
            f.write(text)


def empty_report() -> dict:
    return {"verdict": None, "affine_rank": None, "plane": None, "conic": None,
            "alternatives": [], "metric_solutions": [], "recovered_warps": [], "margins": {}}


def _load_element(source: str) -> np.ndarray:
    if source == BUILTIN_SQUARE:
        return square_outline()
    try:
        return ppm.read(source)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read element {source}: {exc}") from None


# -- subcommands ----------------------------------------------------------------

def cmd_validate(args) -> int:
    warps, _ = load_warp_file(args.input)
    tol = _tolerances(args.tol)
    code = EXIT_OK
    for i, w in enumerate(warps):
        try:
            validate(w, tol)
        except WarpError as exc:
            print(f"warp {i}: invalid {type(exc).__name__}: {exc}")
            code = EXIT_INVALID
            continue
        t1, r, t2 = decompose(w, tol)
        print(f"warp {i}: theta1={t1 + 0.0:.12g} r={r:.12g} theta2={t2 + 0.0:.12g}")
    return code


def _require_warps(warps, tol) -> bool:
    ok = True
    for i, w in enumerate(warps):
        try:
            validate(w, tol)
        except WarpError as exc:
            _err(f"warp {i} is invalid: {type(exc).__name__}: {exc}")
            ok = False
    return ok


def cmd_analyze(args) -> int:
    warps, _ = load_warp_file(args.input)
    tol = _tolerances(args.tol)
    if not _require_warps(warps, tol):
        return EXIT_INVALID
    try:
        v = ambiguity_verdict(warps, tol, seed=args.seed)
    except ConstructionFailed as exc:
        _err(f"construction failed: {exc}")
        return EXIT_CONSTRUCTION
    report = empty_report()
    report.update(
        verdict=v.label,
        reason=v.reason.value if v.reason else None,
        affine_rank=v.affine_rank,
        plane=list(v.plane) if v.plane else None,
        conic=v.conic.value if v.conic else None,
        alternatives=[_mat(b) for b in v.alternatives],
        margins=v.margins,
    )
    _emit(json.dumps(report, indent=2) + "\n", args.output)
    print(f"verdict={v.label} affine_rank={v.affine_rank} "
          f"conic={report['conic']} alternatives={len(v.alternatives)}", file=sys.stderr)
    return EXIT_OK


def cmd_recover(args) -> int:
    warps, _ = load_warp_file(args.input)
    tol = _tolerances(args.tol)
    try:
        ws = GoodWarpSet(warps)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INVALID
    report = empty_report()
    gram = np.swapaxes(ws.matrices, -1, -2) @ ws.matrices
    report["affine_rank"] = affine_rank(gram_deficit_points(gram), tol)
    try:
        sol = recover_metric(ws, tol)
    except Inconsistent as exc:
        _err(f"inconsistent metric system: {exc}")
        return EXIT_INCONSISTENT
    report["verdict"] = sol.kind
    report["margins"] = {"residual": sol.residual, "system_rank": sol.rank}
    if sol.kind == "underdetermined":
        _err(f"metric system has rank {sol.rank}; nothing to recover")
        _emit(json.dumps(report, indent=2) + "\n", args.output)
        return EXIT_OK
    try:
        ups = upgrade(ws, tol)
    except (ValidationFailed, DegenerateInput) as exc:
        _err(f"upgrade failed: {exc}")
        return EXIT_INVALID
    for u in ups:
        report["metric_solutions"].append({
            "M": _mat(u.m.matrix()), "d": u.d, "residual": sol.residual, "B": _mat(u.b),
            "valid": u.valid, "error": u.error,
            "recovered_warps": [_mat(t) for t in u.warps] if u.valid else [],
        })
    first = next(u for u in ups if u.valid)
    report["recovered_warps"] = [_mat(t) for t in first.warps]
    _emit(json.dumps(report, indent=2) + "\n", args.output)
    print(f"{sol.kind}: {sum(u.valid for u in ups)} valid metric solution(s)", file=sys.stderr)
    return EXIT_OK


def gram_deficit_points(gram) -> np.ndarray:
    return np.column_stack([gram[:, 0, 0] - 1, gram[:, 0, 1], gram[:, 1, 1] - 1])


def cmd_hemisphere(args) -> int:
    try:
        cfg = HemisphereConfig(lam=args.lam, n_radii=args.radii, n_angles=args.angles,
                               canvas=args.canvas)
    except DomainError as exc:
        _err(str(exc))
        return EXIT_IO
    element = _load_element(args.element)
    images = paint_hemisphere(cfg, element)
    xs, ys = cfg.grid()
    warps = hemisphere_warp(xs, ys, cfg.lam)
    meta = {"source": "hemisphere", "lambda": cfg.lam, "radii": cfg.n_radii,
            "angles": cfg.n_angles, "rho2_min": cfg.rho2_min, "rho2_max": cfg.rho2_max,
            "positions": [[float(x), float(y)] for x, y in zip(xs, ys)]}
    names = {"composite": "composite.ppm", "normal_map_true": "normals_true.ppm",
             "normal_map_alt": "normals_alt.ppm", "element_true": "element_true.ppm",
             "element_alt": "element_alt.ppm"}
    try:
        os.makedirs(args.outdir, exist_ok=True)
        for key, name in names.items():
            ppm.write(os.path.join(args.outdir, name), images[key])
        with open(os.path.join(args.outdir, "warps.json"), "w") as f:
            f.write(warp_file_text(warps, meta))
    except OSError as exc:
        _err(f"cannot write to {args.outdir}: {exc}")
        return EXIT_IO
    print(f"wrote {len(names)} images and warps.json to {args.outdir}", file=sys.stderr)
    return EXIT_OK


def cmd_random(args) -> int:
    if args.n < 1:
        _err("--n must be at least 1")
        return EXIT_IO
    if not 0.0 < args.rmin <= 1.0:
        _err("--rmin must lie in (0, 1]")
        return EXIT_IO
    rng = Rng(args.seed)
    meta = {"source": "random", "n": args.n, "seed": args.seed, "rmin": args.rmin}
    if args.b is None or args.b == "none":
        warps = []
        for _ in range(args.n):
            rng, w = random_warp(rng, args.rmin)
            warps.append(w)
    else:
        b = parse_matrix(args.b)
        if not np.linalg.det(b) > 0:
            _err("--b must have positive determinant")
            return EXIT_IO
        rng, warps, truth = random_good_set(rng, args.n, b, args.rmin)
        meta.update(b=_mat(b), truth=[_mat(t) for t in truth])
    _emit(warp_file_text(warps, meta), args.output)
    return EXIT_OK


def cmd_render(args) -> int:
    element = _load_element(args.element)
    w = parse_matrix(args.warp)
    try:
        img = render_warped_element(element, w, args.size, args.scale)
    except SingularWarp as exc:
        _err(str(exc))
        return EXIT_INVALID
    try:
        ppm.write(args.output, img)
    except OSError as exc:
        _err(f"cannot write {args.output}: {exc}")
        return EXIT_IO
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="orthotex", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", help="check that every matrix is a warp")
    s.add_argument("--input", required=True)
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("analyze", help="decide whether a warp set is ambiguous")
    s.add_argument("--input", required=True)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", default=None, help="report path (default: stdout)")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("recover", help="metric upgrade of a good warp set")
    s.add_argument("--input", required=True)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--output", default=None, help="report path (default: stdout)")
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("hemisphere", help="reproduce the ambiguous hemisphere example")
    s.add_argument("--lambda", dest="lam", type=float, default=0.5)
    s.add_argument("--radii", type=int, default=5)
    s.add_argument("--angles", type=int, default=8)
    s.add_argument("--canvas", type=int, default=400)
    s.add_argument("--element", default=BUILTIN_SQUARE, help=f"PPM/PGM path or {BUILTIN_SQUARE}")
    s.add_argument("--outdir", required=True)
    s.set_defaults(func=cmd_hemisphere)

    s = sub.add_parser("random", help="generate a random warp set")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rmin", type=float, default=0.05)
    s.add_argument("--b", default=None, help='"b11 b12 b21 b22" to emit T_i B, or none')
    s.add_argument("--output", default=None, help="warp file path (default: stdout)")
    s.set_defaults(func=cmd_random)

    s = sub.add_parser("render", help="render one warped texture element")
    s.add_argument("--element", default=BUILTIN_SQUARE)
    s.add_argument("--warp", required=True, help='"a11 a12 a21 a22"')
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--scale", type=float, default=1.0)
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
