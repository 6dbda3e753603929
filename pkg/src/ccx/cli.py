"""``ccx`` command-line front end.

Exit status: 0 on success, 1 on input errors, 2 when a ``*-check`` style
command runs but its numerical check fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .grid import GridError, GridSpec, ScalarGrid, read_grid, read_pgm_mask, read_points_csv, write_grid
from .medial import SiteSet, distance_vs_sqdistance_check, extract_medial_axis, medial_axis_map, medial_scale1_map
from .minisphere import Polytope, centre_in_hull_check, jung_check, min_bounding_sphere
from .oracle import OracleError, from_json, parse_function, predicted_landscape, random_sublinear, sample
from .singularity import (DEFAULT_REFINE, DEFAULT_RESOLUTION, dc_edge_bound, geometric_schedule,
                          gradient_lipschitz_check, gradient_upper, landscape_sweep, singular_map)
from .transforms import lower_transform, mixed_transform, upper_transform

EXIT_OK, EXIT_INPUT, EXIT_CHECK = 0, 1, 2

TRANSFORM_KINDS = ("lower", "upper", "mixed-ul", "mixed-lu")
SING_KINDS = ("ridge", "valley", "edge", "scale1-ridge", "scale1-valley", "scale1-edge")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _schedule(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected start:factor:end, got {text!r}")
    try:
        a, r, b = (float(p) for p in parts)
        return geometric_schedule(a, r, b)
    except (ValueError, GridError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _json_arg(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="seed for randomised runs (default 0)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for the envelope kernels (fallback: $CCX_THREADS)")
    p.add_argument("--refine", type=int, default=None,
                   help="paraboloid-vertex refinement factor of the opening (>= 1)")


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="inp", type=Path, help="input grid file")
    p.add_argument("--fn", help="oracle function name (abs, relu, sublinear, ...)")
    p.add_argument("--fn-params", type=_json_arg, default=None, help="oracle parameters as JSON")
    p.add_argument("--lower", type=_floats, help="lower domain corner when sampling --fn")
    p.add_argument("--upper", type=_floats, help="upper domain corner when sampling --fn")
    p.add_argument("--spacing", type=_floats, help="grid spacing when sampling --fn")
    p.add_argument("--format", choices=("csv", "bin", "pgm"), default=None, help="file format override")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ccx", description="Compensated convex transforms and singularity extraction.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("transform", help="lower/upper/mixed transform or singularity map of a grid")
    _add_source(p)
    p.add_argument("--kind", required=True, choices=TRANSFORM_KINDS + SING_KINDS)
    p.add_argument("--lambda", dest="lam", type=_positive, required=True)
    p.add_argument("--tau", type=_positive, default=None, help="second parameter of mixed transforms")
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("singmap", help="ridge/valley/edge map (optionally scale-1) of a grid")
    _add_source(p)
    p.add_argument("--kind", required=True, choices=SING_KINDS)
    p.add_argument("--lambda", dest="lam", type=_positive, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("sweep", help="scale-1 values along a lambda schedule at probe points")
    _add_source(p)
    p.add_argument("--kind", required=True, choices=("ridge", "valley", "edge"))
    p.add_argument("--lambdas", type=_schedule, required=True, help="geometric schedule start:factor:end")
    p.add_argument("--probe", type=_floats, action="append", required=True, help="probe coordinates (repeatable)")
    p.add_argument("--resolution", type=_positive, default=DEFAULT_RESOLUTION, help="lambda*h for oracle windows")
    p.add_argument("--extrapolate", action="store_true", help="Richardson extrapolation in 1/lambda")
    p.add_argument("--out", type=Path, default=None, help="JSON output (default stdout)")
    _add_common(p)

    p = sub.add_parser("gradient", help="gradient of the upper transform and its Lipschitz check")
    _add_source(p)
    p.add_argument("--lambda", dest="lam", type=_positive, required=True)
    p.add_argument("--probe", type=_floats, action="append", default=[], help="report the gradient here")
    p.add_argument("--out", type=Path, default=None, help="write components as <stem>_d<k><suffix>")
    p.add_argument("--check", action="store_true", help="exit 2 if the 2*lambda bound fails")
    p.add_argument("--rel-tol", type=float, default=0.05)
    _add_common(p)

    p = sub.add_parser("minisphere", help="minimal bounding sphere of a points CSV")
    p.add_argument("points", type=Path)
    _add_common(p)

    p = sub.add_parser("medial", help="medial axis map (1+lambda) R_lambda(dist^2)")
    p.add_argument("--sites", type=Path, help="points CSV of sites")
    p.add_argument("--mask", type=Path, help="PGM mask, nonzero pixels are sites")
    p.add_argument("--lambda", dest="lam", type=_positive, required=True)
    p.add_argument("--lower", type=_floats)
    p.add_argument("--upper", type=_floats)
    p.add_argument("--spacing", type=_floats)
    p.add_argument("--scale1", action="store_true", help="output lambda R_lambda instead of (1+lambda) R_lambda")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=("csv", "bin", "pgm"), default=None)
    p.add_argument("--threshold", type=float, default=None, help="extract nodes with map > threshold")
    p.add_argument("--axis-out", type=Path, default=None, help="PGM of the thresholded medial axis")
    p.add_argument("--check-probe", type=_floats, action="append", default=[],
                   help="run the dist vs dist^2 limit check at this probe (repeatable)")
    p.add_argument("--lambdas", type=_schedule, default=None, help="schedule for --check-probe")
    _add_common(p)

    p = sub.add_parser("oracle-eval", help="value, differential and predicted limit of an oracle")
    p.add_argument("--fn", required=True)
    p.add_argument("--fn-params", type=_json_arg, default=None)
    p.add_argument("--probe", type=_floats, action="append", required=True)
    _add_common(p)

    p = sub.add_parser("dc-check", help="edge lower bound for differences of convex functions")
    p.add_argument("--g", type=_json_arg, help="JSON spec of the convex g")
    p.add_argument("--h", type=_json_arg, help="JSON spec of the convex h")
    p.add_argument("--random", type=int, default=0, help="also test this many random sublinear pairs")
    p.add_argument("--dim", type=int, default=1, help="dimension of random pairs")
    p.add_argument("--probe", type=_floats, action="append", default=None)
    p.add_argument("--lambdas", type=_schedule, required=True)
    p.add_argument("--tol", type=float, default=0.01)
    _add_common(p)
    return parser


def _set_threads(n: int | None) -> None:
    if n is None:
        env = os.environ.get("CCX_THREADS")
        if not env:
            return
        try:
            n = int(env)
        except ValueError:
            raise InputError(f"CCX_THREADS must be an integer, got {env!r}")
    if n < 1:
        raise InputError(f"--threads must be >= 1, got {n}")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _refine(args, default: int) -> int:
    r = default if args.refine is None else args.refine
    if r < 1:
        raise InputError(f"--refine must be >= 1, got {r}")
    return r


def _load_source(args) -> ScalarGrid:
    if (args.inp is None) == (args.fn is None):
        raise InputError("give exactly one of --in or --fn")
    if args.inp is not None:
        if not args.inp.exists():
            raise InputError(f"--in: file {args.inp} does not exist")
        return read_grid(args.inp, args.format)
    tf = parse_function(args.fn, args.fn_params)
    if args.lower is None or args.upper is None or args.spacing is None:
        raise InputError("--fn needs --lower, --upper and --spacing")
    return sample(tf, GridSpec.from_bounds(args.lower, args.upper, args.spacing))


def _emit(obj, out: Path | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2)
    if out is None:
        print(text)
    else:
        out.write_text(text + "\n")


def _cmd_transform(args) -> int:
    f = _load_source(args)
    refine = _refine(args, 1)
    kind = args.kind
    if kind == "lower":
        out = lower_transform(f, args.lam, refine)
    elif kind == "upper":
        out = upper_transform(f, args.lam, refine)
    elif kind.startswith("mixed"):
        if getattr(args, "tau", None) is None:
            raise InputError("--tau is required for mixed transforms")
        out = mixed_transform(f, args.lam, args.tau, kind[-2:], refine)
    else:
        base = kind.replace("scale1-", "")
        out = singular_map(f, args.lam, base, refine)
        if kind.startswith("scale1-"):
            out = out * args.lam
    write_grid(out, args.out, args.format)
    return EXIT_OK


def _check_probes(probes, dim: int) -> None:
    for p in probes:
        if len(p) != dim:
            raise InputError(f"--probe {p} has {len(p)} coordinates, expected {dim}")


def _cmd_sweep(args) -> int:
    refine = _refine(args, DEFAULT_REFINE)
    if args.fn is not None and args.inp is None:
        source = parse_function(args.fn, args.fn_params)
        dim = source.dim
    else:
        source = _load_source(args)
        dim = source.ndim
    _check_probes(args.probe, dim)
    if isinstance(source, ScalarGrid):
        for p in args.probe:
            try:
                source.index_of(p)
            except GridError as exc:
                raise InputError(f"--probe: {exc}")
    reports = landscape_sweep(source, args.probe, args.lambdas, args.kind, resolution=args.resolution,
                              refine=refine, extrapolate=args.extrapolate)
    payload = [r.to_json() for r in reports]
    _emit(payload[0] if len(payload) == 1 else payload, args.out)
    return EXIT_OK


def _cmd_gradient(args) -> int:
    f = _load_source(args)
    refine = _refine(args, 1)
    field = gradient_upper(f, args.lam, refine)
    report = gradient_lipschitz_check(f, args.lam, args.rel_tol, refine)
    _check_probes(args.probe, f.ndim)
    if args.out is not None:
        for k, comp in enumerate(field):
            path = args.out.with_name(f"{args.out.stem}_d{k}{args.out.suffix}")
            write_grid(comp, path, args.format)
    payload = {
        "lambda": args.lam,
        "max_ratio": report.max_ratio,
        "bound": report.bound,
        "passed": report.passed,
        "probes": [{"probe": p, "gradient": field.at(p).tolist()} for p in args.probe],
    }
    _emit(payload, None)
    return EXIT_CHECK if args.check and not report.passed else EXIT_OK


def _cmd_minisphere(args) -> int:
    if not args.points.exists():
        raise InputError(f"points file {args.points} does not exist")
    pts = read_points_csv(args.points)
    s = min_bounding_sphere(Polytope(pts), seed=args.seed)
    payload = {"centre": s.centre.tolist(), "radius": s.radius,
               "support": [] if s.support is None else s.support.tolist()}
    if len(pts) >= 2:
        jr = jung_check(pts)
        payload.update(jung_ok=jr.ok, jung_bound=jr.bound, diameter=jr.diameter)
    else:
        payload["jung_ok"] = True
    payload["centre_in_hull"] = bool(centre_in_hull_check(pts, s))
    _emit(payload, None)
    return EXIT_OK


def _cmd_medial(args) -> int:
    if (args.sites is None) == (args.mask is None):
        raise InputError("give exactly one of --sites or --mask")
    if args.mask is not None:
        if not args.mask.exists():
            raise InputError(f"--mask: file {args.mask} does not exist")
        mask = read_pgm_mask(args.mask)
        origin = args.lower if args.lower is not None else (0.0, 0.0)
        spacing = args.spacing if args.spacing is not None else (1.0, 1.0)
        spec = GridSpec(mask.shape, origin, spacing)
        sites = SiteSet.from_mask(mask, spec)
    else:
        if not args.sites.exists():
            raise InputError(f"--sites: file {args.sites} does not exist")
        sites = SiteSet.from_points(read_points_csv(args.sites))
        if args.lower is None or args.upper is None or args.spacing is None:
            raise InputError("--sites needs --lower, --upper and --spacing")
        spec = GridSpec.from_bounds(args.lower, args.upper, args.spacing)
    refine = _refine(args, 1)
    fn = medial_scale1_map if args.scale1 else medial_axis_map
    m = fn(sites, args.lam, spec, refine)
    write_grid(m, args.out, args.format)
    status = EXIT_OK
    payload = {"lambda": args.lam, "max": float(m.values.max()), "dims": list(m.dims)}
    if args.threshold is not None:
        axis = extract_medial_axis(m, args.threshold)
        payload["axis_nodes"] = int(axis.sum())
        if args.axis_out is not None:
            write_grid(m.with_values(axis.astype(float)), args.axis_out, "pgm")
    if args.check_probe:
        if args.lambdas is None:
            raise InputError("--check-probe needs --lambdas")
        _check_probes(args.check_probe, sites.dim)
        rep = distance_vs_sqdistance_check(sites, args.check_probe, args.lambdas,
                                           refine=_refine(args, DEFAULT_REFINE))
        payload["check"] = rep.to_json()
        if not rep.passed:
            status = EXIT_CHECK
    _emit(payload, None)
    return status


def _cmd_oracle_eval(args) -> int:
    tf = parse_function(args.fn, args.fn_params)
    _check_probes(args.probe, tf.dim)
    rows = []
    for p in args.probe:
        row = {"probe": p, "value": float(tf(np.asarray(p)))}
        try:
            r = tf.subdifferential(p)
            land = predicted_landscape(tf, p)
            row.update(sign=r.sign, vertices=r.polytope.vertices.tolist(), singular=r.singular,
                       centre=land.centre.tolist(), radius=land.radius, limit=land.limit)
        except OracleError as exc:
            row["error"] = str(exc)
        rows.append(row)
    _emit(rows, None)
    return EXIT_OK


def _cmd_dc_check(args) -> int:
    pairs = []
    if (args.g is None) != (args.h is None):
        raise InputError("--g and --h must be given together")
    if args.g is not None:
        pairs.append((from_json(args.g), from_json(args.h)))
    rng = np.random.default_rng(args.seed)
    for _ in range(args.random):
        pairs.append((random_sublinear(rng, args.dim), random_sublinear(rng, args.dim)))
    if not pairs:
        raise InputError("nothing to check: give --g/--h or --random N")
    results = []
    ok = True
    for g, h in pairs:
        probe = args.probe[0] if args.probe else [0.0] * g.dim
        _check_probes([probe], g.dim)
        rep = dc_edge_bound(g, h, probe, args.lambdas, args.tol, refine=_refine(args, DEFAULT_REFINE))
        row = rep.to_json()
        row.update(g=g.to_json(), h=h.to_json())
        results.append(row)
        ok = ok and rep.holds
    _emit({"passed": ok, "pairs": results}, None)
    return EXIT_OK if ok else EXIT_CHECK


_COMMANDS = {
    "transform": _cmd_transform,
    "singmap": _cmd_transform,
    "sweep": _cmd_sweep,
    "gradient": _cmd_gradient,
    "minisphere": _cmd_minisphere,
    "medial": _cmd_medial,
    "oracle-eval": _cmd_oracle_eval,
    "dc-check": _cmd_dc_check,
}


_COORD_FLAGS = ("--lower", "--upper", "--spacing", "--probe", "--check-probe")


def _join_coord_flags(argv: list[str]) -> list[str]:
    """Rewrite ``--probe -1,0`` as ``--probe=-1,0`` so negative coordinate lists are not read as flags."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _COORD_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and argv[i + 1][1:2] in tuple("0123456789.,"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_coord_flags(argv))
    try:
        _set_threads(args.threads)
        return _COMMANDS[args.command](args)
    except (InputError, GridError, OracleError, ValueError, OSError) as exc:
        print(f"ccx {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
