"""Command-line interface: ``generate``, ``analyze``, ``sweep``, ``version``.

Exit codes: 0 success, 1 bad input (unreadable or invalid mesh file),
2 validation (bad shape, config or sweep specification), 3 pipeline failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from dataclasses import fields
from pathlib import Path

from . import __version__
from .config import AnalysisConfig, ConfigError, RegimeWarning, SweepSpec, load_config_file
from .mesh import MeshError, load_mesh, save_mesh
from .pinch import AnalysisError, analyze
from .shapes import SHAPE_KINDS, ShapeError, from_descriptor, generate, to_descriptor
from .sweep import run_sweep, write_outputs

EXIT_OK, EXIT_INPUT, EXIT_VALIDATION, EXIT_PIPELINE = 0, 1, 2, 3

_SHAPE_ALIASES = {"perturbed": "perturbed_sphere"}
# CLI flag -> (shape kind, dataclass field)
_SHAPE_FLAGS = {
    "radius": ("sphere", "perturbed_sphere"),
    "a": ("ellipsoid",),
    "b": ("ellipsoid",),
    "c": ("ellipsoid",),
    "R": ("torus",),
    "r": ("torus",),
    "delta": ("perturbed_sphere",),
    "l": ("perturbed_sphere",),
    "m": ("perturbed_sphere",),
}
_FIELD = {"R": "major", "r": "minor"}


class CLIError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _add_shape_args(p, with_res=True):
    p.add_argument("--shape", choices=["sphere", "ellipsoid", "torus", "perturbed_sphere", "perturbed"])
    p.add_argument("--radius", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--R", type=float, help="torus major radius")
    p.add_argument("--r", type=float, help="torus minor radius")
    p.add_argument("--delta", type=float, help="relative radial perturbation amplitude")
    p.add_argument("--l", type=int, help="harmonic degree of the perturbation")
    p.add_argument("--m", type=int, help="harmonic order of the perturbation")
    if with_res:
        p.add_argument("--res", type=int, help="icosphere level, or grid size for the torus")


def _add_config_args(p):
    p.add_argument("--config", help="JSON file with analysis settings (flags override)")
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--order", type=int, help="curvature order r of k_{p,r}")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--seed", type=int)
    norm = p.add_mutually_exclusive_group()
    norm.add_argument("--normalized", dest="normalized", action="store_true", default=None)
    norm.add_argument("--unnormalized", dest="normalized", action="store_false")


def _shape_descriptor(args, base=None):
    """Build ``{kind, params, resolution}`` from flags on top of ``base``."""
    desc = {"kind": None, "params": {}, "resolution": 4}
    if base:
        desc.update({k: v for k, v in base.items() if k != "params"})
        desc["params"] = dict(base.get("params", {}))
    if args.shape:
        kind = _SHAPE_ALIASES.get(args.shape, args.shape)
        if kind != desc["kind"]:
            desc["params"] = {}
        desc["kind"] = kind
    if desc["kind"] is None:
        raise CLIError("no shape given (use --shape)", EXIT_VALIDATION)
    for flag, kinds in _SHAPE_FLAGS.items():
        val = getattr(args, flag, None)
        if val is None:
            continue
        if desc["kind"] not in kinds:
            raise CLIError(f"--{flag} does not apply to shape {desc['kind']}", EXIT_VALIDATION)
        desc["params"][_FIELD.get(flag, flag)] = val
    if getattr(args, "res", None) is not None:
        desc["resolution"] = args.res
    return desc


def _config(args, file_data):
    data = {k: v for k, v in file_data.items() if k not in ("shape", "mesh")}
    try:
        cfg = AnalysisConfig.from_dict(data)
        return cfg.updated(
            p=args.p, q=args.q, r=args.order, tol=args.tol, max_iter=args.max_iter,
            seed=args.seed, normalized=args.normalized,
        )
    except (ConfigError, TypeError) as exc:
        raise CLIError(f"invalid configuration: {exc}", EXIT_VALIDATION) from exc


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "undefined"
    return format(x, ".6g")


def summary_table(report):
    r = report.provenance["config"]["r"]
    p = report.provenance["config"]["p"]
    o = report.deficits.orders[r]
    rows = [
        ("lambda1", _fmt(report.spectral.lambda1)),
        (f"k_{{{p:g},{r}}}", _fmt(o.k_pr)),
        ("radii fit / lambda1 / k", " / ".join(_fmt(v) for v in report.radii.values())),
        (f"reilly deficit / rhs (r={r})", _fmt(o.reilly_deficit / o.reilly_rhs)),
        (f"pinching deficit rel (p={p:g}, r={r})", _fmt(o.pinching_deficit_rel)),
        ("hm residual r=1 / r=2", " / ".join(_fmt(v) for v in report.deficits.hm_residual.values())),
        ("theta_hat", _fmt(report.theta_hat) if report.theta_hat is not None
         else "undefined: not star-shaped"),
        ("einstein deviation", _fmt(report.einstein_dev)),
        ("|B - sqrt(k) g| 2q / inf", f"{_fmt(report.b_dev_2q)} / {_fmt(report.umbilic_dev_inf)}"),
        ("|tau| 2q", _fmt(report.tau_norm_2q)),
        ("|H^2 - k| q", _fmt(report.h2_minus_k_q)),
        ("h_bar / s_bar", f"{_fmt(report.h_bar)} / {_fmt(report.s_bar)}"),
        ("cmc_eps / scal_eps", f"{_fmt(report.cmc_eps)} / {_fmt(report.scal_eps)}"),
        ("lemma gap", _fmt(report.lemma_gap)),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def cmd_generate(args):
    try:
        shape, res = from_descriptor(_shape_descriptor(args))
        mesh = generate(shape, res)
    except ShapeError as exc:
        raise CLIError(str(exc), EXIT_VALIDATION) from exc
    try:
        save_mesh(mesh, args.out)
    except (OSError, MeshError) as exc:
        raise CLIError(f"cannot write {args.out}: {exc}", EXIT_INPUT) from exc
    print(f"vertices {mesh.n_vertices}")
    print(f"faces {mesh.n_faces}")
    print(f"euler characteristic {mesh.euler_characteristic}")
    return EXIT_OK


def _load_input(args, file_data):
    mesh_path = args.mesh or file_data.get("mesh")
    if mesh_path:
        try:
            mesh = load_mesh(mesh_path)
        except (OSError, MeshError) as exc:
            raise CLIError(f"cannot load {mesh_path}: {exc}", EXIT_INPUT) from exc
        return mesh, {"mesh": str(mesh_path)}
    try:
        shape, res = from_descriptor(_shape_descriptor(args, file_data.get("shape")))
        mesh = generate(shape, res)
    except ShapeError as exc:
        raise CLIError(str(exc), EXIT_VALIDATION) from exc
    return mesh, {"shape": to_descriptor(shape, res)}


def _read_config_file(path):
    if not path:
        return {}
    try:
        return load_config_file(path)
    except ConfigError as exc:
        raise CLIError(str(exc), EXIT_INPUT) from exc


def cmd_analyze(args):
    file_data = _read_config_file(args.config)
    config = _config(args, file_data)
    warn = config.q <= config.n / 2
    if warn:
        print(f"warning: q <= n/2 (q = {config.q:g}): outside the q > n/2 regime of the "
              "Ricci-curvature eigenvalue lower bound; continuing", file=sys.stderr)
    mesh, prov = _load_input(args, file_data)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            report = analyze(mesh, config, prov)
    except AnalysisError as exc:
        raise CLIError(f"analysis failed at stage {exc.stage}: {exc.cause}", EXIT_PIPELINE) from exc
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(summary_table(report))
    else:
        print(summary_table(report), file=sys.stderr)
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args):
    file_data = _read_config_file(args.config)
    config = _config(args, file_data)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()] if args.values else []
    except ValueError as exc:
        raise CLIError(f"bad --values: {exc}", EXIT_VALIDATION) from exc
    desc = _shape_descriptor(args, file_data.get("shape"))
    param = _FIELD.get(args.param, args.param)
    allowed = {f.name for f in fields(SHAPE_KINDS[desc["kind"]])} | {"resolution"}
    if param not in allowed:
        raise CLIError(
            f"cannot sweep {args.param!r} for shape {desc['kind']} (choose from {sorted(allowed)})",
            EXIT_VALIDATION,
        )
    try:
        spec = SweepSpec(desc["kind"], desc["params"], desc["resolution"], param, tuple(values), config)
        from_descriptor(desc)
    except (ConfigError, ShapeError) as exc:
        raise CLIError(str(exc), EXIT_VALIDATION) from exc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        rows = run_sweep(spec)
    svgs = write_outputs(rows, args.out, xlabel=args.param)
    ok = sum(1 for row in rows if not math.isnan(row["lambda1"]))
    print(f"{ok}/{len(rows)} rows succeeded; wrote {args.out} and {len(svgs)} charts")
    return EXIT_OK if ok else EXIT_PIPELINE


def build_parser():
    parser = argparse.ArgumentParser(prog="pinchlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write an analytic test mesh as OFF/OBJ")
    _add_shape_args(g)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("analyze", help="run the full diagnostic pipeline")
    a.add_argument("--mesh", help="OFF or OBJ file (instead of --shape)")
    _add_shape_args(a)
    _add_config_args(a)
    a.add_argument("--out", help="report JSON path (default: stdout)")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="analyse a shape family over a parameter range")
    _add_shape_args(s)
    _add_config_args(s)
    s.add_argument("--param", required=True, help="shape parameter or 'resolution'")
    s.add_argument("--values", default="", help="comma-separated, strictly increasing")
    s.add_argument("--out", required=True, help="CSV path; SVG charts are written beside it")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("version", help="print the version")
    v.set_defaults(func=lambda args: print(__version__) or EXIT_OK)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
