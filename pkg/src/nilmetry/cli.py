"""Command-line driver: ``nilmetry <experiment> [options]``.

Every experiment takes ``--seed`` (mandatory) and ``--config`` (a YAML
mapping whose keys are option names).  Options given on the command line win
over the config file.  Exit status: 0 success, 1 usage or configuration
error, 2 a claimed bound was violated.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from . import harness
from .lie_core import BUILTIN_NAMES, AlgebraError, resolve_algebra
from .maps import Shear, parse_map, qi_constants_bound
from .metrics import HomogeneousGauge, ball_box_diagnostic, estimate_triangle_constant
from .sampling import PAIR_MODES, SHAPES, SamplerConfig

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2

MAP_TERMS = {
    "aut(@file | a11,a12,...)": "group automorphism given by its matrix",
    "dilate(lam)": "dilation delta_lam",
    "flambda:lam": "heisenberg3 only; (lam x + i y/lam, t)",
    "Flambda:lam": "heisenberg3 only; j o f_lam o j",
    "id": "identity",
    "lift(<planar>)": "heisenberg3 only; Lipschitz lift of a planar map",
    "ltrans(v1,...,vd)": "left translation",
    "shear(<function>)": "n + g(pi_1 n)",
}
SHEAR_FUNCTIONS = {
    "abs": "|x| e, L = |e|, A = 0",
    "const:c1,...": "constant, L = 0, A = 0",
    "linear:a11,...": "linear V_1 -> V_r, row-major",
    "power:alpha": "|x|^alpha e, L = alpha, A = 1 - alpha",
    "zero": "g = 0",
}
METRICS = {"dh": "homogeneous quasi-metric |(-x)*y|_h", "koranyi": "heisenberg3 gauge distance"}
PLANAR = {"@file": "tabulated grid rows x y f1 f2", "f_lambda:lam": "(lam x, y/lam)",
          "id": "identity",
          "cube_root_shear": "(x + g(y), y), g(y) = y on |y| <= 1, cbrt(y) beyond",
          "paper_example": "alias of cube_root_shear"}

DEFAULTS = {
    "group": "heisenberg3", "metric": "dh", "samples": 10_000, "shape": "logradial",
    "radius": 10.0, "r_min": 1e-3, "r_max": 1e3, "pair_mode": "uniform", "out": None,
    "claimed": None, "scales": "1,0.1,0.01,0.001,0.0001", "box_radius": 0.5, "grid": 10,
    "z": "4+4i", "t_max": 1e6, "line_samples": 2001, "planar": "cube_root_shear",
    "budget": 300, "map": None,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _sampler_options(p):
    p.add_argument("--samples", type=int, help="number of samples (default %d)" % DEFAULTS["samples"])
    p.add_argument("--shape", choices=SHAPES, help="sampling domain (default logradial)")
    p.add_argument("--radius", type=float, help="box half-width for --shape box")
    p.add_argument("--r-min", type=float, help="smallest dilation for --shape logradial")
    p.add_argument("--r-max", type=float, help="largest dilation for --shape logradial")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nilmetry", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def experiment(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", type=Path, help="YAML file of option values")
        p.add_argument("--seed", type=int, help="master seed (required)")
        p.add_argument("--out", type=Path, help="CSV output path (default stdout)")
        return p

    p = experiment("qi", "fit large-scale Lipschitz envelopes of a map and its inverse")
    p.add_argument("--group", help="built-in algebra name or @file.yaml")
    p.add_argument("--map", help="map expression, e.g. 'shear(abs)'")
    p.add_argument("--metric", choices=sorted(METRICS), help="distance (default dh)")
    p.add_argument("--pair-mode", choices=PAIR_MODES, help="how pairs are drawn")
    p.add_argument("--claimed", help="'L,A' to check, or 'auto' for the shear bound")
    _sampler_options(p)

    p = experiment("cone", "sup-distance of rescaled maps to the identity on a box grid")
    p.add_argument("--group", help="built-in algebra name or @file.yaml")
    p.add_argument("--map", help="map expression; shear(g) also gets the closed-form bound")
    p.add_argument("--metric", choices=sorted(METRICS), help="distance (default dh)")
    p.add_argument("--scales", help="strictly decreasing comma list")
    p.add_argument("--box-radius", type=float, help="grid half-width (default 0.5)")
    p.add_argument("--grid", type=int, help="grid points per axis (default 10)")

    p = experiment("foliation", "image of vertical lines under a heisenberg3 map")
    p.add_argument("--map", help="map expression, e.g. 'Flambda:2'")
    p.add_argument("--z", help="comma list of bases, e.g. 4+4i,8+8i")
    p.add_argument("--t-max", type=float, help="largest |t| (ranges grow by factors of 10)")
    p.add_argument("--line-samples", "--samples", dest="line_samples", type=int,
                   help="points per vertical line")

    p = experiment("lift", "lift a planar map and check that vertical lines stay vertical")
    p.add_argument("--planar", help="planar map: id, f_lambda:lam, cube_root_shear or @grid")
    p.add_argument("--z", help="comma list of bases")
    p.add_argument("--t-max", type=float, help="largest |t|")
    p.add_argument("--line-samples", "--samples", dest="line_samples", type=int,
                   help="points per vertical line")

    p = experiment("ballbox", "ball-box constant of the Riemannian distance estimator")
    p.add_argument("--group", help="built-in algebra name or @file.yaml")
    p.add_argument("--budget", type=int, help="optimizer evaluations per point")
    _sampler_options(p)

    p = experiment("triangle", "sampled triangle constant of the homogeneous quasi-metric")
    p.add_argument("--group", help="built-in algebra name or @file.yaml")
    _sampler_options(p)

    sub.add_parser("list", help="list built-in groups, maps, functions and metrics")
    return parser


def _merge(args: argparse.Namespace) -> dict:
    """Command-line values over config-file values over defaults."""
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    conf = {}
    if getattr(args, "config", None) is not None:
        try:
            conf = yaml.safe_load(args.config.read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(conf, dict):
            raise UsageError("config file must be a mapping")
        conf = {str(k).replace("-", "_"): v for k, v in conf.items()}
        kind = conf.pop("kind", None)
        if kind is not None and kind != args.command:
            raise UsageError(f"config is for '{kind}', not '{args.command}'")
        if "samples" in conf and "line_samples" in given:
            conf["line_samples"] = conf.pop("samples")
        unknown = sorted(set(conf) - set(given))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    opts = {}
    for key, value in given.items():
        if value is None:
            value = conf.get(key, DEFAULTS.get(key))
        opts[key] = value
    if opts.get("seed") is None:
        raise UsageError("--seed is required")
    opts["seed"] = int(opts["seed"])
    return opts


def _sampler(o: dict) -> SamplerConfig:
    return SamplerConfig(seed=o["seed"], shape=o["shape"], radius=float(o["radius"]),
                         r_min=float(o["r_min"]), r_max=float(o["r_max"]),
                         pair_mode=o.get("pair_mode") or "uniform", count=int(o["samples"]))


def _bases(text) -> list:
    items = text if isinstance(text, list) else str(text).split(",")
    return [complex(str(s).strip().replace(" ", "").replace("i", "j")) for s in items]


def _required(o, key):
    if o.get(key) is None:
        raise UsageError(f"--{key.replace('_', '-')} is required")
    return o[key]


def _run_qi(o):
    alg = resolve_algebra(o["group"])
    fmap = parse_map(alg, _required(o, "map"))
    sampler = _sampler(o)
    claimed = o["claimed"]
    if claimed is None and isinstance(fmap, Shear):
        claimed = "auto"
    if claimed == "auto":
        if not isinstance(fmap, Shear):
            raise UsageError("--claimed auto needs a single shear map")
        m_hat = estimate_triangle_constant(HomogeneousGauge(alg), sampler, sampler.count).M_hat
        claimed = qi_constants_bound(fmap.g.L, fmap.g.A, m_hat, alg.step)
    elif claimed is not None:
        vals = [float(v) for v in str(claimed).split(",")]
        if len(vals) != 2:
            raise UsageError("--claimed takes 'L,A'")
        claimed = tuple(vals)
    report = harness.qi_verify(fmap, o["metric"], sampler, claimed)
    return report, report.total_violations == 0


def _run_cone(o):
    alg = resolve_algebra(o["group"])
    text = _required(o, "map").strip()
    fmap = parse_map(alg, text)
    scales = [float(s) for s in str(o["scales"]).split(",")]
    if isinstance(fmap, Shear):
        family = harness.shear_family(alg, fmap.g)
        bound = harness.shear_cone_bound(alg, fmap.g)
    else:
        family, bound = harness.conjugate_family(alg, fmap), None
    report = harness.cone_convergence(family, o["metric"], alg, scales, float(o["box_radius"]),
                                      int(o["grid"]), bound)
    return report, report.all_pass


def _run_foliation(o):
    alg = resolve_algebra("heisenberg3")
    fmap = parse_map(alg, _required(o, "map"))
    table = harness.foliation_table(fmap, _bases(o["z"]), float(o["t_max"]), int(o["line_samples"]))
    return table, True


def _run_lift(o):
    from .heisenberg import Lift, planar_map

    lift = Lift(planar_map(str(o["planar"])))
    table = harness.foliation_table(lift, _bases(o["z"]), float(o["t_max"]), int(o["line_samples"]),
                                    decades=False)
    return table, all(d <= 1e-9 for d in table.pi_diameter)


def _run_ballbox(o):
    alg = resolve_algebra(o["group"])
    return ball_box_diagnostic(alg, _sampler(o), int(o["budget"])), True


def _run_triangle(o):
    alg = resolve_algebra(o["group"])
    sampler = _sampler(o)
    return estimate_triangle_constant(HomogeneousGauge(alg), sampler, sampler.count), True


RUNNERS = {"qi": _run_qi, "cone": _run_cone, "foliation": _run_foliation, "lift": _run_lift,
           "ballbox": _run_ballbox, "triangle": _run_triangle}


def list_builtins() -> str:
    sections = [
        ("groups", {n: _group_summary(n) for n in BUILTIN_NAMES}),
        ("maps", MAP_TERMS),
        ("metrics", METRICS),
        ("planar maps", PLANAR),
        ("shear functions", SHEAR_FUNCTIONS),
    ]
    lines = []
    for title, entries in sorted(sections):
        lines.append(f"{title}:")
        width = max(len(k) for k in entries)
        for key in sorted(entries, key=str.lower):
            lines.append(f"  {key:<{width}}  {entries[key]}")
    return "\n".join(lines) + "\n"


def _group_summary(name: str) -> str:
    alg = resolve_algebra(name.replace("(n)", "(3)"))
    dims = "layers " + "+".join(str(d) for d in alg.layer_dims)
    return f"{dims}, step {alg.step}" + (" (n = dimension)" if "(n)" in name else "")


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "list":
            sys.stdout.write(list_builtins())
            return EXIT_OK
        opts = _merge(args)
        report, ok = RUNNERS[args.command](opts)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (AlgebraError, ValueError, OSError, NotImplementedError) as exc:
        print(f"nilmetry {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = harness.report_to_csv(report)
    if opts["out"] is None:
        sys.stdout.write(text)
    else:
        Path(opts["out"]).write_text(text)
    if not ok:
        print(f"nilmetry {args.command}: claimed bound violated", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
