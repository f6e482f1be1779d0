"""Command-line entry point: ``pilotdesign <command> ...``.

Every command prints a JSON document on stdout.  Invalid input exits with
status 2 and a message on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bounds import bound_check
from .core import Design, ModelSpec, TargetDistribution
from .discrepancy import discrepancy_closed, discrepancy_mc
from .errors import InvalidInput, SingularInformation
from .generators import FAMILIES, METHODS, GeneratorSpec, generate
from .glm import glm_weights, info_exact, info_target, quadrature
from .optimal import (CriterionMatrix, candidate_grid, default_candidates, ei_criterion, l_efficiency,
                      solve_l_optimal, standardized_a_matrix)
from .study import config_from_json, emit_report, example_config, run_study


def _print(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _target(args, d: int) -> TargetDistribution:
    return TargetDistribution(args.target, d)


def _candidates(args, d: int) -> np.ndarray:
    if args.sobol:
        return candidate_grid(d, family="sobol", n_points=args.sobol, seed=args.seed)
    if args.grid:
        return candidate_grid(d, args.grid)
    return default_candidates(d)


def _criterion(args, spec: ModelSpec, cand: np.ndarray) -> CriterionMatrix:
    name = args.criterion
    if name == "A":
        return CriterionMatrix.identity(spec.l)
    if name.startswith("c:"):
        try:
            j = int(name[2:])
        except ValueError:
            raise InvalidInput(f"bad criterion {name!r}; use c:<index>") from None
        return CriterionMatrix.coordinate(spec.l, j)
    if name == "SA":
        return standardized_a_matrix(cand, spec, args.tol).criterion
    if name == "EI":
        imse = args.imse_target or args.target
        return ei_criterion(spec, TargetDistribution(imse, spec.d))
    raise InvalidInput(f"unknown criterion {name!r}; expected A, c:<j>, SA or EI")


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--criterion", default="A", help="A, c:<j>, SA or EI (default A)")
    p.add_argument("--imse-target", choices=("uniform", "arcsine"),
                   help="averaging law of the EI criterion (default: --target)")
    p.add_argument("--grid", type=int, help="candidate tensor grid, points per axis")
    p.add_argument("--sobol", type=int, help="candidate Sobol cloud size (vertices are added)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=100_000)


def cmd_generate(args) -> None:
    spec = GeneratorSpec(args.family, args.n, args.d, args.seed, args.budget, args.method)
    design = generate(spec, TargetDistribution(args.target, args.d))
    if args.out:
        design.to_csv(args.out)
    _print({"family": args.family, "target": args.target, "n": design.n, "d": design.d,
            "seed": args.seed, "out": args.out, "points": None if args.out else design.points.tolist()})


def cmd_discrepancy(args) -> None:
    design = Design.from_csv(args.design)
    target = _target(args, design.d)
    if args.mc:
        rep = discrepancy_mc(design, target, args.mc, args.seed, args.workers)
    else:
        rep = discrepancy_closed(design, target)
    _print(rep.to_json())


def cmd_solve(args) -> None:
    spec = ModelSpec.from_json(args.model)
    cand = _candidates(args, spec.d)
    L = _criterion(args, spec, cand)
    res = solve_l_optimal(cand, spec, L, args.tol, args.max_iter)
    out = res.to_json()
    if args.dump_info:
        p = res.weights.weights
        g = spec.design_matrix(cand[p > 0])
        w = glm_weights(spec.link, g @ spec.beta) * p[p > 0]
        out["information"] = ((g * w[:, None]).T @ g).tolist()
    if args.out:
        Path(args.out).write_text(json.dumps(out, indent=2))
    _print(out)


def cmd_efficiency(args) -> None:
    design = Design.from_csv(args.design)
    spec = ModelSpec.from_json(args.model)
    cand = _candidates(args, spec.d)
    L = _criterion(args, spec, cand)
    opt = solve_l_optimal(cand, spec, L, args.tol, args.max_iter)
    eff = l_efficiency(design, spec, L, opt)
    out = eff.to_json()
    out.update({"criterion": L.kind, "optimum": opt.criterion_value, "optimum_gap": opt.equivalence_gap,
                "above_one": bool(eff.value > 1.0 + args.tol)})
    if args.dump_info:
        try:
            out["information"] = info_exact(design, spec).entries.tolist()
        except SingularInformation:
            out["information"] = None
    _print(out)


def cmd_bound_check(args) -> None:
    design = Design.from_csv(args.design)
    spec = ModelSpec.from_json(args.model)
    target = _target(args, spec.d)
    cand = _candidates(args, spec.d)
    L = _criterion(args, spec, cand)
    opt = solve_l_optimal(cand, spec, L, args.tol, args.max_iter)
    rule = quadrature(target, level=args.level)
    out = bound_check(design, spec, target, L, opt, rule).to_json()
    if args.dump_info:
        out["information_target"] = info_target(target, spec, rule).entries.tolist()
        out["information_design"] = info_exact(design, spec).entries.tolist()
    _print(out)


def cmd_experiment(args) -> None:
    if args.config:
        cfg = config_from_json(args.config)
    else:
        if not args.example:
            raise InvalidInput("experiment needs --example or --config")
        cfg = example_config(args.example, args.full_scale, seeds=args.seeds, coeff_grid=args.coeff_grid,
                             master_seed=args.master_seed, threads=args.threads)
    result = run_study(cfg, args.threads)
    files = emit_report(result, args.out, args.format)
    _print({"rows": len(result.rows), "files": [str(f) for f in files], "spearman": result.spearman,
            "bound_violations": result.bounds.get("violations")})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pilotdesign", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build a design and write it as CSV")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--target", choices=("uniform", "arcsine"), default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, help="optimizer budget for optimised LHDs")
    p.add_argument("--method", choices=METHODS, default="anneal")
    p.add_argument("--out", help="CSV path (points are printed when omitted)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("discrepancy", help="discrepancy of a design CSV against a target")
    p.add_argument("--design", required=True)
    p.add_argument("--target", choices=("uniform", "arcsine"), default="uniform")
    p.add_argument("--mc", type=int, help="Monte-Carlo sample size instead of the closed form")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_discrepancy)

    p = sub.add_parser("solve", help="locally L-optimal continuous design")
    p.add_argument("--model", required=True, help="model JSON: link, basis, beta")
    p.add_argument("--target", choices=("uniform", "arcsine"), default="uniform")
    p.add_argument("--out")
    p.add_argument("--dump-info", action="store_true")
    _add_solver_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("efficiency", help="L-efficiency of a design CSV")
    p.add_argument("--design", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--target", choices=("uniform", "arcsine"), default="uniform")
    p.add_argument("--dump-info", action="store_true")
    _add_solver_args(p)
    p.set_defaults(func=cmd_efficiency)

    p = sub.add_parser("bound-check", help="spectral efficiency-bound check")
    p.add_argument("--design", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--target", choices=("uniform", "arcsine"), required=True)
    p.add_argument("--level", type=int, help="quadrature points per axis")
    p.add_argument("--dump-info", action="store_true")
    _add_solver_args(p)
    p.set_defaults(func=cmd_bound_check)

    p = sub.add_parser("experiment", help="run an example study and write reports")
    p.add_argument("--example", choices=("ex1", "ex2", "ex3"))
    p.add_argument("--full-scale", action="store_true")
    p.add_argument("--seeds", type=int)
    p.add_argument("--coeff-grid", type=int)
    p.add_argument("--master-seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--config", help="JSON config with the same keys as the flags")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (InvalidInput, SingularInformation, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
