"""Command-line entry point (``gse-supply``)."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .allocator import dump_problem, load_problem, solve_year, usage_ratios
from .bom import default_bom
from .errors import ConfigError, GseError
from .mrsut import (
    DEFAULT_PHI, DEFAULT_TOL, MAX_LAYERS, ProductCoefficients, gse_final_demand, load_system, neumann_layers,
    read_concordance, read_final_demand, read_mass_factors, split_label, trace_material_sourcing,
)
from .scenario import (
    RunConfig, RunManifest, compare_csv, compare_scenarios, fixture_path, run_pipeline, run_scenario,
)
from .survival import default_lifetimes, lifetimes_csv
from .tables import fmt, render_csv

log = logging.getLogger("gse_supply")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    out = Path(args.out)
    prior = out / "manifest.json"
    cfg = RunConfig.load(args.scenario, args.bom)
    if prior.exists():
        name = RunManifest.read(prior).scenario
        if name != cfg.scenario.name:
            raise ConfigError(f"{out} already holds outputs of scenario {name!r}")
    manifest = run_scenario(args.scenario, out, bom_override=args.bom, dump_lp=args.dump_lp)
    print(f"{manifest.scenario}: wrote {len(manifest.outputs)} files to {out}", file=sys.stderr)
    return 0


def cmd_compare(args) -> int:
    rows = compare_scenarios(args.reference, args.variant, args.year)
    _emit(compare_csv(rows), args.out)
    return 0


def cmd_trace(args) -> int:
    manifest = Path(args.mrsut) if args.mrsut else fixture_path("mrsut_3r/manifest.json")
    base = manifest.parent
    fd_path = Path(args.final_demand) if args.final_demand else base / "final_demand.csv"
    conc = Path(args.concordance) if args.concordance else base / "concordance.csv"
    mass = Path(args.mass_factors) if args.mass_factors else base / "mass_factors.csv"
    if not 0 < args.phi <= 1:
        raise ConfigError("--phi must lie in (0, 1]")
    system = load_system(manifest)
    meta = json.loads(manifest.read_text(encoding="utf-8"))
    parent = args.parent or meta.get("parent_product")
    if not parent:
        raise ConfigError("no parent product given (--parent) or named in the manifest")
    layers = neumann_layers(ProductCoefficients.from_system(system).A, n=args.layers, tol=args.tol, keep_layers=False)
    idx = [k for k, lab in enumerate(system.products) if split_label(lab)[1] == parent]
    if not idx:
        raise ConfigError(f"parent product {parent!r} not in the system")
    fd = read_final_demand(fd_path, system)
    gse = {y: gse_final_demand(v, args.phi, idx) for y, v in fd.items()}
    src = trace_material_sourcing(system, layers, gse, read_concordance(conc), read_mass_factors(mass), args.phi)
    bound = "n/a" if layers.residual_bound is None else f"{layers.residual_bound:.3g}"
    print(
        f"spectral_radius={layers.spectral_radius:.6f} layers={layers.n} "
        f"last_layer_norm={layers.layer_norms[-1]:.3g} residual_bound={bound}",
        file=sys.stderr,
    )
    _emit(src.to_csv(), args.out)
    return 0


def cmd_dump_lifetimes(args) -> int:
    _emit(lifetimes_csv(default_lifetimes()), getattr(args, "out", None))
    return 0


def cmd_dump_bom(args) -> int:
    _emit(default_bom().to_csv(), getattr(args, "out", None))
    return 0


def cmd_dump_lp(args) -> int:
    result = run_pipeline(RunConfig.load(args.scenario, args.bom))
    for prob in result.problems:
        dump_problem(prob, Path(args.out) / f"problem_{prob.year}.json")
    print(f"wrote {len(result.problems)} problems to {args.out}", file=sys.stderr)
    return 0


def cmd_solve_lp(args) -> int:
    rows, mrows = [], []
    for path in args.problems:
        prob = load_problem(path)
        sol = solve_year(prob, mode=args.mode)
        for i, e in enumerate(prob.classes):
            d = prob.demand[i]
            rows.append((e, prob.year, fmt(sol.produced[i], 3), fmt(sol.unmet[i], 3), fmt(sol.unmet[i] / d if d > 0 else 0.0, 4)))
        use = usage_ratios(sol, prob)
        mrows += [(m, prob.year, fmt(r, 4), "true" if m in use.binding else "false") for m, r in use.ratios.items()]
    _emit(render_csv(("class", "year", "produced_gva", "unmet_gva", "gap_ratio"), rows), args.out)
    if args.usage_out:
        _emit(render_csv(("material", "year", "usage_ratio", "binding"), mrows), args.usage_out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gse-supply", description="GSE demand, material sourcing and supply-gap runs")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log one line per pipeline stage")
    ap.add_argument("--dump-lifetimes", action="store_true", help="print default lifetime parameters and exit")
    ap.add_argument("--dump-bom", action="store_true", help="print the default BOM and exit")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("run", help="run one scenario end to end")
    p.add_argument("--scenario", required=True, help="scenario JSON (or the name of a bundled one)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bom", help="BOM CSV overriding the configured one")
    p.add_argument("--dump-lp", metavar="DIR", help="also write each year's LP as JSON")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="variant minus reference deltas")
    p.add_argument("reference", help="reference run directory or manifest.json")
    p.add_argument("variant", help="variant run directory or manifest.json")
    p.add_argument("--year", type=int, help="restrict to one year")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("trace", help="trace material sourcing through a supply-use system")
    p.add_argument("--mrsut", help="axis manifest JSON (default: bundled 3-region fixture)")
    p.add_argument("--final-demand", help="CSV year, product, value")
    p.add_argument("--concordance", help="CSV product_group, material[, share]")
    p.add_argument("--mass-factors", help="CSV material, kg_per_unit_value")
    p.add_argument("--parent", help="product whose final demand carries the GSE share")
    p.add_argument("--layers", type=int, default=MAX_LAYERS, help="maximum number of supply-chain layers")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="stop when a layer's max-norm falls below this")
    p.add_argument("--phi", type=float, default=DEFAULT_PHI, help="GSE share of the parent product")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_trace)

    for name, func in (("dump-lifetimes", cmd_dump_lifetimes), ("dump-bom", cmd_dump_bom)):
        p = sub.add_parser(name, help=f"print the default {name[5:]} table")
        p.add_argument("--out", help="write CSV here instead of stdout")
        p.set_defaults(func=func)

    p = sub.add_parser("dump-lp", help="write each year's allocation LP as JSON without solving")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bom")
    p.set_defaults(func=cmd_dump_lp)

    p = sub.add_parser("solve-lp", help="solve dumped LP JSON files")
    p.add_argument("problems", nargs="+")
    p.add_argument("--mode", choices=("two_phase", "big_m"), default="two_phase")
    p.add_argument("--out", help="class-level CSV (default stdout)")
    p.add_argument("--usage-out", help="material usage CSV")
    p.set_defaults(func=cmd_solve_lp)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.dump_lifetimes:
            return cmd_dump_lifetimes(args)
        if args.dump_bom:
            return cmd_dump_bom(args)
        if not args.command:
            ap.print_help(sys.stderr)
            return ConfigError.exit_code
        return args.func(args)
    except GseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
