"""End-to-end scenario runs: demand -> sourcing/availability -> allocation -> tables."""

from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass
from importlib import resources
from pathlib import Path


from . import __version__
from .allocator import (
    AllocationProblem, default_weights, dump_problem, gap_report, solve_year, usage_csv,
)
from .bom import BomMatrix, read_bom
from .classes import EQUIPMENT_CLASSES
from .demand import DemandSchedule, ScenarioSpec, load_scenario, project_demand
from .errors import ConfigError, DataError, InputError
from .mrsut import (
    DEFAULT_PHI, DEFAULT_TOL, MAX_LAYERS, MaterialSourcing, ProductCoefficients, apply_trade_disruption,
    availability_from_totals, extrapolate_shares, gse_final_demand, load_system, neumann_layers,
    read_concordance, read_final_demand, read_mass_factors, split_label, trace_material_sourcing,
)
from .survival import load_lifetimes, read_net_additions
from .tables import fmt, parse_float, read_rows, render_csv, sha256_file

log = logging.getLogger(__name__)

FIXTURES = resources.files("gse_supply") / "fixtures"

DATA_KEYS = {
    "history": "paper_params/history.csv",
    "lifetimes": "paper_params/lifetimes.csv",
    "ratios": "paper_params/ratios.json",
    "bom": "paper_params/bom.csv",
    "trajectories": "paper_params/trajectories.json",
    "availability": "paper_params/availability.csv",
    "mrsut": "mrsut_3r/manifest.json",
    "concordance": "mrsut_3r/concordance.csv",
    "mass_factors": "mrsut_3r/mass_factors.csv",
    "final_demand": "mrsut_3r/final_demand.csv",
}
RUN_KEYS = {"data", "phi", "layers", "tol", "weights", "solve_mode", "description"}


def fixture_path(rel: str) -> Path:
    return Path(str(FIXTURES / rel))


def bundled_scenario(name: str) -> Path:
    path = fixture_path(f"scenarios/{name}")
    if not path.suffix:
        path = path.with_suffix(".json")
    return path


@contextmanager
def stage(name: str):
    t0 = time.perf_counter()
    yield
    log.info("stage=%s seconds=%.3f", name, time.perf_counter() - t0)


@dataclass
class RunConfig:
    scenario: ScenarioSpec
    data: dict  # key -> resolved Path
    phi: float = DEFAULT_PHI
    layers: int = MAX_LAYERS
    tol: float = DEFAULT_TOL
    weights: dict = None
    solve_mode: str = "two_phase"
    source: Path = None

    @classmethod
    def load(cls, path, bom_override=None) -> "RunConfig":
        path = Path(path)
        if not path.exists() and bundled_scenario(path.name).exists():
            path = bundled_scenario(path.name)
        spec, extra = load_scenario(path)
        unknown = set(extra) - RUN_KEYS
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        data = {}
        given = extra.get("data", {})
        if not isinstance(given, dict):
            raise ConfigError(f"{path}: 'data' must be an object")
        bad = set(given) - set(DATA_KEYS)
        if bad:
            raise ConfigError(f"{path}: unknown data keys {sorted(bad)}")
        for key, rel in DATA_KEYS.items():
            data[key] = (path.parent / given[key]).resolve() if key in given else fixture_path(rel)
        if bom_override is not None:
            data["bom"] = Path(bom_override).resolve()
        for key, p in data.items():
            if not p.exists():
                raise ConfigError(f"{path}: data file for {key!r} not found: {p}")
        try:
            cfg = cls(
                scenario=spec,
                data=data,
                phi=float(extra.get("phi", DEFAULT_PHI)),
                layers=int(extra.get("layers", MAX_LAYERS)),
                tol=float(extra.get("tol", DEFAULT_TOL)),
                weights=extra.get("weights"),
                solve_mode=extra.get("solve_mode", "two_phase"),
                source=path,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not 0 < cfg.phi <= 1:
            raise ConfigError(f"{path}: phi must lie in (0, 1]")
        return cfg


def read_availability(path) -> dict[str, dict[int, float]]:
    """``material, year, available_kg`` (totals over all regions)."""
    out: dict[str, dict[int, float]] = {}
    for i, row in enumerate(read_rows(path, ("material", "year", "available_kg")), start=2):
        where = f"{path}:{i}"
        v = parse_float(row["available_kg"], where)
        if v < 0:
            raise InputError(f"{where}: availability must be nonnegative")
        try:
            out.setdefault(row["material"], {})[int(row["year"])] = v
        except ValueError:
            raise InputError(f"{where}: bad year") from None
    return out


def read_ratios(path) -> dict[str, float]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return {str(k): float(v) for k, v in raw.items()}
    except (json.JSONDecodeError, AttributeError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: bad ratio file ({exc})") from None


@dataclass
class RunResult:
    config: RunConfig
    schedule: DemandSchedule
    traced: MaterialSourcing  # historical embodied mass by region
    availability: MaterialSourcing  # projection years, after any disruption
    problems: list
    solutions: list
    bom: BomMatrix
    ratios: dict
    layer_count: int = 0

    @property
    def years(self) -> tuple:
        return self.schedule.years


def build_availability(cfg: RunConfig, system_years) -> tuple[MaterialSourcing, MaterialSourcing, int]:
    scen = cfg.scenario
    man = json.loads(cfg.data["mrsut"].read_text(encoding="utf-8"))
    system = load_system(cfg.data["mrsut"])
    coeffs = ProductCoefficients.from_system(system)
    layers = neumann_layers(coeffs.A, n=cfg.layers, tol=cfg.tol, keep_layers=False)
    parent = man.get("parent_product")
    fd = read_final_demand(cfg.data["final_demand"], system)
    if parent is None:
        raise ConfigError("MRSUT manifest lacks 'parent_product'")
    idx = [k for k, lab in enumerate(system.products) if split_label(lab)[1] == parent]
    gse = {y: gse_final_demand(f, cfg.phi, idx) for y, f in fd.items()}
    traced = trace_material_sourcing(
        system, layers, gse, read_concordance(cfg.data["concordance"]),
        read_mass_factors(cfg.data["mass_factors"]), cfg.phi,
    )
    shares = extrapolate_shares(traced, system_years)
    totals = read_availability(cfg.data["availability"])
    avail = availability_from_totals(totals, shares, traced.materials, traced.regions, system_years)
    if scen.trade_disruption_enabled:
        restricted = scen.restricted_regions or tuple(man.get("restricted_regions", ()))
        if not restricted:
            raise ConfigError("trade disruption enabled but no restricted regions configured")
        avail = apply_trade_disruption(avail, restricted, scen.trade_cut)
    return traced, avail, layers.n


def run_pipeline(cfg: RunConfig) -> RunResult:
    scen = cfg.scenario
    with stage("inputs"):
        lifetimes = load_lifetimes(cfg.data["lifetimes"])
        ratios = read_ratios(cfg.data["ratios"])
        missing = [e for e in EQUIPMENT_CLASSES if e not in ratios]
        if missing:
            raise InputError(f"ratio file lacks classes {missing}")
        bom = read_bom(cfg.data["bom"])
        history = read_net_additions(cfg.data["history"])
        named = json.loads(cfg.data["trajectories"].read_text(encoding="utf-8"))
    with stage("demand"):
        schedule = project_demand(scen, history, lifetimes, ratios, named)
    with stage("sourcing"):
        traced, avail, n_layers = build_availability(cfg, list(schedule.years))
    weights = dict(cfg.weights) if cfg.weights else default_weights()
    problems, solutions = [], []
    with stage("allocation"):
        for j, y in enumerate(schedule.years):
            a = {m: float(avail.totals[i, j]) for i, m in enumerate(avail.materials)}
            prob = AllocationProblem(y, EQUIPMENT_CLASSES, schedule.total[:, j], a, bom, ratios, weights)
            problems.append(prob)
            solutions.append(solve_year(prob, mode=cfg.solve_mode))
    return RunResult(cfg, schedule, traced, avail, problems, solutions, bom, ratios, n_layers)


# ---------------------------------------------------------------- outputs


def summary(result: RunResult) -> dict:
    rep = gap_report(result.solutions, result.schedule)
    years = {}
    for sol in result.solutions:
        row = rep.lookup("all", sol.year)
        years[str(sol.year)] = {
            "total_demand_gva": round(row.total, 3),
            "produced_gva": round(row.produced, 3),
            "unmet_gva": round(row.unmet, 3),
            "gap_ratio": round(row.gap_ratio, 4),
            "transformer_unmet_gva": round(rep.lookup("transformer", sol.year).unmet, 3),
            "other_gse_unmet_gva": round(rep.lookup("other_gse", sol.year).unmet, 3),
            "bundle_level": round(sol.bundle, 6),
            "binding_materials": sorted(sol.binding_materials),
            "bottleneck_materials": sorted(sol.bottleneck_materials),
        }
    return {"scenario": result.config.scenario.name, "years": years}


def _availability_csv(avail: MaterialSourcing, traced: MaterialSourcing) -> str:
    rows = []
    for src, kind in ((traced, "traced"), (avail, "available")):
        sh = src.shares
        for i, m in enumerate(src.materials):
            for k, y in enumerate(src.years):
                for j, r in enumerate(src.regions):
                    rows.append((kind, m, y, r, fmt(src.mass[i, j, k], 3), fmt(sh[i, j, k], 6)))
    return render_csv(("kind", "material", "year", "region", "mass_kg", "share"), rows)


@dataclass
class RunManifest:
    scenario: str
    inputs: dict  # key -> {"path", "sha256"}
    parameters: dict
    output_dir: str
    outputs: dict  # file -> sha256
    tool_version: str = __version__

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"

    @classmethod
    def read(cls, path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / "manifest.json"
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
            m = cls(**d)
        except FileNotFoundError:
            raise DataError(f"{path}: no such manifest") from None
        except (json.JSONDecodeError, TypeError) as exc:
            raise DataError(f"{path}: malformed manifest ({exc})") from None
        # outputs sit next to the manifest even if the run directory moved
        m.output_dir = str(path.resolve().parent)
        return m


def write_outputs(result: RunResult, out_dir, dump_lp=None) -> RunManifest:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rep = gap_report(result.solutions, result.schedule)
    files = {
        "demand_schedule.csv": result.schedule.to_csv(),
        "gap_report.csv": rep.class_csv(),
        "gap_groups.csv": rep.group_csv(),
        "usage_ratios.csv": usage_csv(result.solutions),
        "sourcing_shares.csv": _availability_csv(result.availability, result.traced),
        "summary.json": json.dumps(summary(result), indent=2, sort_keys=True) + "\n",
    }
    digests = {}
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8", newline="")
        digests[name] = sha256_file(out / name)
    if dump_lp is not None:
        for prob in result.problems:
            dump_problem(prob, Path(dump_lp) / f"problem_{prob.year}.json")
    cfg = result.config
    inputs = {k: {"path": str(p), "sha256": sha256_file(p)} for k, p in sorted(cfg.data.items())}
    inputs["scenario"] = {"path": str(cfg.source), "sha256": sha256_file(cfg.source)} if cfg.source else None
    params = {
        "scenario": cfg.scenario.to_dict(),
        "lifetimes_file": inputs["lifetimes"]["sha256"],
        "ratios": result.ratios,
        "bom_file": inputs["bom"]["sha256"],
        "phi": cfg.phi,
        "layers_cap": cfg.layers,
        "layers_used": result.layer_count,
        "tol": cfg.tol,
        "weights": dict(cfg.weights) if cfg.weights else default_weights(),
        "solve_mode": cfg.solve_mode,
        "trade_cut": cfg.scenario.trade_cut,
    }
    manifest = RunManifest(cfg.scenario.name, inputs, params, str(out), digests)
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8", newline="")
    return manifest


def run_scenario(config_path, out_dir, bom_override=None, dump_lp=None) -> RunManifest:
    cfg = RunConfig.load(config_path, bom_override)
    result = run_pipeline(cfg)
    with stage("write"):
        return write_outputs(result, out_dir, dump_lp)


# ---------------------------------------------------------------- comparison


def _load_groups(out_dir: Path) -> dict[tuple[str, int], tuple[float, float, float]]:
    rows = read_rows(out_dir / "gap_groups.csv", ("group", "year", "produced_gva", "unmet_gva", "gap_ratio"))
    return {
        (r["group"], int(r["year"])): (float(r["produced_gva"]), float(r["unmet_gva"]), float(r["gap_ratio"]))
        for r in rows
    }


def _load_usage(out_dir: Path) -> dict[tuple[str, int], float]:
    rows = read_rows(out_dir / "usage_ratios.csv", ("material", "year", "usage_ratio", "binding"))
    return {(r["material"], int(r["year"])): float(r["usage_ratio"]) for r in rows}


def _load_classes(out_dir: Path) -> set:
    return {r["class"] for r in read_rows(out_dir / "gap_report.csv", ("class",))}


COMPARE_METRICS = (
    ("total_unmet_gva", "all", 1),
    ("total_unmet_pp", "all", 2),
    ("transformer_unmet_gva", "transformer", 1),
    ("transformer_unmet_pp", "transformer", 2),
    ("other_gse_unmet_gva", "other_gse", 1),
    ("other_gse_unmet_pp", "other_gse", 2),
)


def compare_scenarios(reference, variant, year: int | None = None) -> list[tuple[str, int, float]]:
    """Variant minus reference for the sensitivity metric set.

    Returns (metric, year, delta) rows for ``year`` (default: every shared
    year).  Percentage metrics are percentage-point changes.
    """
    ref_m = reference if isinstance(reference, RunManifest) else RunManifest.read(reference)
    var_m = variant if isinstance(variant, RunManifest) else RunManifest.read(variant)
    rdir, vdir = Path(ref_m.output_dir), Path(var_m.output_dir)
    if _load_classes(rdir) != _load_classes(vdir):
        raise DataError("reference and variant cover different equipment classes")
    rg, vg = _load_groups(rdir), _load_groups(vdir)
    ru, vu = _load_usage(rdir), _load_usage(vdir)
    years = sorted({y for _, y in rg})
    if years != sorted({y for _, y in vg}):
        raise DataError("reference and variant cover different years")
    if year is not None:
        if year not in years:
            raise DataError(f"year {year} not in runs ({years})")
        years = [year]
    out = []
    for y in years:
        for metric, group, col in COMPARE_METRICS:
            r, v = rg[(group, y)], vg[(group, y)]
            d = v[col] - r[col] if col == 1 else 100.0 * (v[col] - r[col])
            out.append((metric, y, d))
        for m in sorted({m for m, yy in ru if yy == y}):
            out.append((f"usage_{m}_pp", y, 100.0 * (vu.get((m, y), 0.0) - ru[(m, y)])))
    return out


def compare_csv(rows) -> str:
    return render_csv(("metric", "year", "delta"), [(m, y, fmt(d, 4)) for m, y, d in rows])
