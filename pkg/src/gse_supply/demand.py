"""Scenario drivers -> annual GSE capacity requirements.

New deployment is the capacity-ratio mapping of each driver's yearly
increment, booked in the same year as the driver.  Replacement demand comes
from the cohort ledger run over history plus projected new deployment.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .classes import EQUIPMENT_CLASSES
from .errors import ConfigError, InputError
from .survival import LifetimeProfile, build_cohort_ledger, dense_series
from .tables import fmt, render_csv

DTR_FACTOR = 0.9
DTR_CLASSES = ("transformer", "dc_transformer")

# transformer multiplier = step-up 1.1 + transmission 2.25 + distribution 2.32
TRANSFORMER_STAGE_RATIOS = (1.1, 2.25, 2.32)


def default_ratios() -> dict[str, float]:
    return {
        "transformer": round(sum(TRANSFORMER_STAGE_RATIOS), 10),
        "spv_inverter": 1.34,
        "dfig_converter": 0.3,
        "pmsg_converter": 1.0,
        "battery_pcs": 1.0,
        "dc_transformer": 1.25,
        "dc_ups": 1.37,
        "ev_charger_pcs": 1.0,
    }


# which scenario driver feeds each class's new deployment
CLASS_DRIVER = {
    "transformer": "generation",
    "spv_inverter": "solar",
    "pmsg_converter": "wind",
    "dfig_converter": None,  # replacement only after the record ends
    "battery_pcs": "battery",
    "dc_transformer": "datacenter",
    "dc_ups": "datacenter",
    "ev_charger_pcs": "ev",
}


def reconstruct_datacenter_load(ref_year_load: float, ref_year: int = 2025, start_year: int = 2006) -> dict[int, float]:
    """Linear ramp from 0 at ``start_year`` to ``ref_year_load`` at ``ref_year``."""
    if ref_year <= start_year:
        raise ConfigError(f"reference year {ref_year} must follow start year {start_year}")
    if not ref_year_load > 0:
        raise ConfigError("reference data-center load must be positive")
    slope = ref_year_load / (ref_year - start_year)
    return {y: slope * (y - start_year) for y in range(start_year, ref_year + 1)}


def reconstruct_ev_stock(
    observed_2024: float,
    start_year: int = 2011,
    anchor_year: int = 2024,
    initial: float | None = None,
    initial_fraction: float = 1e-3,
) -> dict[int, float]:
    """Geometric stock path s0 * g**(y - start_year) with s(anchor_year) = observed.

    ``initial`` defaults to ``initial_fraction`` of the anchor value.
    """
    if not observed_2024 > 0:
        raise ConfigError("observed EV charger stock must be positive")
    if anchor_year <= start_year:
        raise ConfigError("anchor year must follow start year")
    s0 = observed_2024 * initial_fraction if initial is None else initial
    if not s0 > 0:
        raise ConfigError("initial EV stock must be positive")
    g = (observed_2024 / s0) ** (1.0 / (anchor_year - start_year))
    out = {y: s0 * g ** (y - start_year) for y in range(start_year, anchor_year + 1)}
    out[anchor_year] = float(observed_2024)
    return out


def increments(levels: Mapping[int, float], first_from_zero: bool = True) -> dict[int, float]:
    """Year-on-year increases of a level series (negative steps clipped to 0)."""
    years = sorted(levels)
    out = {}
    prev = 0.0 if first_from_zero else None
    for y in years:
        if prev is not None:
            out[y] = max(levels[y] - prev, 0.0)
        prev = levels[y]
    return out


@dataclass
class ScenarioSpec:
    name: str
    demand_growth_rate: float
    datacenter_trajectory: object = "medium"  # {year: GW} or a named case
    ev_trajectory: object = "mid"
    lifetime_case: str = "optimistic"
    dtr_enabled: bool = False
    trade_disruption_enabled: bool = False
    generation_base_gw: float = 1300.0
    base_year: int = 2024
    years: tuple = (2025, 2030)
    generation_mix: dict = field(default_factory=lambda: {"solar": 0.45, "wind": 0.2, "battery": 0.2})
    restricted_regions: tuple = ()
    trade_cut: float = 0.7

    def __post_init__(self):
        if not 0 <= self.demand_growth_rate <= 0.2:
            raise ConfigError(f"demand growth rate must lie in [0, 0.2], got {self.demand_growth_rate}")
        if self.lifetime_case not in ("optimistic", "pessimistic"):
            raise ConfigError(f"unknown lifetime case {self.lifetime_case!r}")
        if not self.generation_base_gw >= 0:
            raise ConfigError("generation base must be nonnegative")
        self.years = tuple(int(y) for y in self.years)
        if len(self.years) != 2 or self.years[0] > self.years[1] or self.years[0] <= self.base_year:
            raise ConfigError(f"years must be [first, last] after the base year, got {self.years}")
        for k, v in self.generation_mix.items():
            if not v >= 0:
                raise ConfigError(f"generation mix share {k} must be nonnegative")
        if not 0 <= self.trade_cut <= 1:
            raise ConfigError("trade cut must lie in [0, 1]")
        self.restricted_regions = tuple(self.restricted_regions)

    @property
    def projection_years(self) -> list[int]:
        return list(range(self.years[0], self.years[1] + 1))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["years"] = list(self.years)
        d["restricted_regions"] = list(self.restricted_regions)
        return d


SCENARIO_KEYS = {f for f in ScenarioSpec.__dataclass_fields__}


def scenario_from_dict(d: Mapping) -> ScenarioSpec:
    unknown = set(d) - SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys {sorted(unknown)}")
    try:
        return ScenarioSpec(**d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _trajectory(value, named: Mapping[str, Mapping], what: str) -> dict[int, float]:
    if isinstance(value, str):
        try:
            value = named[value]
        except KeyError:
            raise ConfigError(f"unknown {what} case {value!r}; known: {sorted(named)}") from None
    try:
        traj = {int(y): float(v) for y, v in value.items()}
    except (AttributeError, ValueError, TypeError):
        raise ConfigError(f"{what} trajectory must map year -> value") from None
    if any(v < 0 or not math.isfinite(v) for v in traj.values()):
        raise ConfigError(f"{what} trajectory must be nonnegative")
    return traj


def driver_increments(scenario: ScenarioSpec, named: Mapping[str, Mapping] | None = None) -> dict[str, dict[int, float]]:
    """Yearly driver additions (GW) over the projection years.

    Generation grows at the scenario's compound rate from the base-year
    installed capacity; solar/wind/battery take fixed shares of that
    increment.  Data-center and EV drivers are differenced level series
    whose base-year value must be present.
    """
    named = named or {}
    years = scenario.projection_years
    g, G0, y0 = scenario.demand_growth_rate, scenario.generation_base_gw, scenario.base_year
    gen = {y: G0 * ((1 + g) ** (y - y0) - (1 + g) ** (y - 1 - y0)) for y in years}
    out = {"generation": gen}
    for tech in ("solar", "wind", "battery"):
        share = scenario.generation_mix.get(tech, 0.0)
        out[tech] = {y: share * gen[y] for y in years}
    for key, value in (("datacenter", scenario.datacenter_trajectory), ("ev", scenario.ev_trajectory)):
        traj = _trajectory(value, named.get(key, {}), key)
        needed = [scenario.base_year, *years]
        missing = [y for y in needed if y not in traj]
        if missing:
            raise ConfigError(f"{key} trajectory lacks years {missing}")
        out[key] = {y: max(traj[y] - traj[y - 1], 0.0) for y in years}
    return out


@dataclass(frozen=True)
class DemandSchedule:
    """Required capacity D[e, y] in GVA, split into new and replacement."""

    classes: tuple
    years: tuple
    new: np.ndarray  # (class, year)
    replacement: np.ndarray

    def __post_init__(self):
        if self.new.shape != (len(self.classes), len(self.years)) or self.replacement.shape != self.new.shape:
            raise InputError("demand schedule arrays do not match class/year axes")
        if np.any(self.new < 0) or np.any(self.replacement < 0):
            raise InputError("demand components must be nonnegative")

    @property
    def total(self) -> np.ndarray:
        return self.new + self.replacement

    def row(self, equipment_class: str) -> np.ndarray:
        return self.total[self.classes.index(equipment_class)]

    def column(self, year: int) -> dict[str, float]:
        j = self.years.index(year)
        return {e: float(self.total[i, j]) for i, e in enumerate(self.classes)}

    def to_csv(self) -> str:
        rows = []
        for i, e in enumerate(self.classes):
            for j, y in enumerate(self.years):
                n, r = self.new[i, j], self.replacement[i, j]
                rows.append((e, y, fmt(n, 3), fmt(r, 3), fmt(n + r, 3)))
        return render_csv(("class", "year", "new_gva", "replacement_gva", "total_gva"), rows)


def project_demand(
    scenario: ScenarioSpec,
    history: Mapping[str, Mapping[int, float]],
    lifetimes: Mapping[str, LifetimeProfile],
    ratios: Mapping[str, float] | None = None,
    named_trajectories: Mapping[str, Mapping] | None = None,
    drivers: Mapping[str, Mapping[int, float]] | None = None,
) -> DemandSchedule:
    """Build D[e, y] = new + replacement for the scenario's projection years.

    ``history`` holds per-class GSE net additions (GVA) up to the base year.
    ``drivers`` overrides the scenario-derived driver increments.
    """
    ratios = dict(default_ratios() if ratios is None else ratios)
    years = scenario.projection_years
    if drivers is None:
        drivers = driver_increments(scenario, named_trajectories)
    missing = [e for e in EQUIPMENT_CLASSES if e not in history or not history[e]]
    if missing:
        raise InputError(f"history lacks equipment classes {missing}")
    late = [e for e in EQUIPMENT_CLASSES if max(history[e]) > scenario.base_year]
    if late:
        raise InputError(f"history extends past base year {scenario.base_year} for {late}")

    new = np.zeros((len(EQUIPMENT_CLASSES), len(years)))
    repl = np.zeros_like(new)
    for i, e in enumerate(EQUIPMENT_CLASSES):
        driver = CLASS_DRIVER[e]
        if driver is not None:
            new[i] = [ratios[e] * drivers[driver].get(y, 0.0) for y in years]
        series = dict(history[e])
        for j, y in enumerate(years):
            series[y] = new[i, j]
        start, C = dense_series(series, years[-1])
        ledger = build_cohort_ledger(C, lifetimes[e].for_case(scenario.lifetime_case), start)
        off = years[0] - start
        # clip float noise so D stays nonnegative
        repl[i] = np.maximum(ledger.replacement[off : off + len(years)], 0.0)
        if scenario.dtr_enabled and e in DTR_CLASSES:
            new[i] *= DTR_FACTOR
            repl[i] *= DTR_FACTOR
    return DemandSchedule(EQUIPMENT_CLASSES, tuple(years), new, repl)


def load_scenario(path: str | Path) -> tuple[ScenarioSpec, dict]:
    """Read a scenario JSON. Returns the ScenarioSpec plus the non-scenario keys (data paths etc.)."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such scenario file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: scenario must be a JSON object")
    extra = {k: raw[k] for k in raw if k not in SCENARIO_KEYS}
    spec = scenario_from_dict({k: v for k, v in raw.items() if k in SCENARIO_KEYS})
    return spec, extra


def with_dtr(scenario: ScenarioSpec, enabled: bool = True) -> ScenarioSpec:
    return replace(scenario, dtr_enabled=enabled)
