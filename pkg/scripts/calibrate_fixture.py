"""Write the synthetic availability series bundled with the package.

The series is calibrated against the baseline-optimistic fixture run:

* copper is a fixed fraction of the unconstrained copper need each year,
  so it binds from the third projection year onward;
* every other material is set so that, given the copper-limited
  allocation, its usage ratio follows a target path (steel and nickel
  tighten steadily but stay below 1).

Because the non-copper targets are below 1, the copper-limited allocation
is also the allocation under the full series. The output is synthetic and
carries no source-data meaning.

    python scripts/calibrate_fixture.py [--check]
"""

from __future__ import annotations

import argparse
import json
import sys

from gse_supply.allocator import AllocationProblem, solve_year, usage_ratios
from gse_supply.bom import material_demand, read_bom
from gse_supply.classes import EQUIPMENT_CLASSES
from gse_supply.demand import load_scenario, project_demand
from gse_supply.scenario import fixture_path, read_ratios
from gse_supply.survival import load_lifetimes, read_net_additions
from gse_supply.tables import render_csv

COPPER_FRACTION = (1.30, 1.20, 0.86, 0.80, 0.75, 0.70)
TARGET = {
    "steel": (0.52, 0.62, 0.80, 0.86, 0.91, 0.94),
    "nickel": (0.45, 0.52, 0.70, 0.79, 0.84, 0.88),
    "aluminum": (0.40, 0.44, 0.55, 0.60, 0.64, 0.68),
    "manganese": (0.45, 0.50, 0.58, 0.63, 0.67, 0.71),
    "zinc": (0.30, 0.33, 0.38, 0.41, 0.44, 0.47),
    "silver": (0.28, 0.30, 0.34, 0.37, 0.40, 0.43),
}
# materials with no quantified use in the bundled BOM get a nominal stock
NOMINAL_KG = 1.0e6


def baseline():
    spec, _ = load_scenario(fixture_path("scenarios/baseline_opt.json"))
    schedule = project_demand(
        spec,
        read_net_additions(fixture_path("paper_params/history.csv")),
        load_lifetimes(fixture_path("paper_params/lifetimes.csv")),
        read_ratios(fixture_path("paper_params/ratios.json")),
        json.loads(fixture_path("paper_params/trajectories.json").read_text()),
    )
    return schedule, read_bom(fixture_path("paper_params/bom.csv")), read_ratios(fixture_path("paper_params/ratios.json"))


def calibrate() -> dict[str, dict[int, float]]:
    schedule, bom, ratios = baseline()
    need = material_demand(schedule, bom)
    cu = bom.materials.index("copper")
    out = {m: {} for m in bom.materials}
    for j, y in enumerate(schedule.years):
        copper = COPPER_FRACTION[j] * need[cu, j]
        loose = {"copper": copper}  # absent materials are unconstrained
        prob = AllocationProblem(y, EQUIPMENT_CLASSES, schedule.total[:, j], loose, bom, ratios)
        sol = solve_year(prob)
        used = material_demand(sol.produced, bom)[:, 0]
        for i, m in enumerate(bom.materials):
            if m == "copper":
                out[m][y] = round(copper, 3)
            elif used[i] > 0:
                out[m][y] = round(used[i] / TARGET.get(m, (0.35,) * 6)[j], 3)
            else:
                out[m][y] = NOMINAL_KG
    return out


def check(avail) -> None:
    schedule, bom, ratios = baseline()
    for j, y in enumerate(schedule.years):
        a = {m: avail[m][y] for m in bom.materials}
        prob = AllocationProblem(y, EQUIPMENT_CLASSES, schedule.total[:, j], a, bom, ratios)
        sol = solve_year(prob)
        u = usage_ratios(sol, prob).ratios
        gap = sol.unmet.sum() / schedule.total[:, j].sum()
        print(y, f"gap={gap:.3f}", " ".join(f"{m}={u[m]:.3f}" for m in ("copper", "steel", "nickel", "aluminum")))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true", help="print the resulting baseline usage path")
    args = ap.parse_args(argv)
    avail = calibrate()
    rows = [(m, y, repr(float(v))) for m in sorted(avail) for y, v in sorted(avail[m].items())]
    path = fixture_path("paper_params/availability.csv")
    path.write_text(render_csv(("material", "year", "available_kg"), rows), encoding="utf-8")
    print(f"wrote {path}", file=sys.stderr)
    if args.check:
        check(avail)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
