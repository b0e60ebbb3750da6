"""Regenerate the synthetic desk-scale fixtures shipped with the package.

Everything here is synthetic: net-addition histories, driver trajectories
and the 3-region x 8-product x 6-industry supply-use system.  Parameter
files (lifetimes, ratios, BOM) are written from the package defaults.

    python scripts/make_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from gse_supply.demand import default_ratios, increments, reconstruct_datacenter_load, reconstruct_ev_stock
from gse_supply.mrsut import SupplyUseSystem, system_to_triplets
from gse_supply.survival import default_lifetimes, lifetimes_csv
from gse_supply.tables import render_csv

ROOT = Path(__file__).resolve().parents[1] / "src" / "gse_supply" / "fixtures"
PARAMS = ROOT / "paper_params"
MRSUT = ROOT / "mrsut_3r"

REGIONS = ["USA", "NAFTA", "ROW"]
PRODUCTS = [
    "electrical_machinery", "iron_steel", "copper", "aluminium",
    "nickel", "other_nonferrous", "nonmetallic_minerals", "services",
]
INDUSTRIES = ["electrical_mfg", "basic_iron_steel", "copper_mfg", "aluminium_mfg", "other_metals", "other"]
# primary product(s) of each industry, secondary output share
PRIMARY = {
    "electrical_mfg": ["electrical_machinery"],
    "basic_iron_steel": ["iron_steel"],
    "copper_mfg": ["copper"],
    "aluminium_mfg": ["aluminium"],
    "other_metals": ["nickel", "other_nonferrous"],
    "other": ["nonmetallic_minerals", "services"],
}


def history() -> dict[str, dict[int, float]]:
    ratios = default_ratios()
    years = np.arange(1950, 2025)
    gen = np.interp(years, [1950, 1970, 1985, 2000, 2010, 2024], [6.0, 18.0, 12.0, 22.0, 25.0, 32.0])
    solar = np.where(years >= 2008, 0.4 * 1.33 ** (years - 2008), 0.0)
    wind = np.interp(years, [1999, 2000, 2008, 2012, 2024], [0.0, 0.5, 8.0, 12.0, 9.0])
    dfig_share = np.interp(years, [2000, 2012, 2024], [0.9, 0.6, 0.25])
    battery = np.where(years >= 2015, 0.3 * 1.45 ** (years - 2015), 0.0)
    out = {
        "transformer": ratios["transformer"] * gen,
        "spv_inverter": ratios["spv_inverter"] * solar,
        "dfig_converter": ratios["dfig_converter"] * wind * dfig_share,
        "pmsg_converter": ratios["pmsg_converter"] * wind * (1 - dfig_share),
        "battery_pcs": ratios["battery_pcs"] * battery,
    }
    hist = {e: {int(y): round(float(v), 6) for y, v in zip(years, s) if v > 0} for e, s in out.items()}
    dc = increments(reconstruct_datacenter_load(19.0, 2025, 2006))
    for e in ("dc_transformer", "dc_ups"):
        hist[e] = {y: round(ratios[e] * v, 6) for y, v in dc.items() if y <= 2024 and v > 0}
    ev = increments(reconstruct_ev_stock(6.0, 2011))
    hist["ev_charger_pcs"] = {y: round(ratios["ev_charger_pcs"] * v, 6) for y, v in ev.items() if v > 0}
    return hist


def trajectories() -> dict:
    ramp = reconstruct_datacenter_load(19.0, 2025, 2006)
    years = list(range(2024, 2031))

    def path(start, end, years):
        # geometric path between the two end values
        n = len(years) - 1
        return {str(y): round(start * (end / start) ** (i / n), 6) for i, y in enumerate(years)}

    dc_medium = {"2024": round(ramp[2024], 6), **path(19.0, 42.0, years[1:])}
    dc_high = {"2024": round(ramp[2024], 6), **path(19.0, 56.0, years[1:])}
    return {
        "datacenter": {"medium": dc_medium, "high": dc_high},
        "ev": {"mid": path(6.0, 21.0, years), "high": path(6.0, 27.0, years)},
        "_note": "synthetic desk-scale trajectories (GW); not source data",
    }


def supply_use(seed: int = 20240101) -> SupplyUseSystem:
    rng = np.random.default_rng(seed)
    R, P, I = len(REGIONS), len(PRODUCTS), len(INDUSTRIES)
    products = [f"{r}:{p}" for r in REGIONS for p in PRODUCTS]
    industries = [f"{r}:{i}" for r in REGIONS for i in INDUSTRIES]
    size = {"USA": 1.0, "NAFTA": 0.35, "ROW": 2.5}
    V = np.zeros((R * P, R * I))
    for ri, r in enumerate(REGIONS):
        for ii, ind in enumerate(INDUSTRIES):
            j = ri * I + ii
            out = size[r] * 1000.0 * (0.6 + rng.random())
            prim = PRIMARY[ind]
            for k, p in enumerate(prim):
                V[ri * P + PRODUCTS.index(p), j] = out * (0.9 / len(prim))
            # secondary output of a neighbouring product
            sec = PRODUCTS[(PRODUCTS.index(prim[0]) + 1) % P]
            V[ri * P + PRODUCTS.index(sec), j] += out * 0.1
    g = V.sum(axis=0)
    # input recipes: what each industry buys per unit output, by product
    recipe = {
        "electrical_mfg": {"iron_steel": 0.12, "copper": 0.10, "aluminium": 0.05, "nickel": 0.01,
                           "other_nonferrous": 0.02, "nonmetallic_minerals": 0.02, "services": 0.18,
                           "electrical_machinery": 0.05},
        "basic_iron_steel": {"nonmetallic_minerals": 0.1, "other_nonferrous": 0.02, "services": 0.2, "iron_steel": 0.1},
        "copper_mfg": {"services": 0.25, "copper": 0.08, "nonmetallic_minerals": 0.05},
        "aluminium_mfg": {"services": 0.25, "aluminium": 0.08, "nonmetallic_minerals": 0.05},
        "other_metals": {"services": 0.25, "nonmetallic_minerals": 0.06, "nickel": 0.03},
        "other": {"services": 0.2, "electrical_machinery": 0.03, "iron_steel": 0.02},
    }
    # regional sourcing of each product group (rows: buyer region)
    src = {
        "USA": {"USA": 0.62, "NAFTA": 0.18, "ROW": 0.20},
        "NAFTA": {"USA": 0.25, "NAFTA": 0.55, "ROW": 0.20},
        "ROW": {"USA": 0.05, "NAFTA": 0.03, "ROW": 0.92},
    }
    tilt = {"nickel": {"NAFTA": 0.15, "ROW": 0.2}, "other_nonferrous": {"NAFTA": 0.2, "ROW": 0.1}}
    U = np.zeros_like(V)
    for ri, r in enumerate(REGIONS):
        for ii, ind in enumerate(INDUSTRIES):
            j = ri * I + ii
            for p, coef in recipe[ind].items():
                shares = dict(src[r])
                for s_r, extra in tilt.get(p, {}).items():
                    shares[s_r] += extra
                tot = sum(shares.values())
                noise = 0.9 + 0.2 * rng.random()
                for si, s in enumerate(REGIONS):
                    U[si * P + PRODUCTS.index(p), j] = g[j] * coef * noise * shares[s] / tot
    return SupplyUseSystem(U, V, tuple(products), tuple(industries))


def main() -> None:
    PARAMS.mkdir(parents=True, exist_ok=True)
    MRSUT.mkdir(parents=True, exist_ok=True)
    (PARAMS / "lifetimes.csv").write_text(lifetimes_csv(default_lifetimes()), encoding="utf-8")
    (PARAMS / "ratios.json").write_text(json.dumps(default_ratios(), indent=2, sort_keys=True) + "\n")
    rows = [(e, y, repr(v)) for e, s in sorted(history().items()) for y, v in sorted(s.items())]
    (PARAMS / "history.csv").write_text(render_csv(("equipment_class", "year", "net_addition_gva"), rows))
    (PARAMS / "trajectories.json").write_text(json.dumps(trajectories(), indent=2) + "\n")

    sut = supply_use()
    use_csv, supply_csv = system_to_triplets(sut)
    (MRSUT / "use.csv").write_text(use_csv)
    (MRSUT / "supply.csv").write_text(supply_csv)
    manifest = {
        "regions": REGIONS, "products": PRODUCTS, "industries": INDUSTRIES,
        "use": "use.csv", "supply": "supply.csv",
        "parent_product": "electrical_machinery",
        "restricted_regions": ["ROW"],
        "_note": "synthetic 3-region x 8-product x 6-industry system (monetary units: M$)",
    }
    (MRSUT / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    conc = [
        ("iron_steel", "steel", 1.0), ("copper", "copper", 1.0), ("aluminium", "aluminum", 1.0),
        ("nickel", "nickel", 1.0), ("other_nonferrous", "zinc", 0.4), ("other_nonferrous", "tin", 0.15),
        ("other_nonferrous", "silver", 0.05), ("other_nonferrous", "manganese", 0.25),
        ("other_nonferrous", "magnesium", 0.15), ("nonmetallic_minerals", "silicon", 0.3),
    ]
    (MRSUT / "concordance.csv").write_text(render_csv(("product_group", "material", "share"), conc))
    factors = [
        ("steel", 1.1e6), ("copper", 1.05e5), ("aluminum", 4.2e5), ("nickel", 5.5e4), ("zinc", 3.6e5),
        ("tin", 3.5e4), ("silver", 1.2e3), ("manganese", 5.0e5), ("magnesium", 3.0e5), ("silicon", 4.0e5),
    ]
    (MRSUT / "mass_factors.csv").write_text(render_csv(("material", "kg_per_unit_value"), factors))
    fd = []
    for y in range(2018, 2025):
        t = y - 2018
        fd.append((y, "USA:electrical_machinery", round(1.0e4 * 1.04 ** t, 3)))
        fd.append((y, "NAFTA:electrical_machinery", round(1.5e3 * 1.09 ** t, 3)))
        fd.append((y, "ROW:electrical_machinery", round(2.0e3 * 1.02 ** t, 3)))
    (MRSUT / "final_demand.csv").write_text(render_csv(("year", "product", "value"), fd))


if __name__ == "__main__":
    main()
