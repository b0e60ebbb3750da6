import csv
import io
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from gse_supply import cli
from gse_supply.bom import read_bom
from gse_supply.classes import EQUIPMENT_CLASSES
from gse_supply.errors import ConfigError, DataError, InputError, SolverError
from gse_supply.scenario import (
    RunConfig, RunManifest, bundled_scenario, compare_scenarios, fixture_path, run_pipeline, run_scenario,
)

YEARS = (2025, 2026, 2027, 2028, 2029, 2030)


def read_csv(path):
    return list(csv.DictReader(io.StringIO(Path(path).read_text())))


@pytest.fixture(scope="module")
def outdirs(tmp_path_factory):
    """Run each bundled scenario once to disk."""
    root = tmp_path_factory.mktemp("runs")
    cache = {}

    def get(name):
        if name not in cache:
            run_scenario(bundled_scenario(name), root / name)
            cache[name] = root / name
        return cache[name]

    return get


def deltas(rows, year):
    return {m: d for m, y, d in rows if y == year}


# ---------------------------------------------------------------- pipeline


def test_schedule_shape(runs):
    r = runs("baseline_opt")
    assert r.schedule.classes == EQUIPMENT_CLASSES
    assert r.years == YEARS
    assert r.schedule.total.shape == (8, 6)
    assert [p.year for p in r.problems] == list(YEARS)
    assert r.layer_count >= 1


def test_runs_are_byte_identical(tmp_path):
    a = run_scenario(bundled_scenario("baseline_opt"), tmp_path / "a")
    b = run_scenario(bundled_scenario("baseline_opt"), tmp_path / "b")
    assert a.outputs == b.outputs
    for name in a.outputs:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_high_growth_never_below_baseline(runs):
    for case in ("opt", "pess"):
        base, high = runs(f"baseline_{case}"), runs(f"high_{case}")
        assert np.all(high.schedule.total.sum(axis=0) >= base.schedule.total.sum(axis=0))
        for sb, sh in zip(base.solutions, high.solutions):
            assert sh.unmet.sum() >= sb.unmet.sum() - 1e-9


def test_pipeline_conservation(outdirs, runs):
    d = outdirs("high_opt")
    groups = {(r["group"], int(r["year"])): r for r in read_csv(d / "gap_groups.csv")}
    sched = runs("high_opt").schedule
    for j, y in enumerate(YEARS):
        row = groups[("all", y)]
        total = float(row["produced_gva"]) + float(row["unmet_gva"])
        # three-decimal rounding on two columns
        assert total == pytest.approx(sched.total[:, j].sum(), abs=2e-3)
    shares = {}
    for r in read_csv(d / "sourcing_shares.csv"):
        key = (r["kind"], r["material"], r["year"])
        shares[key] = shares.get(key, 0.0) + float(r["share"])
    for key, s in shares.items():
        assert s == pytest.approx(1.0, abs=1e-5) or s == 0.0, key


def test_calibrated_baseline_profile(runs):
    """Frozen gap path of the bundled baseline; copper binds from the third year."""
    r = runs("baseline_opt")
    gaps = [s.unmet.sum() / r.schedule.total[:, j].sum() for j, s in enumerate(r.solutions)]
    np.testing.assert_allclose(gaps, [0, 0, 0.046, 0.064, 0.080, 0.157], atol=1e-3)
    for j, s in enumerate(r.solutions):
        assert ("copper" in s.binding_materials) == (j >= 2)
    assert r.solutions[-1].usage["steel"] > 0.9


# ---------------------------------------------------------------- sensitivities


def test_trade_run_changes_only_supply(outdirs, runs):
    ref, var = outdirs("high_opt"), outdirs("high_opt_trade")
    assert (ref / "demand_schedule.csv").read_bytes() == (var / "demand_schedule.csv").read_bytes()
    a, b = runs("high_opt").availability, runs("high_opt_trade").availability
    k = a.regions.index("ROW")
    np.testing.assert_allclose(b.mass[:, k, :], 0.3 * a.mass[:, k, :], rtol=1e-12)
    keep = [i for i in range(len(a.regions)) if i != k]
    np.testing.assert_allclose(b.mass[:, keep, :], a.mass[:, keep, :], rtol=1e-12)
    d = deltas(compare_scenarios(ref, var), 2030)
    assert d["total_unmet_gva"] > 0 and d["transformer_unmet_gva"] > 0


def test_dtr_relieves_transformers(outdirs, runs):
    ref, var = outdirs("high_opt"), outdirs("high_opt_dtr")
    i = EQUIPMENT_CLASSES.index("transformer")
    np.testing.assert_allclose(runs("high_opt_dtr").schedule.total[i], 0.9 * runs("high_opt").schedule.total[i])
    d = deltas(compare_scenarios(ref, var), 2030)
    assert d["transformer_unmet_gva"] < 0
    base_other = runs("high_opt").solutions[-1].unmet[1:].sum()
    assert abs(d["other_gse_unmet_gva"]) <= 0.05 * base_other


def test_self_comparison_is_zero(outdirs, tmp_path):
    d = outdirs("baseline_opt")
    rows = compare_scenarios(d, d)
    assert rows and all(delta == 0.0 for _, _, delta in rows)
    # a moved run directory still resolves its own outputs
    moved = tmp_path / "moved"
    shutil.copytree(d, moved)
    assert compare_scenarios(moved, d) == rows


def test_compare_rejects_mismatched_runs(outdirs, tmp_path):
    d = outdirs("baseline_opt")
    with pytest.raises(DataError):
        compare_scenarios(d, d, year=2040)
    short = tmp_path / "short"
    shutil.copytree(d, short)
    rows = [r for r in (short / "gap_groups.csv").read_text().splitlines() if ",2030," not in r]
    (short / "gap_groups.csv").write_text("\n".join(rows) + "\n")
    with pytest.raises(DataError):
        compare_scenarios(d, short)
    with pytest.raises(DataError):
        compare_scenarios(d, tmp_path / "nowhere")


# ---------------------------------------------------------------- configuration


def write_scenario(tmp_path, **extra):
    doc = json.loads(bundled_scenario("baseline_opt").read_text())
    doc.update(extra)
    path = tmp_path / "scen.json"
    path.write_text(json.dumps(doc))
    return path


def test_config_rejects_bad_input(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(write_scenario(tmp_path, colour="blue"))
    with pytest.raises(ConfigError):
        RunConfig.load(write_scenario(tmp_path, data={"prices": "p.csv"}))
    with pytest.raises(ConfigError):
        RunConfig.load(write_scenario(tmp_path, data={"bom": "missing.csv"}))
    with pytest.raises(ConfigError):
        RunConfig.load(write_scenario(tmp_path, phi=0.0))
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "no_such_scenario.json")


def test_data_paths_resolve_next_to_scenario(tmp_path):
    shutil.copy(fixture_path("paper_params/bom.csv"), tmp_path / "my_bom.csv")
    cfg = RunConfig.load(write_scenario(tmp_path, data={"bom": "my_bom.csv"}))
    assert cfg.data["bom"] == (tmp_path / "my_bom.csv").resolve()
    assert RunConfig.load("high_opt").scenario.name == "high_opt"


def test_trade_without_regions_is_config_error(tmp_path):
    mr = tmp_path / "mr"
    shutil.copytree(fixture_path("mrsut_3r"), mr)
    man = json.loads((mr / "manifest.json").read_text())
    del man["restricted_regions"]
    (mr / "manifest.json").write_text(json.dumps(man))
    path = write_scenario(tmp_path, trade_disruption_enabled=True, data={"mrsut": "mr/manifest.json"})
    with pytest.raises(ConfigError):
        run_pipeline(RunConfig.load(path))


def test_negative_availability_is_data_error(tmp_path):
    bad = tmp_path / "avail.csv"
    bad.write_text("material,year,available_kg\ncopper,2025,-1\n")
    with pytest.raises(InputError):
        run_pipeline(RunConfig.load(write_scenario(tmp_path, data={"availability": "avail.csv"})))


# ---------------------------------------------------------------- command line


def test_cli_run_and_exit_codes(tmp_path, capsys, monkeypatch):
    out = tmp_path / "out"
    assert cli.main(["run", "--scenario", "baseline_opt", "--out", str(out)]) == 0
    assert RunManifest.read(out).scenario == "baseline_opt"
    # another scenario may not overwrite these outputs
    assert cli.main(["run", "--scenario", "high_opt", "--out", str(out)]) == 2
    assert cli.main(["run", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x")]) == 2
    bad = tmp_path / "avail.csv"
    bad.write_text("material,year,available_kg\ncopper,2025,oops\n")
    scen = write_scenario(tmp_path, data={"availability": "avail.csv"})
    assert cli.main(["run", "--scenario", str(scen), "--out", str(tmp_path / "y")]) == 3

    def fail(*a, **k):
        raise SolverError("forced")

    monkeypatch.setattr("gse_supply.scenario.solve_year", fail)
    assert cli.main(["run", "--scenario", "baseline_opt", "--out", str(tmp_path / "z")]) == 4
    assert "forced" in capsys.readouterr().err


def test_cli_compare(outdirs, tmp_path, capsys):
    dest = tmp_path / "cmp.csv"
    assert cli.main(["compare", str(outdirs("high_opt")), str(outdirs("high_opt_dtr")), "--year", "2030",
                     "--out", str(dest)]) == 0
    rows = {r["metric"]: float(r["delta"]) for r in read_csv(dest)}
    assert rows["transformer_unmet_gva"] < 0
    assert set(r["year"] for r in read_csv(dest)) == {"2030"}


def test_cli_dump_and_solve_lp(outdirs, tmp_path):
    lp = tmp_path / "lp"
    assert cli.main(["dump-lp", "--scenario", "baseline_opt", "--out", str(lp)]) == 0
    files = sorted(str(p) for p in lp.glob("problem_*.json"))
    assert len(files) == 6
    res, use = tmp_path / "res.csv", tmp_path / "use.csv"
    assert cli.main(["solve-lp", *files, "--out", str(res), "--usage-out", str(use)]) == 0
    assert res.read_text() == (outdirs("baseline_opt") / "gap_report.csv").read_text()
    assert use.read_text() == (outdirs("baseline_opt") / "usage_ratios.csv").read_text()


def test_cli_dumps_and_trace(tmp_path, capsys):
    assert cli.main(["--dump-lifetimes"]) == 0
    assert capsys.readouterr().out == fixture_path("paper_params/lifetimes.csv").read_text()
    dumped = tmp_path / "bom.csv"
    assert cli.main(["dump-bom", "--out", str(dumped)]) == 0
    a, b = read_bom(dumped), read_bom(fixture_path("paper_params/bom.csv"))
    assert set(a.materials) == set(b.materials) and set(a.classes) == set(b.classes)
    for m in a.materials:
        for e in a.classes:
            assert a.coefficient(m, e) == b.coefficient(m, e)
    dest = tmp_path / "trace.csv"
    assert cli.main(["trace", "--out", str(dest)]) == 0
    err = capsys.readouterr().err
    assert "spectral_radius=" in err and "layers=" in err
    assert dest.read_text().startswith("material,")
    assert cli.main(["trace", "--phi", "1.5"]) == 2
    assert cli.main([]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
