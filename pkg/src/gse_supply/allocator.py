"""Lexicographic allocation of yearly material availability across GSE classes.

Per year, over classes e and materials m::

    level 1   max S
    level 2   max sum_e w_e V_e     with S held at its level-1 optimum
    s.t.      sum_e B[m,e] P_e * 1000 <= A_m           (kg)
              P_e + U_e = D_e
              V_e = P_e / rho_e
              S <= V_e                 for every e with D_e > 0
              V_e <= V_ref             for every e != ref
              P, U, V, S >= 0

Years are not coupled, so a horizon is solved year by year.  A single
big-M objective (M S + sum w V) is available for cross-checking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .bom import MVA_PER_GVA, BomMatrix
from .classes import EQUIPMENT_CLASSES, LAYER_ORDER, REFERENCE_CLASS, REPORT_GROUPS, layer_of
from .errors import ConfigError, InputError, SolverError
from .tables import fmt, render_csv

LAYER_WEIGHTS = {"grid": 1e4, "generation": 1e2, "consumption": 1.0}
LEX_RTOL = 1e-8
GAP_RTOL = 1e-7
TIEBREAK = 1e-9
BIG_M = 1e9
# below these the LP is numerically meaningless: 1 kVA of demand, 1 mg of material
DEMAND_FLOOR = 1e-6
AVAIL_FLOOR_KG = 1e-6
BOTTLENECK = 0.5
BINDING_TOL = 1e-6
CONTRACT_TOL = 1e-9

_HIGHS = {
    "presolve": True,
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


def default_weights(classes: Sequence[str] = EQUIPMENT_CLASSES) -> dict[str, float]:
    return {e: LAYER_WEIGHTS[layer_of(e)] for e in classes}


@dataclass(frozen=True)
class AllocationProblem:
    year: int
    classes: tuple
    demand: np.ndarray  # GVA per class
    availability: Mapping[str, float]  # kg per material, summed over regions
    bom: BomMatrix
    ratios: Mapping[str, float]
    weights: Mapping[str, float] = None
    reference: str = REFERENCE_CLASS

    def __post_init__(self):
        D = np.asarray(self.demand, dtype=float)
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "demand", D)
        if D.shape != (len(self.classes),):
            raise InputError("demand must have one entry per class")
        if np.any(~np.isfinite(D)) or np.any(D < 0):
            raise InputError("demand must be finite and nonnegative")
        if self.reference not in self.classes:
            raise InputError(f"reference class {self.reference!r} not among classes")
        for e in self.classes:
            if e not in self.bom.classes:
                raise InputError(f"class {e!r} missing from BOM")
            r = self.ratios.get(e)
            if r is None or not r > 0:
                raise InputError(f"capacity ratio for {e!r} must be positive")
        for m, a in self.availability.items():
            if m not in self.bom.materials:
                raise InputError(f"unknown material {m!r}")
            if math.isnan(a) or a < 0:
                raise InputError(f"availability for {m!r} must be nonnegative")
        if self.weights is None:
            object.__setattr__(self, "weights", default_weights(self.classes))
        w = self.weights
        for e in self.classes:
            if not w.get(e, 0) > 0:
                raise ConfigError(f"weight for {e!r} must be positive")
        by_layer = {}
        for e in self.classes:
            by_layer.setdefault(layer_of(e), []).append(w[e])
        present = [l for l in LAYER_ORDER if l in by_layer]
        for hi, lo in zip(present, present[1:]):
            if not min(by_layer[hi]) > max(by_layer[lo]):
                raise ConfigError(f"weights must be strictly ordered by layer ({hi} > {lo})")

    @property
    def rho(self) -> np.ndarray:
        return np.array([self.ratios[e] for e in self.classes], dtype=float)

    def bom_block(self) -> tuple[tuple, np.ndarray]:
        """(materials, kg/MVA matrix restricted to this problem's classes)."""
        cols = [self.bom.classes.index(e) for e in self.classes]
        return self.bom.materials, self.bom.coefficients[:, cols]

    def to_dict(self) -> dict:
        mats, B = self.bom_block()
        return {
            "year": self.year,
            "classes": list(self.classes),
            "demand_gva": [float(v) for v in self.demand],
            "availability_kg": {m: float(v) for m, v in sorted(self.availability.items())},
            "bom_kg_per_mva": {m: [float(v) for v in B[i]] for i, m in enumerate(mats)},
            "ratios": {e: float(self.ratios[e]) for e in self.classes},
            "weights": {e: float(self.weights[e]) for e in self.classes},
            "reference": self.reference,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AllocationProblem":
        try:
            classes = tuple(d["classes"])
            mats = tuple(d["bom_kg_per_mva"])
            coef = np.array([d["bom_kg_per_mva"][m] for m in mats], dtype=float).reshape(len(mats), len(classes))
            return cls(
                year=int(d["year"]),
                classes=classes,
                demand=np.array(d["demand_gva"], dtype=float),
                availability={m: float(v) for m, v in d["availability_kg"].items()},
                bom=BomMatrix(mats, classes, coef),
                ratios=dict(d["ratios"]),
                weights=dict(d["weights"]),
                reference=d.get("reference", REFERENCE_CLASS),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed allocation problem: {exc}") from None


def dump_problem(problem: AllocationProblem, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(problem.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_problem(path) -> AllocationProblem:
    try:
        return AllocationProblem.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except FileNotFoundError:
        raise InputError(f"{path}: no such problem file") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


@dataclass(frozen=True)
class AllocationSolution:
    year: int
    classes: tuple
    produced: np.ndarray  # P, GVA
    unmet: np.ndarray  # U, GVA
    normalized: np.ndarray  # V = P / rho
    bundle: float  # S
    usage: dict  # material -> consumed / available
    binding_materials: frozenset
    bottleneck_materials: frozenset
    weighted_deployment: float
    duality_gaps: tuple = ()
    mode: str = "two_phase"
    unavailable_materials: frozenset = frozenset()

    def value(self, equipment_class: str) -> tuple[float, float]:
        i = self.classes.index(equipment_class)
        return float(self.produced[i]), float(self.unmet[i])


@dataclass(frozen=True)
class MaterialUsage:
    ratios: dict
    bottleneck: frozenset  # usage > 0.5
    binding: frozenset  # usage >= 1 - 1e-6
    unavailable: frozenset  # A_m = 0 (ratio reported as 0)


def usage_ratios(produced, problem: AllocationProblem) -> MaterialUsage:
    """Consumed over available mass per material.  Accepts a solution or a P vector."""
    P = produced.produced if isinstance(produced, AllocationSolution) else np.asarray(produced, dtype=float)
    mats, B = problem.bom_block()
    used = B @ P * MVA_PER_GVA
    ratios, flagged = {}, set()
    for i, m in enumerate(mats):
        avail = problem.availability.get(m, math.inf)
        if avail == math.inf:
            ratios[m] = 0.0
        elif avail >= AVAIL_FLOOR_KG:
            ratios[m] = float(used[i] / avail)
        else:
            ratios[m] = 0.0
            if B[i].any():
                flagged.add(m)
    bottleneck = frozenset(m for m, r in ratios.items() if r > BOTTLENECK)
    binding = frozenset(m for m, r in ratios.items() if r >= 1 - BINDING_TOL) | frozenset(flagged)
    return MaterialUsage(ratios, bottleneck, binding, frozenset(flagged))


def _dual_gap(res, c, b_ub, b_eq) -> float:
    primal = float(c @ res.x)
    dual = 0.0
    if b_ub is not None and len(b_ub):
        dual += float(np.dot(b_ub, res.ineqlin.marginals))
    if b_eq is not None and len(b_eq):
        dual += float(np.dot(b_eq, res.eqlin.marginals))
    # lower bounds are 0; finite upper bounds contribute u * z_u
    ub = getattr(res, "_ub", None)
    if ub is not None:
        finite = np.isfinite(ub)
        dual += float(np.dot(ub[finite], res.upper.marginals[finite]))
    return abs(primal - dual) / max(1.0, abs(primal), abs(dual))


def _lp(c, A_ub, b_ub, A_eq, b_eq, ub, what: str, year: int):
    bounds = np.column_stack([np.zeros_like(ub), ub])
    res = linprog(
        c,
        A_ub=A_ub if len(b_ub) else None,
        b_ub=b_ub if len(b_ub) else None,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=[(lo, None if math.isinf(hi) else hi) for lo, hi in bounds],
        method="highs",
        options=_HIGHS,
    )
    if res.status != 0:
        raise SolverError(f"{year} {what}: solver status {res.status} ({res.message})")
    res._ub = ub
    gap = _dual_gap(res, c, b_ub, b_eq)
    if gap > GAP_RTOL:
        raise SolverError(f"{year} {what}: duality gap {gap:.3g} exceeds {GAP_RTOL}")
    return res, gap


def _tiebreak(classes) -> np.ndarray:
    # grid, generation, consumption; alphabetical inside a layer
    order = sorted(classes, key=lambda e: (LAYER_ORDER.index(layer_of(e)), e))
    n = len(classes)
    return np.array([TIEBREAK * (n - order.index(e)) for e in classes])


def solve_year(problem: AllocationProblem, mode: str = "two_phase", big_m: float = BIG_M) -> AllocationSolution:
    """Solve one year's lexicographic program.

    ``mode`` is ``"two_phase"`` (default) or ``"big_m"``.
    """
    if mode not in ("two_phase", "big_m"):
        raise ConfigError(f"unknown solve mode {mode!r}")
    classes = problem.classes
    n = len(classes)
    D = problem.demand
    rho = problem.rho
    w = np.array([problem.weights[e] for e in classes], dtype=float)
    mats, Bk = problem.bom_block()
    active = D > DEMAND_FLOOR
    ref = classes.index(problem.reference)

    if not active.any():
        usage = usage_ratios(np.zeros(n), problem)
        return AllocationSolution(
            problem.year, classes, np.zeros(n), D.copy(), np.zeros(n), 0.0,
            usage.ratios, usage.binding, usage.bottleneck, 0.0, (), mode, usage.unavailable,
        )

    # x = [P (n), U (n), V (n), S]
    nv = 3 * n + 1
    iP, iU, iV, iS = 0, n, 2 * n, 3 * n
    D_lp = np.where(active, D, 0.0)
    ub = np.full(nv, math.inf)
    ub[iP:iU] = D_lp
    ub[iU:iV] = D_lp
    rows, rhs = [], []
    # material rows, each scaled by its availability so the row reads as a usage ratio
    for i, m in enumerate(mats):
        used_by = Bk[i] > 0
        if not used_by.any():
            continue
        avail = problem.availability.get(m, math.inf)
        if avail == math.inf:
            continue
        if avail < AVAIL_FLOOR_KG:
            ub[iP:iU][used_by] = 0.0
            continue
        row = np.zeros(nv)
        row[iP:iU] = Bk[i] * MVA_PER_GVA / avail
        rows.append(row)
        rhs.append(1.0)
    for e in np.flatnonzero(active):
        row = np.zeros(nv)
        row[iS] = 1.0
        row[iV + e] = -1.0
        rows.append(row)
        rhs.append(0.0)
    for e in range(n):
        if e == ref:
            continue
        row = np.zeros(nv)
        row[iV + e] = 1.0
        row[iV + ref] = -1.0
        rows.append(row)
        rhs.append(0.0)
    A_ub = np.array(rows)
    b_ub = np.array(rhs)
    A_eq = np.zeros((2 * n, nv))
    b_eq = np.zeros(2 * n)
    for e in range(n):
        A_eq[e, iP + e] = 1.0
        A_eq[e, iU + e] = 1.0
        b_eq[e] = D_lp[e]
        A_eq[n + e, iV + e] = 1.0
        A_eq[n + e, iP + e] = -1.0 / rho[e]

    level2 = np.zeros(nv)
    level2[iV:iS] = -(w + _tiebreak(classes))
    if mode == "two_phase":
        c1 = np.zeros(nv)
        c1[iS] = -1.0
        r1, g1 = _lp(c1, A_ub, b_ub, A_eq, b_eq, ub, "level 1", problem.year)
        s_star = float(r1.x[iS])
        hold = np.zeros(nv)
        hold[iS] = -1.0
        A2 = np.vstack([A_ub, hold])
        b2 = np.append(b_ub, -(s_star * (1 - LEX_RTOL)))
        r2, g2 = _lp(level2, A2, b2, A_eq, b_eq, ub, "level 2", problem.year)
        x, gaps = r2.x, (g1, g2)
    else:
        # objective divided by M: same argmax, bounded coefficients
        c = level2 / big_m
        c[iS] = -1.0
        r, g = _lp(c, A_ub, b_ub, A_eq, b_eq, ub, "big-M", problem.year)
        x, gaps = r.x, (g,)
        s_star = float(x[iS])

    P = np.clip(x[iP:iU], 0.0, D_lp)
    U = D - P
    V = P / rho
    S = float(min(s_star, V[active].min()))
    S = S if S > 0 else 0.0
    usage = usage_ratios(P, problem)
    sol = AllocationSolution(
        problem.year, classes, P, U, V, S, usage.ratios, usage.binding, usage.bottleneck,
        float(w @ V), gaps, mode, usage.unavailable,
    )
    check_contracts(sol, problem)
    return sol


def check_contracts(sol: AllocationSolution, problem: AllocationProblem) -> None:
    """Raise SolverError if a solution breaks balance, material, bundle or hierarchy limits."""
    D = problem.demand
    problems = []
    if np.any(np.abs(sol.produced + sol.unmet - D) > CONTRACT_TOL):
        problems.append("P + U != D")
    if np.any(sol.produced < 0) or np.any(sol.unmet < 0):
        problems.append("negative deployment")
    for m, r in sol.usage.items():
        if r > 1 + CONTRACT_TOL:
            problems.append(f"{m} usage {r:.12g} > 1")
    active = D > DEMAND_FLOOR
    if active.any() and sol.bundle > sol.normalized[active].min() + CONTRACT_TOL:
        problems.append("bundle exceeds an active class")
    ref = sol.classes.index(problem.reference)
    others = np.arange(len(sol.classes)) != ref
    if np.any(sol.normalized[others] > sol.normalized[ref] + CONTRACT_TOL):
        problems.append("hierarchy bound violated")
    if problems:
        raise SolverError(f"{sol.year}: solution violates contracts: {', '.join(problems)}")


def solve_horizon(problems: Sequence[AllocationProblem], mode: str = "two_phase") -> list[AllocationSolution]:
    """Independent per-year solves; no constraint couples years."""
    years = [p.year for p in problems]
    if years != sorted(years):
        raise InputError("problems must be sorted by year")
    return [solve_year(p, mode=mode) for p in problems]


# ---------------------------------------------------------------- reporting


@dataclass(frozen=True)
class GapRow:
    key: str
    year: int
    produced: float
    unmet: float

    @property
    def total(self) -> float:
        return self.produced + self.unmet

    @property
    def gap_ratio(self) -> float:
        return self.unmet / self.total if self.total > 0 else 0.0


@dataclass
class GapReport:
    by_class: list = field(default_factory=list)
    by_group: list = field(default_factory=list)  # includes "all"

    def lookup(self, key: str, year: int) -> GapRow:
        for row in (*self.by_class, *self.by_group):
            if row.key == key and row.year == year:
                return row
        raise KeyError((key, year))

    def class_csv(self) -> str:
        rows = [(r.key, r.year, fmt(r.produced, 3), fmt(r.unmet, 3), fmt(r.gap_ratio, 4)) for r in self.by_class]
        return render_csv(("class", "year", "produced_gva", "unmet_gva", "gap_ratio"), rows)

    def group_csv(self) -> str:
        rows = [(r.key, r.year, fmt(r.produced, 3), fmt(r.unmet, 3), fmt(r.gap_ratio, 4)) for r in self.by_group]
        return render_csv(("group", "year", "produced_gva", "unmet_gva", "gap_ratio"), rows)


def gap_report(solutions: Sequence[AllocationSolution], schedule=None) -> GapReport:
    """Per-class, per-group and aggregate production/unmet/gap rows.

    With a schedule, every scheduled year must have a solution.
    """
    if schedule is not None:
        missing = [y for y in schedule.years if y not in {s.year for s in solutions}]
        if missing:
            raise InputError(f"no solution for scheduled years {missing}")
    rep = GapReport()
    for sol in solutions:
        for i, e in enumerate(sol.classes):
            rep.by_class.append(GapRow(e, sol.year, float(sol.produced[i]), float(sol.unmet[i])))
        groups = dict(REPORT_GROUPS)
        groups["other_gse"] = tuple(e for e in sol.classes if e != REFERENCE_CLASS)
        groups["all"] = sol.classes
        for g, members in groups.items():
            idx = [i for i, e in enumerate(sol.classes) if e in members]
            rep.by_group.append(
                GapRow(g, sol.year, float(sol.produced[idx].sum()), float(sol.unmet[idx].sum()))
            )
    return rep


def usage_csv(solutions: Sequence[AllocationSolution]) -> str:
    rows = []
    for sol in solutions:
        for m in sorted(sol.usage):
            rows.append((m, sol.year, fmt(sol.usage[m], 4), "true" if m in sol.binding_materials else "false"))
    return render_csv(("material", "year", "usage_ratio", "binding"), rows)
