"""Multi-regional supply-use algebra.

Conventions: ``U`` and ``V`` are both stored product x industry.  ``V[p, i]``
is the output of product ``p`` by industry ``i`` so ``g = V.sum(0)`` and
``q = V.sum(1)``.  Market shares ``C`` are industry x product with unit
column sums, which makes ``A = B @ C`` product x product.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConcordanceError, ConfigError, InconsistencyError, InputError, NonProductiveError
from .tables import fmt, parse_float, read_rows, render_csv

log = logging.getLogger(__name__)

DEFAULT_PHI = 0.046
DEFAULT_TOL = 1e-9
MAX_LAYERS = 200
CONSISTENCY_RTOL = 1e-6


def split_label(label: str) -> tuple[str, str]:
    region, sep, item = label.partition(":")
    if not sep:
        raise InputError(f"label {label!r} is not of the form region:item")
    return region, item


@dataclass(frozen=True)
class SupplyUseSystem:
    U: np.ndarray  # products x industries
    V: np.ndarray  # products x industries
    products: tuple  # "region:product"
    industries: tuple  # "region:industry"
    g: np.ndarray = None
    q: np.ndarray = None

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        V = np.asarray(self.V, dtype=float)
        shape = (len(self.products), len(self.industries))
        if U.shape != shape or V.shape != shape:
            raise InputError(f"use {U.shape} / supply {V.shape} do not match label axes {shape}")
        if np.any(U < 0) or np.any(V < 0) or not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
            raise InputError("supply and use entries must be finite and nonnegative")
        g = V.sum(axis=0) if self.g is None else np.asarray(self.g, dtype=float)
        q = V.sum(axis=1) if self.q is None else np.asarray(self.q, dtype=float)
        for name, given, implied in (("industry", g, V.sum(axis=0)), ("product", q, V.sum(axis=1))):
            if given.shape != implied.shape or not np.allclose(given, implied, rtol=CONSISTENCY_RTOL, atol=0):
                raise InconsistencyError(f"{name} output vector disagrees with the supply table")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "q", q)

    @property
    def regions(self) -> tuple:
        seen = []
        for label in self.products:
            r = split_label(label)[0]
            if r not in seen:
                seen.append(r)
        return tuple(seen)

    def product_index(self, region: str, product: str) -> int:
        return self.products.index(f"{region}:{product}")


def normalize_use(U, g) -> np.ndarray:
    """B = U ghat^-1.  Zero-output industries must have an empty use column."""
    U = np.asarray(U, dtype=float)
    g = np.asarray(g, dtype=float)
    B = np.zeros_like(U)
    live = g > 0
    dead = np.flatnonzero(~live)
    if dead.size:
        bad = dead[np.any(U[:, dead] != 0, axis=0)]
        if bad.size:
            raise InconsistencyError(f"industries {bad.tolist()} have zero output but nonzero inputs")
        log.info("dropping %d zero-output industries", dead.size)
    B[:, live] = U[:, live] / g[live]
    return B


def market_shares(V, q, U=None) -> np.ndarray:
    """C = (V qhat^-1) as industry x product; each produced product's column sums to 1.

    A product with zero output is dropped (zero column) unless ``U`` shows
    it being used, which is an inconsistency.
    """
    V = np.asarray(V, dtype=float)
    q = np.asarray(q, dtype=float)
    C = np.zeros(V.T.shape)
    live = q > 0
    dead = np.flatnonzero(~live)
    if dead.size:
        if U is not None:
            bad = dead[np.any(np.asarray(U)[dead, :] != 0, axis=1)]
            if bad.size:
                raise InconsistencyError(f"products {bad.tolist()} have zero output but downstream use")
        log.info("dropping %d zero-output products", dead.size)
    C[:, live] = V[live, :].T / q[live]
    return C


def ita_coefficients(B, C) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    if B.ndim != 2 or C.ndim != 2 or B.shape[1] != C.shape[0] or B.shape[0] != C.shape[1]:
        raise InputError(f"cannot combine B {B.shape} with C {C.shape} into a product x product matrix")
    return B @ C


@dataclass(frozen=True)
class ProductCoefficients:
    B: np.ndarray
    C: np.ndarray
    A: np.ndarray

    @classmethod
    def from_system(cls, system: SupplyUseSystem) -> "ProductCoefficients":
        B = normalize_use(system.U, system.g)
        C = market_shares(system.V, system.q, system.U)
        return cls(B, C, ita_coefficients(B, C))


def spectral_radius(A, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Perron root of |A| by power iteration.

    Iterates on ``|A| + I`` (same eigenvectors, no periodicity) from a vector
    of ones and stops when the Collatz-Wielandt bounds meet.
    """
    M = np.abs(np.asarray(A, dtype=float))
    n = M.shape[0]
    if n == 0:
        return 0.0
    x = np.ones(n)
    lo = hi = 0.0
    prev = np.inf
    for _ in range(max_iter):
        y = M @ x + x
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = y / x
        pos = x > 0
        lo, hi = ratio[pos].min() - 1.0, ratio[pos].max() - 1.0
        nrm = y.max()
        if nrm == 0:
            return 0.0
        x = y / nrm
        # bounds meet, or (reducible case) the upper bound has settled
        if hi - lo <= tol * max(1.0, hi) or abs(hi - prev) <= 1e-2 * tol * max(1.0, hi):
            break
        prev = hi
    return float(max(hi, 0.0))


@dataclass(frozen=True)
class LayeredRequirements:
    total: np.ndarray  # L_n
    layers: list = field(repr=False)  # A^k, k = 0..n
    n: int
    layer_norms: tuple
    spectral_radius: float
    residual_bound: float | None  # max-row-sum bound on the dropped tail

    def __matmul__(self, f):
        return self.total @ f


def neumann_layers(A, n: int = MAX_LAYERS, tol: float = DEFAULT_TOL, keep_layers: bool = True) -> LayeredRequirements:
    """Partial sums of sum_k A^k, stopping once a layer's max-norm drops below ``tol``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("product coefficients must be square")
    if n < 0:
        raise ConfigError("layer count must be nonnegative")
    if tol < 0:
        raise ConfigError("tolerance must be nonnegative")
    rho = spectral_radius(A)
    if rho >= 1.0:
        raise NonProductiveError(f"production system is not productive: spectral radius {rho:.6g} >= 1")
    size = A.shape[0]
    term = np.eye(size)
    total = term.copy()
    layers = [term] if keep_layers else []
    norms = [float(np.abs(term).max()) if size else 0.0]
    k = 0
    while k < n and norms[-1] >= tol:
        term = term @ A
        total = total + term
        k += 1
        norms.append(float(np.abs(term).max()) if size else 0.0)
        if keep_layers:
            layers.append(term)
    a = float(np.abs(A).sum(axis=1).max()) if size else 0.0
    bound = a ** (k + 1) / (1.0 - a) if a < 1.0 else None
    return LayeredRequirements(total, layers, k, tuple(norms), rho, bound)


def gse_final_demand(parent_demand, phi: float = DEFAULT_PHI, parent_index=None) -> np.ndarray:
    """Scale the parent category's final-demand entries by ``phi``.

    ``parent_index`` picks the coordinates to scale (index, list or mask);
    None scales all of them.
    """
    if not 0 < phi <= 1:
        raise ConfigError(f"allocation factor must lie in (0, 1], got {phi}")
    f = np.array(parent_demand, dtype=float)
    if parent_index is None:
        return f * phi
    f[parent_index] = f[parent_index] * phi
    return f


def read_concordance(path) -> dict[str, list[tuple[str, float]]]:
    """``product_group, material[, share]`` -> {group: [(material, share)]}."""
    out: dict[str, list[tuple[str, float]]] = {}
    for i, row in enumerate(read_rows(path, ("product_group", "material")), start=2):
        share = parse_float(row["share"], f"{path}:{i}") if row.get("share") else 1.0
        if not 0 < share <= 1:
            raise InputError(f"{path}:{i}: share must lie in (0, 1]")
        out.setdefault(row["product_group"], []).append((row["material"], share))
    for group, pairs in out.items():
        if sum(s for _, s in pairs) > 1 + 1e-9:
            raise InputError(f"{path}: shares for {group!r} exceed 1")
    return out


def read_mass_factors(path) -> dict[str, float]:
    out = {}
    for i, row in enumerate(read_rows(path, ("material", "kg_per_unit_value")), start=2):
        v = parse_float(row["kg_per_unit_value"], f"{path}:{i}")
        if not v > 0:
            raise InputError(f"{path}:{i}: mass factor must be positive")
        out[row["material"]] = v
    return out


@dataclass(frozen=True)
class MaterialSourcing:
    materials: tuple
    regions: tuple
    years: tuple
    mass: np.ndarray  # kg, (material, region, year)
    phi: float = DEFAULT_PHI
    mass_factors: Mapping = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.shape != (len(self.materials), len(self.regions), len(self.years)):
            raise InputError("sourcing mass does not match its axes")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise InputError("sourcing mass must be finite and nonnegative")
        object.__setattr__(self, "mass", m)

    @property
    def totals(self) -> np.ndarray:
        """(material, year) kg summed over regions."""
        return self.mass.sum(axis=1)

    @property
    def shares(self) -> np.ndarray:
        tot = self.totals[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(tot > 0, self.mass / np.where(tot > 0, tot, 1.0), 0.0)

    def total(self, material: str, year: int) -> float:
        return float(self.totals[self.materials.index(material), self.years.index(year)])

    def share_map(self, material: str, year: int) -> dict[str, float]:
        s = self.shares[self.materials.index(material), :, self.years.index(year)]
        return dict(zip(self.regions, map(float, s)))

    def to_csv(self) -> str:
        rows = []
        sh = self.shares
        for i, m in enumerate(self.materials):
            for k, y in enumerate(self.years):
                for j, r in enumerate(self.regions):
                    rows.append((m, y, r, fmt(self.mass[i, j, k], 3), fmt(sh[i, j, k], 6)))
        return render_csv(("material", "year", "region", "mass_kg", "share"), rows)


def trace_material_sourcing(
    system: SupplyUseSystem,
    layers: LayeredRequirements,
    gse_demand: Mapping[int, np.ndarray],
    material_map: Mapping[str, Sequence[tuple[str, float]]],
    mass_factors: Mapping[str, float],
    phi: float = DEFAULT_PHI,
) -> MaterialSourcing:
    """Embodied material mass by producing region.

    ``gse_demand`` maps year -> monetary final demand over ``system.products``
    (already scaled to the GSE share).  Output of every material product
    group is converted with the material's kg-per-unit-value factor.
    """
    groups = {split_label(p)[1] for p in system.products}
    for group in material_map:
        if group not in groups:
            raise ConcordanceError(f"concordance group {group!r} not among system products")
    materials = tuple(sorted({m for pairs in material_map.values() for m, _ in pairs}))
    for m in materials:
        if m not in mass_factors:
            raise ConcordanceError(f"no mass factor for material {m!r}")
        if not mass_factors[m] > 0:
            raise InputError(f"mass factor for {m!r} must be positive")
    regions = system.regions
    years = tuple(sorted(gse_demand))
    # (material, region, product) weights turning output value into kg
    W = np.zeros((len(materials), len(regions), len(system.products)))
    for k, label in enumerate(system.products):
        region, group = split_label(label)
        for m, share in material_map.get(group, ()):
            W[materials.index(m), regions.index(region), k] += share * mass_factors[m]
    mass = np.zeros((len(materials), len(regions), len(years)))
    for t, y in enumerate(years):
        f = np.asarray(gse_demand[y], dtype=float)
        if f.shape != (len(system.products),):
            raise InputError(f"final demand for {y} has shape {f.shape}, expected {(len(system.products),)}")
        x = layers.total @ f
        mass[:, :, t] = W @ x
    return MaterialSourcing(materials, regions, years, mass, phi, dict(mass_factors))


def apply_trade_disruption(sourcing: MaterialSourcing, restricted_regions, cut: float = 0.7) -> MaterialSourcing:
    if not 0 <= cut <= 1:
        raise ConfigError(f"trade cut must lie in [0, 1], got {cut}")
    unknown = [r for r in restricted_regions if r not in sourcing.regions]
    if unknown:
        raise ConfigError(f"unknown regions {unknown}; known: {list(sourcing.regions)}")
    mass = sourcing.mass.copy()
    for r in restricted_regions:
        mass[:, sourcing.regions.index(r), :] *= 1.0 - cut
    return replace(sourcing, mass=mass)


def extrapolate_shares(sourcing: MaterialSourcing, years: Sequence[int]) -> np.ndarray:
    """Linear least-squares trend of each (material, region) share over the
    observed years, evaluated at ``years``; clipped at 0 and renormalized.

    Returns (material, region, len(years)).
    """
    obs = np.asarray(sourcing.years, dtype=float)
    sh = sourcing.shares
    out = np.zeros((len(sourcing.materials), len(sourcing.regions), len(years)))
    target = np.asarray(years, dtype=float)
    for i in range(len(sourcing.materials)):
        for j in range(len(sourcing.regions)):
            if obs.size == 1:
                out[i, j] = sh[i, j, 0]
            else:
                slope, icpt = np.polyfit(obs, sh[i, j], 1)
                out[i, j] = icpt + slope * target
    out = np.clip(out, 0.0, None)
    tot = out.sum(axis=1, keepdims=True)
    return np.where(tot > 0, out / np.where(tot > 0, tot, 1.0), 0.0)


def availability_from_totals(
    totals: Mapping[str, Mapping[int, float]],
    shares: np.ndarray,
    share_materials: Sequence[str],
    regions: Sequence[str],
    years: Sequence[int],
) -> MaterialSourcing:
    """Split per-(material, year) available kg over regions by ``shares``.

    Materials without traced shares are booked to the first region.
    """
    materials = tuple(sorted(totals))
    mass = np.zeros((len(materials), len(regions), len(years)))
    for i, m in enumerate(materials):
        for k, y in enumerate(years):
            if y not in totals[m]:
                raise InputError(f"availability for {m} lacks year {y}")
            if m in share_materials:
                mass[i, :, k] = totals[m][y] * shares[list(share_materials).index(m), :, k]
            else:
                mass[i, 0, k] = totals[m][y]
    return MaterialSourcing(materials, tuple(regions), tuple(years), mass)


# ---------------------------------------------------------------- loading


def _read_triplets(path, rows: Sequence[str], cols: Sequence[str]) -> np.ndarray:
    records = read_rows(path, ("row_label", "col_label", "value"))
    row_set, col_set = set(rows), set(cols)
    r0 = {r["row_label"] for r in records}
    if r0 and r0 <= col_set and not r0 <= row_set:
        # stored transposed
        rows, cols = cols, rows
        transposed = True
    else:
        transposed = False
    ri = {lab: i for i, lab in enumerate(rows)}
    ci = {lab: i for i, lab in enumerate(cols)}
    M = np.zeros((len(rows), len(cols)))
    for n, rec in enumerate(records, start=2):
        try:
            i, j = ri[rec["row_label"]], ci[rec["col_label"]]
        except KeyError:
            raise InputError(f"{path}:{n}: label not in manifest ({rec['row_label']}, {rec['col_label']})") from None
        M[i, j] += parse_float(rec["value"], f"{path}:{n}")
    return M.T if transposed else M


def load_system(manifest_path) -> SupplyUseSystem:
    """Read an axis manifest JSON plus its use/supply triplet CSVs.

    Manifest keys: ``regions``, ``products``, ``industries`` (item names,
    crossed with regions into ``region:item`` labels), ``use``, ``supply``.
    """
    manifest_path = Path(manifest_path)
    try:
        man = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{manifest_path}: no such manifest") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{manifest_path}: invalid JSON ({exc})") from None
    for key in ("regions", "products", "industries", "use", "supply"):
        if key not in man:
            raise ConfigError(f"{manifest_path}: manifest lacks {key!r}")
    products = tuple(f"{r}:{p}" for r in man["regions"] for p in man["products"])
    industries = tuple(f"{r}:{i}" for r in man["regions"] for i in man["industries"])
    base = manifest_path.parent
    U = _read_triplets(base / man["use"], products, industries)
    V = _read_triplets(base / man["supply"], products, industries)
    return SupplyUseSystem(U, V, products, industries)


def read_final_demand(path, system: SupplyUseSystem) -> dict[int, np.ndarray]:
    """``year, product, value`` with product as ``region:product``."""
    out: dict[int, np.ndarray] = {}
    idx = {lab: k for k, lab in enumerate(system.products)}
    for n, row in enumerate(read_rows(path, ("year", "product", "value")), start=2):
        try:
            y = int(row["year"])
            k = idx[row["product"]]
        except (ValueError, KeyError):
            raise InputError(f"{path}:{n}: bad year or unknown product {row['product']!r}") from None
        out.setdefault(y, np.zeros(len(system.products)))[k] += parse_float(row["value"], f"{path}:{n}")
    return out


def system_to_triplets(system: SupplyUseSystem) -> tuple[str, str]:
    def dump(M):
        rows = [
            (system.products[i], system.industries[j], repr(float(M[i, j])))
            for i, j in zip(*np.nonzero(M))
        ]
        return render_csv(("row_label", "col_label", "value"), rows)

    return dump(system.U), dump(system.V)
