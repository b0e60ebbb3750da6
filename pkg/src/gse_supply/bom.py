"""Bill-of-materials coefficients (kg/MVA) and embodied material mass."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from importlib import resources
from typing import Mapping

import numpy as np

from .classes import EQUIPMENT_CLASSES
from .errors import InputError
from .tables import parse_float, read_rows, render_csv

log = logging.getLogger(__name__)

MATERIALS = (
    "steel", "copper", "aluminum", "nickel", "zinc",
    "tin", "silicon", "silver", "manganese", "magnesium",
)
MVA_PER_GVA = 1000.0

# cells reported only qualitatively; the bundled file carries 0 for them
UNQUANTIFIED = {
    ("tin", "dc_transformer"), ("silicon", "dc_transformer"), ("zinc", "dc_transformer"),
    ("tin", "battery_pcs"), ("silicon", "battery_pcs"), ("zinc", "battery_pcs"),
    ("magnesium", "pmsg_converter"), ("silicon", "pmsg_converter"), ("tin", "pmsg_converter"),
}


@dataclass(frozen=True)
class BomMatrix:
    materials: tuple
    classes: tuple
    coefficients: np.ndarray  # (material, class), kg/MVA

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (len(self.materials), len(self.classes)):
            raise InputError(f"BOM shape {c.shape} does not match axes")
        if np.any(~np.isfinite(c)) or np.any(c < 0):
            raise InputError("BOM coefficients must be finite and nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    def coefficient(self, material: str, equipment_class: str) -> float:
        try:
            return float(self.coefficients[self.materials.index(material), self.classes.index(equipment_class)])
        except ValueError:
            raise InputError(f"unknown BOM cell ({material}, {equipment_class})") from None

    def column(self, equipment_class: str) -> np.ndarray:
        return self.coefficients[:, self.classes.index(equipment_class)]

    def to_csv(self) -> str:
        rows = [
            (m, e, repr(float(self.coefficients[i, j])))
            for i, m in enumerate(self.materials)
            for j, e in enumerate(self.classes)
        ]
        return render_csv(("material", "equipment_class", "kg_per_mva"), rows)


def read_bom(path, materials=MATERIALS, classes=EQUIPMENT_CLASSES) -> BomMatrix:
    """Load the ``material, equipment_class, kg_per_mva`` interchange format.

    Cells absent from the file are 0.
    """
    coef = np.zeros((len(materials), len(classes)))
    seen = set()
    for i, row in enumerate(read_rows(path, ("material", "equipment_class", "kg_per_mva")), start=2):
        m, e = row["material"], row["equipment_class"]
        if m not in materials or e not in classes:
            raise InputError(f"{path}:{i}: unknown cell ({m}, {e})")
        if (m, e) in seen:
            raise InputError(f"{path}:{i}: duplicate cell ({m}, {e})")
        seen.add((m, e))
        coef[materials.index(m), classes.index(e)] = parse_float(row["kg_per_mva"], f"{path}:{i}")
    return BomMatrix(tuple(materials), tuple(classes), coef)


_warned = False


def default_bom() -> BomMatrix:
    global _warned
    ref = resources.files("gse_supply") / "fixtures" / "paper_params" / "bom.csv"
    with resources.as_file(ref) as path:
        bom = read_bom(path)
    missing = [cell for cell in sorted(UNQUANTIFIED) if bom.coefficient(*cell) == 0.0]
    if missing and not _warned:
        log.warning("BOM cells without published values default to 0: %s", missing)
        _warned = True
    return bom


def material_demand(capacity, bom: BomMatrix) -> np.ndarray:
    """Mass in kg per (material, year) for capacity in GVA.

    ``capacity`` is a DemandSchedule, a {class: per-year array} mapping, or a
    (class, year) array ordered like ``bom.classes``.
    """
    if hasattr(capacity, "total") and hasattr(capacity, "classes"):
        capacity = {e: capacity.total[i] for i, e in enumerate(capacity.classes)}
    if isinstance(capacity, Mapping):
        unknown = [e for e in capacity if e not in bom.classes]
        if unknown:
            raise InputError(f"classes not in BOM: {unknown}")
        width = {np.atleast_1d(np.asarray(v, dtype=float)).shape for v in capacity.values()}
        if len(width) > 1:
            raise InputError("capacity series differ in length")
        n = width.pop()[0] if width else 1
        P = np.zeros((len(bom.classes), n))
        for e, v in capacity.items():
            P[bom.classes.index(e)] = np.atleast_1d(np.asarray(v, dtype=float))
    else:
        P = np.asarray(capacity, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        if P.shape[0] != len(bom.classes):
            raise InputError("capacity rows must follow the BOM class order")
    return bom.coefficients @ P * MVA_PER_GVA


def intensity_ranking(bom: BomMatrix) -> dict[str, dict]:
    """Per class: materials by descending kg/MVA (zeros dropped) and the row total."""
    out = {}
    for j, e in enumerate(bom.classes):
        col = bom.coefficients[:, j]
        order = sorted((i for i in range(len(col)) if col[i] > 0), key=lambda i: (-col[i], i))
        out[e] = {
            "ranking": [(bom.materials[i], float(col[i])) for i in order],
            "total": float(col.sum()),
        }
    return out
