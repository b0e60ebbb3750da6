"""Equipment-class identifiers, layers and reporting groups."""

GRID = "grid"
GENERATION = "generation"
CONSUMPTION = "consumption"

LAYER_ORDER = (GRID, GENERATION, CONSUMPTION)

LAYERS = {
    "transformer": GRID,
    "spv_inverter": GENERATION,
    "dfig_converter": GENERATION,
    "pmsg_converter": GENERATION,
    "battery_pcs": GENERATION,
    "dc_transformer": CONSUMPTION,
    "dc_ups": CONSUMPTION,
    "ev_charger_pcs": CONSUMPTION,
}

# grid, generation, consumption; alphabetical within a layer
EQUIPMENT_CLASSES = tuple(
    sorted(LAYERS, key=lambda e: (LAYER_ORDER.index(LAYERS[e]), e))
)

REFERENCE_CLASS = "transformer"

# reporting panels: transformers / other supply-side / load-side
REPORT_GROUPS = {
    "transformer": ("transformer",),
    "other_supply": ("battery_pcs", "dfig_converter", "pmsg_converter", "spv_inverter"),
    "load_side": ("dc_transformer", "dc_ups", "ev_charger_pcs"),
}


def layer_of(equipment_class: str) -> str:
    try:
        return LAYERS[equipment_class]
    except KeyError:
        raise KeyError(f"unknown equipment class {equipment_class!r}") from None


def report_group(equipment_class: str) -> str:
    for group, members in REPORT_GROUPS.items():
        if equipment_class in members:
            return group
    raise KeyError(f"unknown equipment class {equipment_class!r}")
