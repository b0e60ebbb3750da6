"""Grid-side equipment (GSE) demand, material sourcing and supply-gap allocation."""

__version__ = "0.1.0"
