"""HTTP inference bridge for the placement-pipeline backend contract."""

__version__ = "0.1.0"
