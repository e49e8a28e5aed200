# src/ppcfkit/reports/__init__.py
from .csvout import (
    DISTANCE_HEADER, ENUM_HEADER, SWEEP_HEADER,
    distance_rows, enum_rows, format_cell, format_float, sweep_rows, write_csv,
)

__all__ = [
    "write_csv", "format_cell", "format_float",
    "enum_rows", "sweep_rows", "distance_rows",
    "ENUM_HEADER", "SWEEP_HEADER", "DISTANCE_HEADER",
]
