"""Critical clasp configurations for weighted Gehring ropelength."""

from .clasp_core import ClaspParams, balance_partner, clasp_x, tip_gap, transfer
from .constructions import (
    FamilySpec,
    build,
    build_chained_clasp,
    build_granny,
    build_parallel_clasp,
    build_simple_clasp,
    build_split_config,
    build_weighted_clasp,
)
from .criticality import balance_solve, criticality_probe, find_struts, gehring_thickness

__version__ = "0.1.0"
