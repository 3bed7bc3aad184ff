"""Independent exact references: optimum trees, relaxation values,
brute-force drops and random laminar duals."""

from .brute import brute_drop, random_laminar_dual
from .lp import (LpModel, LpSizeError, LpSpec, LpStats, export_lp, import_lp, lp_value,
                 solve_model, solve_relaxation)
from .steiner import TooManyTerminalsError, dreyfus_wagner, expand_edges

__all__ = ["brute_drop", "random_laminar_dual", "LpModel", "LpSizeError", "LpSpec", "LpStats",
           "export_lp", "import_lp", "lp_value", "solve_model", "solve_relaxation",
           "TooManyTerminalsError", "dreyfus_wagner", "expand_edges"]
