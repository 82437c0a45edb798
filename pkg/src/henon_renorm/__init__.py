"""Period-doubling renormalization of Hénon-like maps."""

from .fnrep import AnalyticFn, AnalyticFn2, Interval
from .henon import HenonMap, example_map, load_map
from .renorm import RenormTower, build_tower
from .unimodal import FeigenbaumSolution, solve_feigenbaum

__all__ = [
    "AnalyticFn",
    "AnalyticFn2",
    "Interval",
    "HenonMap",
    "example_map",
    "load_map",
    "RenormTower",
    "build_tower",
    "FeigenbaumSolution",
    "solve_feigenbaum",
]

__version__ = "0.1.0"
