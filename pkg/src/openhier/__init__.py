"""Hierarchical equations for open quantum systems with bosonic and fermionic baths."""

__version__ = "0.1.0"

from .core import Method, Statistics, SystemSpec, TimeGrid, integrate, validate_system  # noqa: E402
from .bcf import Mode, PoleScheme, ThermalParams, eval_modes, lorentzian, residue_expand  # noqa: E402
from .indexset import Truncation, build_index_space, pair_space  # noqa: E402
from .noise import estimate_correlation, sample  # noqa: E402
from .master import build_master, propagate_master  # noqa: E402
from .hops import HopsRun, ensemble_density, propagate_trajectories  # noqa: E402
from .oracle import DiscreteBathSpec, exact_propagate, per_mode_channels  # noqa: E402
from .grassmann import check_identities  # noqa: E402

__all__ = [
    "Method",
    "Statistics",
    "SystemSpec",
    "TimeGrid",
    "integrate",
    "validate_system",
    "Mode",
    "PoleScheme",
    "ThermalParams",
    "eval_modes",
    "lorentzian",
    "residue_expand",
    "Truncation",
    "build_index_space",
    "pair_space",
    "sample",
    "estimate_correlation",
    "build_master",
    "propagate_master",
    "HopsRun",
    "propagate_trajectories",
    "ensemble_density",
    "DiscreteBathSpec",
    "exact_propagate",
    "per_mode_channels",
    "check_identities",
]
