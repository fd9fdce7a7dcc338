"""Energy-efficiency optimization for multi-cell NOMA networks with
backscatter sensor tags under imperfect SIC.

Subpackages follow the pipeline: channel generation -> forward model ->
closed-form/dual solver -> brute-force oracle -> Monte Carlo experiments.
"""

from bsnoma.model import (
    AllocationState,
    ChannelRealization,
    Metrics,
    Sinrs,
    SystemParams,
    check_feasibility,
    compute_metrics,
    compute_sinrs,
)
from bsnoma.channel import LayoutConfig, Topology, build_topology, sample_channels
from bsnoma.solver import SolveConfig, SolveReport, optimize
from bsnoma.oracle import GridSpec, grid_search

__all__ = [
    "AllocationState",
    "ChannelRealization",
    "Metrics",
    "Sinrs",
    "SystemParams",
    "check_feasibility",
    "compute_metrics",
    "compute_sinrs",
    "LayoutConfig",
    "Topology",
    "build_topology",
    "sample_channels",
    "SolveConfig",
    "SolveReport",
    "optimize",
    "GridSpec",
    "grid_search",
]

__version__ = "0.1.0"
