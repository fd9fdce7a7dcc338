"""Brute-force grid search over allocations, the ground truth for the solver.

Grid resolutions count subdivision intervals, so doubling a resolution
refines the grid in place (every coarse point stays on the fine grid) and
the best value can only improve. Only small cell counts are practical: the
single-cell case is fully vectorized, the multi-cell case enumerates the
joint product of per-cell grids.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from bsnoma.model import (
    AllocationState,
    ChannelRealization,
    SystemParams,
    check_feasibility,
    compute_metrics,
)
from bsnoma.solver import NBS, PAC_FLOOR, WBS


@dataclass(frozen=True)
class GridSpec:
    """Interval counts of the power, PAC and reflection axes."""

    n_power: int = 200
    n_pac: int = 200
    n_phi: int = 100

    def __post_init__(self):
        for name in ("n_power", "n_pac", "n_phi"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2")


@dataclass(frozen=True)
class OracleResult:
    """Best grid point found, or an explicit infeasibility marker."""

    alloc: AllocationState | None
    ee: float
    feasible: bool


def _axes(params: SystemParams, grid: GridSpec, mode: str):
    power = np.linspace(0.0, params.p_max, grid.n_power + 1)[1:]  # P=0 gives zero EE
    pac = np.linspace(PAC_FLOOR, 0.5, grid.n_pac + 1)
    phi = np.linspace(0.0, 1.0, grid.n_phi + 1) if mode == WBS else np.array([0.0])
    return power, pac, phi


def _single_cell_search(chan: ChannelRealization, params: SystemParams,
                        grid: GridSpec, mode: str) -> OracleResult:
    power, pac, phi = _axes(params, grid, mode)
    p = power[:, None, None]
    li = pac[None, :, None]
    f = phi[None, None, :]
    lj = 1.0 - li

    g_near, g_far = chan.g_near[0], chan.g_far[0]
    casc_near, casc_far = chan.cascade_near[0], chan.cascade_far[0]
    sig2 = params.noise_variance
    rho = params.rate_floor_factor

    eff_near = g_near + f * casc_near
    eff_far = g_far + f * casc_far
    sinr_near = (p * li * eff_near) / (p * lj * g_near * params.sic_error + sig2)
    sinr_far = (p * lj * eff_far) / (p * li * eff_far + sig2)
    rate = np.log2(1.0 + sinr_near) + np.log2(1.0 + sinr_far)
    ee = rate / (p * (li + lj) + params.circuit_power)

    ok = ((p * li * eff_near >= rho * (g_near * p * lj * params.sic_error + sig2))
          & (p * lj * eff_far >= rho * (p * li * eff_far + sig2)))
    ee = np.where(ok, ee, -np.inf)
    idx = np.unravel_index(np.argmax(ee), ee.shape)
    if not np.isfinite(ee[idx]):
        return OracleResult(alloc=None, ee=-np.inf, feasible=False)
    alloc = AllocationState(
        power=np.array([power[idx[0]]]),
        pac_near=np.array([pac[idx[1]]]),
        pac_far=np.array([1.0 - pac[idx[1]]]),
        reflection=np.array([phi[idx[2]]]),
    )
    return OracleResult(alloc=alloc, ee=float(ee[idx]), feasible=True)


def grid_search(chan: ChannelRealization, params: SystemParams,
                grid: GridSpec | None = None, mode: str = WBS) -> OracleResult:
    """Exhaustively maximize EE over the allocation grid.

    Per cell the grid spans power in (0, p_max], pac_near in
    (PAC_FLOOR, 0.5] with pac_far = 1 - pac_near, and reflection in [0, 1]
    (pinned to 0 in NBS mode). Points violating a rate floor are excluded;
    if nothing survives the result is marked infeasible.
    """
    if mode not in (WBS, NBS):
        raise ValueError(f"mode must be '{WBS}' or '{NBS}', got {mode!r}")
    if grid is None:
        grid = GridSpec()
    if chan.num_cells == 1:
        return _single_cell_search(chan, params, grid, mode)
    return _joint_search(chan, params, grid, mode)


def _joint_search(chan: ChannelRealization, params: SystemParams,
                  grid: GridSpec, mode: str) -> OracleResult:
    """Exhaustive product search for K >= 2; intended for coarse grids only."""
    k = chan.num_cells
    power, pac, phi = _axes(params, grid, mode)
    per_cell = list(itertools.product(power, pac, phi))
    best_ee, best_alloc = -np.inf, None
    for combo in itertools.product(per_cell, repeat=k):
        arr = np.asarray(combo)
        alloc = AllocationState(power=arr[:, 0], pac_near=arr[:, 1],
                                pac_far=1.0 - arr[:, 1], reflection=arr[:, 2])
        feas = check_feasibility(alloc, chan, params)
        if not (np.all(feas.rate_floor_near) and np.all(feas.rate_floor_far)):
            continue
        ee = compute_metrics(alloc, chan, params).ee_total
        if ee > best_ee:
            best_ee, best_alloc = ee, alloc
    if best_alloc is None:
        return OracleResult(alloc=None, ee=-np.inf, feasible=False)
    return OracleResult(alloc=best_alloc, ee=float(best_ee), feasible=True)
