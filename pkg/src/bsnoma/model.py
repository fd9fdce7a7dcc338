"""Forward model: domain types, SINRs, rates, energy efficiency, feasibility.

Conventions used throughout the package:
  * all powers and gains are linear (watts / dimensionless), never dB;
  * per-cell quantities are 1-D float arrays of length ``num_cells``;
  * cross-cell gains are (K, K) matrices indexed [victim_cell, interferer]
    with an unused zero diagonal;
  * within a cell the "near" device is the SIC-capable strong user and the
    "far" device decodes with the near user's signal as interference.

Every operation here is a pure function of immutable value objects, so the
module is safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _as_float_array(x, name: str, shape: tuple) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class SystemParams:
    """Global scalar parameters of the network.

    Attributes:
        noise_variance: AWGN power at every receiver, linear watts. The
            default corresponds to a noise amplitude std of 0.01.
        sic_error: residual fraction of the cancelled signal's power that
            remains as interference at the near device, in [0, 1].
        circuit_power: static circuit consumption per source, watts.
        p_max: transmit power budget per source, watts (dBm conversion
            happens only at the CLI boundary).
        r_min: per-device rate floor, bits/s/Hz.
        path_loss_exp: path-loss exponent applied to normalized distance.
        num_cells: number of co-channel cells K.
    """

    noise_variance: float = 1e-4
    sic_error: float = 0.1
    circuit_power: float = 0.1
    p_max: float = 10.0 ** ((32.0 - 30.0) / 10.0)  # 32 dBm
    r_min: float = 0.0
    path_loss_exp: float = 3.0
    num_cells: int = 10

    def __post_init__(self):
        if self.noise_variance <= 0:
            raise ValueError("noise_variance must be > 0")
        if self.circuit_power <= 0:
            raise ValueError("circuit_power must be > 0")
        if self.p_max <= 0:
            raise ValueError("p_max must be > 0")
        if not 0.0 <= self.sic_error <= 1.0:
            raise ValueError("sic_error must lie in [0, 1]")
        if self.r_min < 0:
            raise ValueError("r_min must be >= 0")
        if self.num_cells < 1:
            raise ValueError("num_cells must be >= 1")

    @property
    def rate_floor_factor(self) -> float:
        """Threshold factor 2**r_min - 1 used by the rate-floor constraints."""
        return 2.0 ** self.r_min - 1.0


@dataclass(frozen=True)
class ChannelRealization:
    """All squared channel gains of one network draw.

    ``g_cross_near[k, kp]`` is the squared gain from source kp to the near
    device of cell k (analogously ``g_cross_far``); diagonals are zero.
    The tag cascade observed by a device is the product of the
    source-to-tag and tag-to-device squared gains.
    """

    g_near: np.ndarray
    g_far: np.ndarray
    g_src_tag: np.ndarray
    g_tag_near: np.ndarray
    g_tag_far: np.ndarray
    g_cross_near: np.ndarray
    g_cross_far: np.ndarray

    def __post_init__(self):
        k = len(np.asarray(self.g_near))
        for name in ("g_near", "g_far", "g_src_tag", "g_tag_near", "g_tag_far"):
            object.__setattr__(self, name, _as_float_array(getattr(self, name), name, (k,)))
        for name in ("g_cross_near", "g_cross_far"):
            object.__setattr__(self, name, _as_float_array(getattr(self, name), name, (k, k)))
        if np.any(self.g_near < 0) or np.any(self.g_far < 0):
            raise ValueError("direct gains must be nonnegative")
        if np.any(self.g_src_tag < 0) or np.any(self.g_tag_near < 0) or np.any(self.g_tag_far < 0):
            raise ValueError("tag gains must be nonnegative")
        if np.any(self.g_cross_near < 0) or np.any(self.g_cross_far < 0):
            raise ValueError("cross gains must be nonnegative")
        if np.any(self.g_near < self.g_far):
            raise ValueError("NOMA ordering violated: g_near must be >= g_far in every cell")
        for name in self.__dataclass_fields__:
            getattr(self, name).setflags(write=False)

    @property
    def num_cells(self) -> int:
        return len(self.g_near)

    @property
    def cascade_near(self) -> np.ndarray:
        """Backscatter cascade gain seen by the near device."""
        return self.g_src_tag * self.g_tag_near

    @property
    def cascade_far(self) -> np.ndarray:
        """Backscatter cascade gain seen by the far device."""
        return self.g_src_tag * self.g_tag_far

    def without_tags(self) -> "ChannelRealization":
        """Copy of this realization with the tag cascade removed."""
        zero = np.zeros(self.num_cells)
        return ChannelRealization(
            g_near=self.g_near,
            g_far=self.g_far,
            g_src_tag=zero,
            g_tag_near=zero,
            g_tag_far=zero,
            g_cross_near=self.g_cross_near,
            g_cross_far=self.g_cross_far,
        )


@dataclass
class AllocationState:
    """Per-cell decision variables: source power, PACs, reflection coefficient."""

    power: np.ndarray
    pac_near: np.ndarray
    pac_far: np.ndarray
    reflection: np.ndarray

    def __post_init__(self):
        k = len(np.asarray(self.power))
        for name in ("power", "pac_near", "pac_far", "reflection"):
            setattr(self, name, _as_float_array(getattr(self, name), name, (k,)))

    @property
    def num_cells(self) -> int:
        return len(self.power)

    @property
    def total_radiated(self) -> float:
        """Network-wide allocated transmit power sum(P_k * (pac_near + pac_far))."""
        return float(np.sum(self.power * (self.pac_near + self.pac_far)))

    def copy(self) -> "AllocationState":
        return AllocationState(
            power=self.power.copy(),
            pac_near=self.pac_near.copy(),
            pac_far=self.pac_far.copy(),
            reflection=self.reflection.copy(),
        )

    @classmethod
    def uniform(cls, num_cells: int, power: float, pac_near: float = 0.3,
                pac_far: float = 0.7, reflection: float = 0.5) -> "AllocationState":
        ones = np.ones(num_cells)
        return cls(power=power * ones, pac_near=pac_near * ones,
                   pac_far=pac_far * ones, reflection=reflection * ones)


@dataclass(frozen=True)
class Sinrs:
    """Per-cell SINRs and the inter-cell interference powers they embed."""

    sinr_near_self: np.ndarray
    sinr_far: np.ndarray
    sinr_near_decodes_far: np.ndarray
    interference_near: np.ndarray
    interference_far: np.ndarray


@dataclass(frozen=True)
class Metrics:
    """Per-cell rates (bits/s/Hz) and the network energy efficiency."""

    rate_near: np.ndarray
    rate_far: np.ndarray
    rate_sum: np.ndarray
    ee_total: float


@dataclass(frozen=True)
class FeasibilityReport:
    """Boolean status of each constraint family plus rate-floor violations.

    Violations are expressed in constraint units (received-power watts): the
    amount by which the rate-floor inequality's right side exceeds its left.
    """

    rate_floor_near: np.ndarray       # received-power form of the near rate floor
    rate_floor_far: np.ndarray        # same for the far device
    sic_order: np.ndarray             # P*pac_near <= P*pac_far
    power_budget: np.ndarray          # 0 <= P <= p_max
    pac_budget: np.ndarray            # pac_near + pac_far <= 1
    reflection_range: np.ndarray      # 0 <= reflection <= 1
    rate_floor_near_violation: np.ndarray = field(default=None)
    rate_floor_far_violation: np.ndarray = field(default=None)

    @property
    def all_ok(self) -> bool:
        return bool(
            np.all(self.rate_floor_near) and np.all(self.rate_floor_far)
            and np.all(self.sic_order) and np.all(self.power_budget)
            and np.all(self.pac_budget) and np.all(self.reflection_range)
        )


def interference_powers(alloc: AllocationState, chan: ChannelRealization) -> tuple[np.ndarray, np.ndarray]:
    """Inter-cell interference received at every near and far device.

    Each entry is the per-interferer sum over foreign sources,
    sum_{k' != k} P_{k'} * g_cross[k, k'].
    """
    return chan.g_cross_near @ alloc.power, chan.g_cross_far @ alloc.power


def intercell_interference(alloc: AllocationState, chan: ChannelRealization,
                           cell: int, role: str) -> float:
    """Interference power from co-channel sources at one device.

    Args:
        cell: victim cell index.
        role: "near" or "far", selecting which device of that cell.
    """
    if not 0 <= cell < chan.num_cells:
        raise IndexError(f"cell index {cell} out of range for K={chan.num_cells}")
    if role == "near":
        gains = chan.g_cross_near[cell]
    elif role == "far":
        gains = chan.g_cross_far[cell]
    else:
        raise ValueError(f"role must be 'near' or 'far', got {role!r}")
    return float(gains @ alloc.power)


def compute_sinrs(alloc: AllocationState, chan: ChannelRealization,
                  params: SystemParams) -> Sinrs:
    """Evaluate all per-cell SINRs for one allocation.

    The near device decodes its own signal after imperfect SIC, leaving a
    residual sic_error fraction of the far signal's received power as
    interference. The far device decodes directly, so the near signal
    (including its reflected tag component) interferes at full strength.
    """
    d_near, d_far = interference_powers(alloc, chan)
    sig2 = params.noise_variance
    p, li, lj, phi = alloc.power, alloc.pac_near, alloc.pac_far, alloc.reflection

    eff_near = chan.g_near + phi * chan.cascade_near
    eff_far = chan.g_far + phi * chan.cascade_far

    g_near_self = (p * li * eff_near) / (p * lj * chan.g_near * params.sic_error + d_near + sig2)
    g_far = (p * lj * eff_far) / (p * li * eff_far + d_far + sig2)
    # Diagnostic-only SINR of the near device while decoding the far signal;
    # the reflected term rides on the numerator without the PAC split.
    g_near_dec_far = (p * lj * chan.g_near + phi * chan.cascade_near) / (
        p * li * eff_near + d_near + sig2
    )
    return Sinrs(
        sinr_near_self=g_near_self,
        sinr_far=g_far,
        sinr_near_decodes_far=g_near_dec_far,
        interference_near=d_near,
        interference_far=d_far,
    )


def sinr_near_self(alloc: AllocationState, chan: ChannelRealization,
                   params: SystemParams, cell: int) -> float:
    return float(compute_sinrs(alloc, chan, params).sinr_near_self[cell])


def sinr_far(alloc: AllocationState, chan: ChannelRealization,
             params: SystemParams, cell: int) -> float:
    return float(compute_sinrs(alloc, chan, params).sinr_far[cell])


def sinr_near_decodes_far(alloc: AllocationState, chan: ChannelRealization,
                          params: SystemParams, cell: int) -> float:
    return float(compute_sinrs(alloc, chan, params).sinr_near_decodes_far[cell])


def compute_metrics(alloc: AllocationState, chan: ChannelRealization,
                    params: SystemParams) -> Metrics:
    """Shannon rates per device and the network total energy efficiency.

    Energy efficiency is the sum over cells of cell sum-rate divided by
    that cell's consumed power P_k*(pac_near+pac_far) + circuit_power,
    in bits/s/Hz per watt.
    """
    s = compute_sinrs(alloc, chan, params)
    rate_near = np.log2(1.0 + s.sinr_near_self)
    rate_far = np.log2(1.0 + s.sinr_far)
    rate_sum = rate_near + rate_far
    consumed = alloc.power * (alloc.pac_near + alloc.pac_far) + params.circuit_power
    ee = float(np.sum(rate_sum / consumed))
    return Metrics(rate_near=rate_near, rate_far=rate_far, rate_sum=rate_sum, ee_total=ee)


def check_feasibility(alloc: AllocationState, chan: ChannelRealization,
                      params: SystemParams, atol: float = 0.0) -> FeasibilityReport:
    """Evaluate every constraint of the allocation problem literally.

    The rate floors are checked in their received-power form: the wanted
    signal power must be at least (2**r_min - 1) times the interference-
    plus-noise it is decoded against.
    """
    d_near, d_far = interference_powers(alloc, chan)
    sig2 = params.noise_variance
    rho = params.rate_floor_factor
    p, li, lj, phi = alloc.power, alloc.pac_near, alloc.pac_far, alloc.reflection

    eff_near = chan.g_near + phi * chan.cascade_near
    eff_far = chan.g_far + phi * chan.cascade_far

    lhs_near = p * li * eff_near
    rhs_near = rho * (chan.g_near * p * lj * params.sic_error + d_near + sig2)
    lhs_far = p * lj * eff_far
    rhs_far = rho * (p * li * eff_far + d_far + sig2)

    return FeasibilityReport(
        rate_floor_near=lhs_near >= rhs_near - atol,
        rate_floor_far=lhs_far >= rhs_far - atol,
        sic_order=p * li <= p * lj + atol,
        power_budget=(p >= -atol) & (p <= params.p_max + atol),
        pac_budget=li + lj <= 1.0 + atol,
        reflection_range=(phi >= -atol) & (phi <= 1.0 + atol),
        rate_floor_near_violation=np.maximum(0.0, rhs_near - lhs_near),
        rate_floor_far_violation=np.maximum(0.0, rhs_far - lhs_far),
    )
