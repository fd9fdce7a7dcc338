"""Network geometry and seeded Rayleigh channel generation.

Squared small-scale fading magnitudes are drawn directly as Exp(1) (the
squared magnitude of a unit-variance circular complex Gaussian), then scaled
by (distance / ref_distance) ** -path_loss_exp. Sampling uses the
counter-based Philox generator so identical seeds reproduce identical draws
on any platform, and trial seeds can be derived independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from bsnoma.model import ChannelRealization, SystemParams

RNG_ALGORITHM = "philox4x64"


@dataclass(frozen=True)
class LayoutConfig:
    """Deterministic placement defaults, all in meters.

    Sources sit on a square grid with ``spacing`` between neighbours. Devices
    are placed on a per-cell deterministic bearing at the configured radii;
    the tag's link distances are taken from the config directly. Path loss is
    computed on distance normalized by ``ref_distance``, which sets the scale
    at which a link has unit mean gain.

    The defaults put the network in the operating regime the solver is
    validated for: mean direct gains 0.125 (near) and 0.028 (far), a tag
    cascade worth roughly 20%/30% of the respective direct link, and
    inter-cell coupling about two orders below the intra-cell signal, so
    EE saturates in the 12-20 dBm budget range and per-device rate floors
    up to ~1.5 bits/s/Hz remain individually attainable.
    """

    spacing: float = 200.0
    d_near: float = 20.0
    d_far: float = 33.0
    d_src_tag: float = 15.0
    d_tag_near: float = 23.0
    d_tag_far: float = 32.0
    ref_distance: float = 10.0

    def __post_init__(self):
        for name in ("spacing", "d_near", "d_far", "d_src_tag",
                     "d_tag_near", "d_tag_far", "ref_distance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.d_near >= self.d_far:
            raise ValueError("d_near must be < d_far")


@dataclass(frozen=True)
class Topology:
    """Distances of every link in the network.

    Cross matrices are (K, K) with entry [k, kp] the distance from source kp
    to the given device of cell k; diagonals are zero placeholders.
    """

    source_xy: np.ndarray
    d_near: np.ndarray
    d_far: np.ndarray
    d_src_tag: np.ndarray
    d_tag_near: np.ndarray
    d_tag_far: np.ndarray
    cross_near: np.ndarray
    cross_far: np.ndarray
    ref_distance: float

    @property
    def num_cells(self) -> int:
        return len(self.d_near)


def build_topology(params: SystemParams, layout: LayoutConfig) -> Topology:
    """Place K sources on a square grid and their devices around them.

    Device bearings rotate deterministically with the cell index so that
    cross distances are not artificially symmetric. The construction is a
    pure function of (params.num_cells, layout).
    """
    k = params.num_cells
    side = math.ceil(math.sqrt(k))
    idx = np.arange(k)
    source_xy = np.stack([(idx % side) * layout.spacing,
                          (idx // side) * layout.spacing], axis=1).astype(float)

    theta = 2.0 * math.pi * idx / max(k, 1)
    near_xy = source_xy + layout.d_near * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    far_xy = source_xy + layout.d_far * np.stack([np.cos(theta + math.pi), np.sin(theta + math.pi)], axis=1)

    diff_near = near_xy[:, None, :] - source_xy[None, :, :]
    diff_far = far_xy[:, None, :] - source_xy[None, :, :]
    cross_near = np.linalg.norm(diff_near, axis=2)
    cross_far = np.linalg.norm(diff_far, axis=2)
    np.fill_diagonal(cross_near, 0.0)
    np.fill_diagonal(cross_far, 0.0)

    ones = np.ones(k)
    return Topology(
        source_xy=source_xy,
        d_near=layout.d_near * ones,
        d_far=layout.d_far * ones,
        d_src_tag=layout.d_src_tag * ones,
        d_tag_near=layout.d_tag_near * ones,
        d_tag_far=layout.d_tag_far * ones,
        cross_near=cross_near,
        cross_far=cross_far,
        ref_distance=layout.ref_distance,
    )


def derive_seed(seed: int, trial: int) -> int:
    """Independent per-trial Philox key: base seed XOR trial index."""
    return (int(seed) ^ int(trial)) & 0xFFFFFFFFFFFFFFFF


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF))


def path_gain(distance, path_loss_exp: float, ref_distance: float = 1.0):
    """Mean squared channel gain (distance / ref_distance) ** -exponent."""
    return (np.asarray(distance, dtype=float) / ref_distance) ** (-path_loss_exp)


def sample_channels(topo: Topology, params: SystemParams, seed: int) -> ChannelRealization:
    """Draw one network realization of all squared channel gains.

    Each gain is an independent Exp(1) fading draw scaled by path loss.
    Within every cell the device with the larger direct gain is relabelled
    "near" afterwards so the SIC decoding order holds by construction; the
    tag-to-device links follow the relabelling.
    """
    if topo.num_cells != params.num_cells:
        raise ValueError("topology and params disagree on the number of cells")
    k = topo.num_cells
    rng = _rng(seed)
    ple, ref = params.path_loss_exp, topo.ref_distance

    g_near = rng.exponential(1.0, k) * path_gain(topo.d_near, ple, ref)
    g_far = rng.exponential(1.0, k) * path_gain(topo.d_far, ple, ref)
    g_src_tag = rng.exponential(1.0, k) * path_gain(topo.d_src_tag, ple, ref)
    g_tag_near = rng.exponential(1.0, k) * path_gain(topo.d_tag_near, ple, ref)
    g_tag_far = rng.exponential(1.0, k) * path_gain(topo.d_tag_far, ple, ref)

    cross_shape = (k, k)
    with np.errstate(divide="ignore"):
        pg_near = np.where(topo.cross_near > 0, path_gain(np.where(topo.cross_near > 0, topo.cross_near, 1.0), ple, ref), 0.0)
        pg_far = np.where(topo.cross_far > 0, path_gain(np.where(topo.cross_far > 0, topo.cross_far, 1.0), ple, ref), 0.0)
    g_cross_near = rng.exponential(1.0, cross_shape) * pg_near
    g_cross_far = rng.exponential(1.0, cross_shape) * pg_far
    np.fill_diagonal(g_cross_near, 0.0)
    np.fill_diagonal(g_cross_far, 0.0)

    # Relabel so the stronger direct link is the near user in every cell.
    swap = g_near < g_far
    if np.any(swap):
        g_near, g_far = np.where(swap, g_far, g_near), np.where(swap, g_near, g_far)
        g_tag_near, g_tag_far = (np.where(swap, g_tag_far, g_tag_near),
                                 np.where(swap, g_tag_near, g_tag_far))
        sw = swap[:, None]
        g_cross_near, g_cross_far = (np.where(sw, g_cross_far, g_cross_near),
                                     np.where(sw, g_cross_near, g_cross_far))

    return ChannelRealization(
        g_near=g_near, g_far=g_far, g_src_tag=g_src_tag,
        g_tag_near=g_tag_near, g_tag_far=g_tag_far,
        g_cross_near=g_cross_near, g_cross_far=g_cross_far,
    )
