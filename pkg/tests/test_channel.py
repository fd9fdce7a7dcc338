"""Topology construction and seeded channel statistics."""

import numpy as np
import pytest
from scipy import stats

from bsnoma.channel import (
    LayoutConfig,
    Topology,
    build_topology,
    derive_seed,
    path_gain,
    sample_channels,
)
from bsnoma.model import SystemParams


class TestLayoutValidation:
    def test_zero_spacing_rejected(self):
        with pytest.raises(ValueError):
            LayoutConfig(spacing=0.0)

    def test_near_must_be_closer(self):
        with pytest.raises(ValueError):
            LayoutConfig(d_near=50.0, d_far=40.0)

    def test_negative_ref_rejected(self):
        with pytest.raises(ValueError):
            LayoutConfig(ref_distance=-1.0)


class TestTopology:
    def test_single_cell_has_no_cross_links(self):
        topo = build_topology(SystemParams(num_cells=1), LayoutConfig())
        assert topo.num_cells == 1
        assert topo.cross_near.shape == (1, 1)
        assert topo.cross_near[0, 0] == 0.0

    def test_four_cell_grid(self):
        layout = LayoutConfig(spacing=100.0)
        topo = build_topology(SystemParams(num_cells=4), LayoutConfig(spacing=100.0))
        assert topo.source_xy.shape == (4, 2)
        # 2x2 grid corners
        assert np.allclose(sorted(map(tuple, topo.source_xy.tolist())),
                           [(0, 0), (0, 100), (100, 0), (100, 100)])
        # K*(K-1) ordered cross pairs per device role
        assert np.count_nonzero(topo.cross_near) == 12
        assert np.count_nonzero(topo.cross_far) == 12
        assert np.all(topo.cross_near[~np.eye(4, dtype=bool)] > 0)

    def test_deterministic(self):
        a = build_topology(SystemParams(num_cells=6), LayoutConfig())
        b = build_topology(SystemParams(num_cells=6), LayoutConfig())
        assert np.array_equal(a.source_xy, b.source_xy)
        assert np.array_equal(a.cross_near, b.cross_near)

    def test_intra_distances_from_config(self):
        layout = LayoutConfig()
        topo = build_topology(SystemParams(num_cells=3), layout)
        assert np.all(topo.d_near == layout.d_near)
        assert np.all(topo.d_tag_far == layout.d_tag_far)


class TestPathGain:
    def test_reference_distance_unit_gain(self):
        assert path_gain(10.0, 3.0, ref_distance=10.0) == pytest.approx(1.0)

    def test_exponent(self):
        assert path_gain(20.0, 2.0, ref_distance=10.0) == pytest.approx(0.25)


class TestSampling:
    def test_identical_seed_identical_realization(self):
        params = SystemParams(num_cells=5)
        topo = build_topology(params, LayoutConfig())
        a = sample_channels(topo, params, 123)
        b = sample_channels(topo, params, 123)
        for name in ("g_near", "g_far", "g_src_tag", "g_tag_near", "g_tag_far",
                     "g_cross_near", "g_cross_far"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_different_seeds_differ(self):
        params = SystemParams(num_cells=5)
        topo = build_topology(params, LayoutConfig())
        a = sample_channels(topo, params, 1)
        b = sample_channels(topo, params, 2)
        assert not np.array_equal(a.g_near, b.g_near)

    def test_ordering_invariant(self):
        params = SystemParams(num_cells=50)
        topo = build_topology(params, LayoutConfig())
        for seed in range(20):
            chan = sample_channels(topo, params, seed)
            assert np.all(chan.g_near >= chan.g_far)

    def test_unit_distance_fading_mean(self):
        # law of large numbers: mean squared fading = 1 within 2% on 1e5 draws
        layout = LayoutConfig(d_src_tag=LayoutConfig().ref_distance)
        params = SystemParams(num_cells=100)
        topo = build_topology(params, layout)
        draws = np.concatenate([
            sample_channels(topo, params, 10_000 + s).g_src_tag for s in range(1000)
        ])
        assert draws.size == 100_000
        assert abs(draws.mean() - 1.0) <= 0.02

    def test_pathloss_scaling_of_means(self):
        # doubling the distance divides the mean gain by 2**exponent (5% tol)
        params = SystemParams(num_cells=100, path_loss_exp=2.0)
        near = build_topology(params, LayoutConfig(d_src_tag=20.0))
        far = build_topology(params, LayoutConfig(d_src_tag=40.0))
        a = np.concatenate([sample_channels(near, params, 5_000 + s).g_src_tag
                            for s in range(1000)])
        b = np.concatenate([sample_channels(far, params, 5_000 + s).g_src_tag
                            for s in range(1000)])
        assert a.size == b.size == 100_000
        assert abs(a.mean() / b.mean() - 4.0) <= 0.2

    def test_fading_is_unit_exponential(self):
        # KS test against Exp(1) at significance 0.01 on 1e4 samples
        layout = LayoutConfig(d_src_tag=LayoutConfig().ref_distance)
        params = SystemParams(num_cells=100)
        topo = build_topology(params, layout)
        draws = np.concatenate([
            sample_channels(topo, params, 40_000 + s).g_src_tag for s in range(100)
        ])
        res = stats.kstest(draws, "expon")
        assert res.pvalue > 0.01

    def test_derived_seeds(self):
        assert derive_seed(5, 0) == 5
        assert derive_seed(5, 3) == 5 ^ 3
        assert derive_seed(2**63, 1) == (2**63) ^ 1

    def test_mismatched_cells_rejected(self):
        topo = build_topology(SystemParams(num_cells=2), LayoutConfig())
        with pytest.raises(ValueError):
            sample_channels(topo, SystemParams(num_cells=3), 0)
