"""Shared construction helpers for the test suite."""

import numpy as np
import pytest

from bsnoma.model import AllocationState, ChannelRealization, SystemParams


def single_cell_channel(g_near, g_far, cascade_near=0.0, cascade_far=0.0):
    """One-cell realization with the tag cascade split as 1 * cascade."""
    return ChannelRealization(
        g_near=[g_near], g_far=[g_far], g_src_tag=[1.0],
        g_tag_near=[cascade_near], g_tag_far=[cascade_far],
        g_cross_near=np.zeros((1, 1)), g_cross_far=np.zeros((1, 1)),
    )


def single_cell_alloc(power, pac_near, pac_far, reflection=0.0):
    return AllocationState(power=[power], pac_near=[pac_near],
                           pac_far=[pac_far], reflection=[reflection])


@pytest.fixture
def default_params():
    return SystemParams(num_cells=1)
