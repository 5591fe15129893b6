import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import heatmeasure as hm


@pytest.fixture(scope="session")
def region():
    return hm.ControlRegion(0.25, 0.75, 0.25, 1.25)


@pytest.fixture(scope="session")
def coarse_grid():
    """The 4 x 12 source-identification grid: h = 1/4, tau = 1/8, T = 3/2."""
    return hm.build_grid(0.0, 1.0, 1.5, 3, hm.equidistant_time_points(1.5, 12))


@pytest.fixture(scope="session")
def source():
    return hm.PointSource(0.5, 0.5, 1.0)


@pytest.fixture(scope="session")
def coarse_yd(coarse_grid, source):
    return hm.sample_desired_state(
        coarse_grid, lambda x, t: hm.fourier_heat_dirac(source, x, t, 200)
    )


@pytest.fixture(scope="session")
def vd_system(coarse_grid, region):
    return hm.assemble_vd_system(coarse_grid, region)


@pytest.fixture(scope="session")
def dg_system(coarse_grid, region):
    return hm.assemble_dg_system(coarse_grid, region)


@pytest.fixture(scope="session")
def tiny_grid():
    """Small instance for oracle comparisons: N_h = 3, N_tau = 4 on T = 1."""
    return hm.build_grid(0.0, 1.0, 1.0, 3, hm.equidistant_time_points(1.0, 4))


@pytest.fixture(scope="session")
def tiny_region():
    return hm.ControlRegion(0.25, 0.75, 0.25, 0.75)


@pytest.fixture(scope="session")
def tiny_yd(tiny_grid):
    """Smooth random data, seeded; low trig modes keep it resolvable."""
    rng = np.random.default_rng(42)
    coeff = rng.normal(size=(3, 2))

    def field(x, t):
        out = np.zeros(np.broadcast(np.asarray(x), np.asarray(t)).shape)
        for m in range(3):
            for n in range(2):
                out = out + coeff[m, n] * np.sin((m + 1) * np.pi * x) * np.cos(n * np.pi * t)
        return out

    return hm.sample_desired_state(tiny_grid, field)
