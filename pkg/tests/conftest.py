import time

import numpy as np
import pytest

from dnchar.boundary import BoundaryFunction, GridSpec
from dnchar.meshes import mesh_torus_minus_cap
from dnchar.solvers import dn_disk, fourier_dn_from_mesh


@pytest.fixture(scope="session")
def grid16():
    return GridSpec(16)


@pytest.fixture(scope="session")
def disk16(grid16):
    return dn_disk(grid16)


@pytest.fixture(scope="session")
def torus_build():
    """Torus minus a cap at h = 0.1, N = 16, with its wall-clock build time."""
    t0 = time.perf_counter()
    mesh = mesh_torus_minus_cap(2.0, 1.0, 0.1)
    op = fourier_dn_from_mesh(mesh, 16)
    op = op.with_matrix(op.matrix, source="fem", surface="torus", h=0.1)
    return mesh, op, time.perf_counter() - t0


@pytest.fixture(scope="session")
def torus16(torus_build):
    return torus_build[1]


def mode(n, grid):
    return BoundaryFunction.mode(n, grid)


def random_function(rng, grid, decay=1.0, real=False):
    n = grid.wavenumbers
    c = (rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size)) * np.exp(-decay * np.abs(n) / 4)
    f = BoundaryFunction(grid, c)
    if real:
        f = (f + f.conj()) * 0.5
    return f
