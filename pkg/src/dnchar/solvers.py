"""Forward solvers producing Dirichlet-to-Neumann operators."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .boundary import GridSpec
from .errors import SingularInterior, Underresolved
from .meshes import SurfaceMesh, validate_mesh
from .operators import BoundaryOperator, calibrate_orientation, realify


def dn_disk(grid: GridSpec) -> BoundaryOperator:
    """Closed-form DN map of the unit disk: mode ``n`` is scaled by ``|n|``."""
    if abs(grid.length - 2 * np.pi) > 1e-12:
        raise ValueError("the closed-form disk DN map needs length 2*pi")
    mat = np.diag(np.abs(grid.wavenumbers).astype(complex))
    return BoundaryOperator(grid, mat, 1, {"source": "disk"})


def cotangent_stiffness(vertices: np.ndarray, triangles: np.ndarray) -> sp.csr_matrix:
    """P1 stiffness matrix of the Dirichlet energy, ``0.5 * sum cot(opposite angle)``."""
    n = len(vertices)
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = triangles[:, k], triangles[:, (k + 1) % 3], triangles[:, (k + 2) % 3]
        a = vertices[i] - vertices[o]
        b = vertices[j] - vertices[o]
        cot = np.einsum("ij,ij->i", a, b) / np.linalg.norm(np.cross(a, b), axis=1)
        w = 0.5 * cot
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-w, -w, w, w]
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


@dataclass(frozen=True)
class DiscreteDN:
    arclength: np.ndarray      # boundary-vertex positions along the loop
    length: float              # perimeter of the boundary polygon
    matrix: np.ndarray         # acts on boundary-vertex values
    mass: np.ndarray           # lumped boundary mass weights

    @property
    def schur(self) -> np.ndarray:
        return self.mass[:, None] * self.matrix


def dn_from_mesh(mesh: SurfaceMesh, threads: int = 1) -> DiscreteDN:
    """Discrete DN map ``M_B^{-1} (A_BB - A_BI A_II^{-1} A_IB)``.

    ``A_II`` is factorized once and reused for every boundary column.  The
    conformal factor is validated but does not enter the Dirichlet energy.
    """
    validate_mesh(mesh)
    a = cotangent_stiffness(mesh.vertices, mesh.triangles).tocsc()
    b = mesh.boundary_loop
    i = mesh.interior_vertices()
    a_bb = a[b][:, b].toarray()
    a_ib = a[i][:, b].toarray()
    schur = a_bb
    if len(i):
        try:
            lu = splu(a[i][:, i].tocsc())
        except RuntimeError as exc:
            raise SingularInterior(f"interior stiffness block is singular: {exc}") from exc
        if threads > 1:
            parts = np.array_split(np.arange(a_ib.shape[1]), threads)
            with ThreadPoolExecutor(threads) as pool:
                sols = list(pool.map(lambda p: lu.solve(a_ib[:, p]), parts))
            x = np.concatenate(sols, axis=1)
        else:
            x = lu.solve(a_ib)
        if not np.all(np.isfinite(x)):
            raise SingularInterior("interior solve produced non-finite values")
        schur = a_bb - a_ib.T @ x
    schur = 0.5 * (schur + schur.T)
    s, total = mesh.boundary_arclength()
    p = mesh.vertices[b]
    seg = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
    mass = 0.5 * (seg + np.roll(seg, 1))
    return DiscreteDN(s, total, schur / mass[:, None], mass)


def _fourier_design(s: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.exp(2j * np.pi * np.outer(s, grid.wavenumbers) / grid.length)


def _galerkin_fourier(s, length, mass, schur_times, grid: GridSpec, nb: int, meta: dict,
                      calibrate: bool) -> BoundaryOperator:
    if nb < 2 * grid.size:
        raise Underresolved(f"{nb} boundary vertices cannot resolve {grid.size} modes "
                            f"(need {2 * grid.size})")
    scale = grid.length / length
    e = _fourier_design(s * scale, grid)
    w = mass * scale
    gram = e.conj().T @ (w[:, None] * e)
    proj = e.conj().T @ schur_times(e)          # E^H W (W^{-1} S) E
    mat = np.linalg.solve(gram, proj) / scale
    op = BoundaryOperator(grid, realify(mat), 1, {"source": "fem", "boundary_vertices": nb, **meta})
    if calibrate:
        op = calibrate_orientation(op)
    return op


def to_fourier(dn: DiscreteDN, grid: GridSpec | int, calibrate: bool = True) -> BoundaryOperator:
    """Express the discrete DN map in the truncated Fourier basis.

    Boundary arclength is rescaled to ``grid.length`` and the operator by the
    inverse factor, so the result is the DN map of the uniformly rescaled
    surface.  Passing an integer uses the mesh perimeter as the length.
    """
    if isinstance(grid, (int, np.integer)):
        grid = GridSpec(int(grid), dn.length)
    return _galerkin_fourier(dn.arclength, dn.length, dn.mass, lambda e: dn.schur @ e,
                             grid, len(dn.arclength), {}, calibrate)


def fourier_dn_from_mesh(mesh: SurfaceMesh, grid: GridSpec | int,
                         calibrate: bool = True) -> BoundaryOperator:
    """Same result as ``to_fourier(dn_from_mesh(mesh), grid)`` without forming the
    boundary-vertex matrix: the Schur complement is applied to the ``2N+1``
    sampled Fourier modes only, so the cost is one sparse factorization.
    """
    validate_mesh(mesh)
    a = cotangent_stiffness(mesh.vertices, mesh.triangles).tocsc()
    b = mesh.boundary_loop
    i = mesh.interior_vertices()
    a_bb = a[b][:, b]
    a_ib = a[i][:, b]
    try:
        lu = splu(a[i][:, i].tocsc())
    except RuntimeError as exc:
        raise SingularInterior(f"interior stiffness block is singular: {exc}") from exc

    def schur_times(e):
        rhs = a_ib @ e
        x = lu.solve(np.ascontiguousarray(rhs.real)) + 1j * lu.solve(np.ascontiguousarray(rhs.imag))
        if not np.all(np.isfinite(x)):
            raise SingularInterior("interior solve produced non-finite values")
        return a_bb @ e - a_ib.T @ x

    s, total = mesh.boundary_arclength()
    p = mesh.vertices[b]
    seg = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
    mass = 0.5 * (seg + np.roll(seg, 1))
    if isinstance(grid, (int, np.integer)):
        grid = GridSpec(int(grid), total)
    return _galerkin_fourier(s, total, mass, schur_times, grid, len(b),
                             {"vertices": mesh.n_vertices}, calibrate)
