"""Triangulated surfaces with one boundary loop, plus test-geometry generators."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

from .errors import DegenerateMesh


@dataclass(frozen=True)
class SurfaceMesh:
    vertices: np.ndarray        # (V, 3)
    triangles: np.ndarray       # (F, 3), consistently oriented
    boundary_loop: np.ndarray   # ordered, surface on the left
    conformal_factor: np.ndarray | None = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    def boundary_arclength(self):
        """Cumulative arclength at each boundary vertex and the total length."""
        p = self.vertices[self.boundary_loop]
        seg = np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)[:-1]]), float(seg.sum())

    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_loop] = False
        return np.flatnonzero(mask)

    def validate(self) -> "SurfaceMesh":
        validate_mesh(self)
        return self


def oriented_boundary_loop(triangles: np.ndarray) -> np.ndarray:
    """Chain the boundary half-edges into a loop; raises unless there is exactly one."""
    triangles = np.asarray(triangles, dtype=np.int64)
    half = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    n = int(triangles.max()) + 1
    undirected = np.sort(half, axis=1)
    ukeys, inverse, counts = np.unique(undirected[:, 0] * n + undirected[:, 1],
                                       return_inverse=True, return_counts=True)
    if counts.max() > 2:
        raise DegenerateMesh("an edge is shared by more than two triangles")
    dkeys = half[:, 0] * n + half[:, 1]
    if len(np.unique(dkeys)) != len(dkeys):
        raise DegenerateMesh("inconsistent triangle orientation")
    bnd = half[counts[inverse.ravel()] == 1]
    if len(bnd) == 0:
        raise DegenerateMesh("surface has no boundary")
    if len(np.unique(bnd[:, 0])) != len(bnd):
        raise DegenerateMesh("boundary is not a simple cycle (pinched vertex)")
    nxt = dict(zip(bnd[:, 0].tolist(), bnd[:, 1].tolist()))
    start = min(nxt)
    loop = [start]
    while True:
        v = nxt.get(loop[-1])
        if v is None:
            raise DegenerateMesh("boundary chain does not close")
        if v == start:
            break
        loop.append(v)
        if len(loop) > len(nxt):
            raise DegenerateMesh("boundary chain does not close")
    if len(loop) != len(nxt):
        raise DegenerateMesh(f"boundary has {len(nxt)} edges but the first loop has {len(loop)}: "
                             "more than one boundary component")
    return np.asarray(loop, dtype=int)


def validate_mesh(mesh: SurfaceMesh) -> None:
    if mesh.vertices.ndim != 2 or mesh.vertices.shape[1] != 3:
        raise DegenerateMesh("vertices must be an (V, 3) array")
    if np.any(mesh.triangle_areas() <= 1e-14 * max(1.0, mesh.triangle_areas().max())):
        raise DegenerateMesh("triangle with non-positive area")
    loop = oriented_boundary_loop(mesh.triangles)
    k = int(np.flatnonzero(loop == mesh.boundary_loop[0])[0]) if mesh.boundary_loop[0] in loop else -1
    if k < 0 or not np.array_equal(np.roll(loop, -k), mesh.boundary_loop):
        raise DegenerateMesh("boundary_loop does not match the oriented boundary cycle")
    rho = mesh.conformal_factor
    if rho is not None:
        rho = np.asarray(rho, dtype=float)
        if rho.shape != (mesh.n_vertices,):
            raise DegenerateMesh("conformal_factor needs one value per vertex")
        if np.any(rho <= 0):
            raise DegenerateMesh("conformal_factor must be positive")
        if np.abs(rho[mesh.boundary_loop] - 1.0).max() > 1e-12:
            raise DegenerateMesh("conformal_factor must equal 1 on the boundary")


def _make(vertices, triangles, conformal_factor=None) -> SurfaceMesh:
    triangles = np.asarray(triangles, dtype=int)
    mesh = SurfaceMesh(np.asarray(vertices, dtype=float), triangles,
                       oriented_boundary_loop(triangles), conformal_factor)
    validate_mesh(mesh)
    return mesh


def _orient_ccw(points2d: np.ndarray, tri: np.ndarray) -> np.ndarray:
    p = points2d[tri]
    cross = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
             - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    tri = tri.copy()
    flip = cross < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    return tri


def mesh_disk(h: float, radius: float = 1.0) -> SurfaceMesh:
    """Unit disk from concentric rings of spacing ``h``; boundary vertices lie on the circle."""
    if not 0 < h < radius:
        raise DegenerateMesh(f"edge length {h} incompatible with radius {radius}")
    n_rings = max(2, int(round(radius / h)))
    pts = [np.zeros((1, 2))]
    for k in range(1, n_rings + 1):
        r = radius * k / n_rings
        m = max(6, int(round(2 * np.pi * r / h)))
        a = 2 * np.pi * (np.arange(m) + 0.5 * (k % 2)) / m
        pts.append(np.column_stack([r * np.cos(a), r * np.sin(a)]))
    pts = np.concatenate(pts)
    tri = _orient_ccw(pts, Delaunay(pts).simplices)
    return _make(np.column_stack([pts, np.zeros(len(pts))]), tri)


# -- torus with a cap removed ---------------------------------------------
#
# The torus of revolution is conformally flat in (u, t), dt = r dv / (R + r cos v);
# points are laid out with 3D spacing ~h and triangulated by a periodic Delaunay
# triangulation in (u, t), which is well shaped in 3D because the map is conformal.

def _torus_t_of_v(v, R, r):
    a = np.sqrt(R * R - r * r)
    v = np.asarray(v, dtype=float)
    turns = np.floor((v + np.pi) / (2 * np.pi))
    w = v - 2 * np.pi * turns
    t = 2 * r / a * np.arctan(np.sqrt((R - r) / (R + r)) * np.tan(w / 2))
    return t + turns * 2 * np.pi * r / a


def _torus_v_of_t(t, R, r):
    a = np.sqrt(R * R - r * r)
    period = 2 * np.pi * r / a
    t = np.asarray(t, dtype=float)
    turns = np.floor((t + period / 2) / period)
    w = t - turns * period
    v = 2 * np.arctan(np.sqrt((R + r) / (R - r)) * np.tan(w * a / (2 * r)))
    return v + 2 * np.pi * turns


def torus_embedding(u, v, R, r) -> np.ndarray:
    rho = R + r * np.cos(v)
    return np.column_stack([rho * np.cos(u), rho * np.sin(u), r * np.sin(v)])


def mesh_torus_minus_cap(R: float = 2.0, r: float = 1.0, h: float = 0.2,
                         cap_radius: float | None = None,
                         boundary_h: float | None = None,
                         grading: float = 0.05) -> SurfaceMesh:
    """Torus of revolution with a round cap around an outer-equator point removed.

    ``cap_radius`` is the radius of the removed cap measured in the chart at
    the cap centre, in 3D units (default ``2.2 r``).  Vertices near the cut
    are graded from spacing ``boundary_h`` (default ``h / 32``) up to ``h`` at
    rate ``grading``, which resolves the boundary layer of oscillatory
    Dirichlet data.  The cut is a circle in the conformal chart.
    """
    if not 0 < r < R:
        raise DegenerateMesh("need 0 < r < R")
    cap = 2.2 * r if cap_radius is None else cap_radius
    hb = h / 32 if boundary_h is None else boundary_h
    if h <= 0 or h > 0.25 * np.pi * r or cap < 2 * h or cap > 0.8 * np.pi * r or not 0 < hb <= h:
        raise DegenerateMesh(f"h={h} too coarse for a torus with r={r} and cap radius {cap}")
    period_t = 2 * np.pi * r / np.sqrt(R * R - r * r)
    sigma_c = R + r          # conformal factor at the cap centre (outer equator)
    centre = np.array([np.pi, 0.0])
    rad_param = cap / sigma_c

    def wrapped(p):
        d = p - centre
        d[:, 0] -= 2 * np.pi * np.round(d[:, 0] / (2 * np.pi))
        d[:, 1] -= period_t * np.round(d[:, 1] / period_t)
        return d

    # graded rings around the cut, in chart units; the grading rate is raised
    # when the band would otherwise wrap around the short period
    band_max = (0.5 * min(2 * np.pi, period_t) - rad_param) * sigma_c - 2 * h
    if band_max <= h:
        raise DegenerateMesh("cap too large for the torus")
    grading = max(grading, (h - hb) / band_max)
    rings = []
    rho, step, k = rad_param, hb / sigma_c, 0
    while True:
        n_ring = max(12, int(np.ceil(2 * np.pi * rho / step)))
        a = 2 * np.pi * (np.arange(n_ring) + 0.5 * (k % 2)) / n_ring
        rings.append(centre + rho * np.column_stack([np.cos(a), np.sin(a)]))
        if step * sigma_c >= h:
            break
        rho += step
        step = min(step * (1 + grading), h / sigma_c)
        k += 1
    outer = rho

    n_v = int(round(2 * np.pi * r / h))
    bg = []
    for j in range(n_v):
        v = 2 * np.pi * (j + 0.5) / n_v
        sigma = R + r * np.cos(v)
        n_u = max(6, int(round(2 * np.pi * sigma / h)))
        u = 2 * np.pi * (np.arange(n_u) + 0.5 * (j % 2)) / n_u
        bg.append(np.column_stack([u, np.full(n_u, float(_torus_t_of_v(v, R, r)))]))
    bg = np.concatenate(bg)
    bg[:, 1] = np.mod(bg[:, 1], period_t)
    d = wrapped(bg)
    sig = R + r * np.cos(_torus_v_of_t(bg[:, 1], R, r))
    bg = bg[np.hypot(d[:, 0], d[:, 1]) > outer + 0.7 * h / sig]
    if outer + h / sigma_c > 0.5 * min(2 * np.pi, period_t):
        raise DegenerateMesh("cap too large for the torus")
    pts = np.concatenate(rings + [bg])
    pts = np.mod(pts, [2 * np.pi, period_t])
    n = len(pts)

    # periodic Delaunay: the cell plus a band of translated copies around it
    margin = 6 * h / (R - r)
    copies, index = [pts], [np.arange(n)]
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            if i == j == 0:
                continue
            q = pts + np.array([2 * np.pi * i, period_t * j])
            near = np.all((q > [-margin, -margin]) & (q < [2 * np.pi + margin, period_t + margin]),
                          axis=1)
            copies.append(q[near])
            index.append(np.flatnonzero(near))
    tiled = np.concatenate(copies)
    index = np.concatenate(index)
    tri = _orient_ccw(tiled, Delaunay(tiled).simplices)
    cent = tiled[tri].mean(axis=1)
    origin = np.array([0.1234567, 0.0765432])
    in_cell = np.all((cent >= origin) & (cent < origin + [2 * np.pi, period_t]), axis=1)
    tri = tri[in_cell]
    dc = wrapped(tiled[tri].mean(axis=1))
    tri = tri[np.hypot(dc[:, 0], dc[:, 1]) > rad_param]
    tri = index[tri]

    v = _torus_v_of_t(pts[:, 1], R, r)
    verts = torus_embedding(pts[:, 0], v, R, r)
    try:
        mesh = _make(verts, tri)
    except DegenerateMesh as exc:
        raise DegenerateMesh(f"torus mesh generation failed at h={h}: {exc}") from exc
    if mesh.euler_characteristic() != -1:
        raise DegenerateMesh(f"unexpected Euler characteristic {mesh.euler_characteristic()}")
    return mesh


def displace_interior(mesh: SurfaceMesh, field) -> SurfaceMesh:
    """New mesh with interior vertices moved by ``field(vertices)``; boundary fixed."""
    v = mesh.vertices.copy()
    idx = mesh.interior_vertices()
    v[idx] += np.asarray(field(v[idx]))
    out = SurfaceMesh(v, mesh.triangles, mesh.boundary_loop, mesh.conformal_factor)
    validate_mesh(out)
    return out


# -- OFF io ---------------------------------------------------------------

def read_off(path, sidecar=None) -> SurfaceMesh:
    """Read an ASCII OFF triangle mesh, with an optional JSON conformal-factor sidecar."""
    words = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            words.extend(line.split())
    if not words or words[0] != "OFF":
        raise DegenerateMesh("not an OFF file")
    try:
        nv, nf = int(words[1]), int(words[2])
        pos = 4
        verts = np.asarray(words[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            k = int(words[pos])
            if k != 3:
                raise DegenerateMesh("only triangular faces are supported")
            faces.append([int(w) for w in words[pos + 1:pos + 4]])
            pos += 1 + k
    except (IndexError, ValueError) as exc:
        raise DegenerateMesh(f"malformed OFF file: {exc}") from exc
    faces = np.asarray(faces, dtype=int)
    if faces.size and (faces.min() < 0 or faces.max() >= nv):
        raise DegenerateMesh("face index out of range")
    rho = None
    if sidecar is not None:
        rho = np.asarray(json.loads(Path(sidecar).read_text())["conformal_factor"], dtype=float)
    return _make(verts, faces, rho)


def write_off(mesh: SurfaceMesh, path) -> None:
    lines = ["OFF", f"{mesh.n_vertices} {len(mesh.triangles)} 0"]
    lines += [" ".join(repr(float(x)) for x in p) for p in mesh.vertices]
    lines += ["3 " + " ".join(str(int(i)) for i in t) for t in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")
