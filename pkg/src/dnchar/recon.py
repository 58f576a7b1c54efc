"""Winding fields, image regions and interior evaluation from boundary data."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from skimage.measure import find_contours

from .boundary import BoundaryFunction
from .errors import EmptyRegion, NoUnivalentCandidate, OnBoundaryCurve, WindingIllConditioned
from .operators import (BoundaryOperator, KernelBasis, TolPolicy, build_upsilon,
                        build_upsilon_eta_z, calibrate_orientation, check_off_curve,
                        kernel_basis, samples_of_derivative, winding_number, winding_raw)

MASK_DIAGONALS = 1.5
SUBCELLS = 4


@dataclass
class WindingField:
    box: tuple                  # (xmin, xmax, ymin, ymax)
    resolution: tuple           # (nx, ny)
    values: np.ndarray          # (ny, nx) integers; masked cells hold the polygon winding
    mask: np.ndarray            # (ny, nx) True where the cell is too close to the curve
    orientation: int = 1
    max_defect: float = 0.0
    curve: np.ndarray = field(default=None, repr=False)   # dense samples of eta(Gamma)

    @property
    def cell_size(self) -> tuple:
        x0, x1, y0, y1 = self.box
        return (x1 - x0) / self.resolution[0], (y1 - y0) / self.resolution[1]

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        x0, x1, y0, y1 = self.box
        hx, hy = self.cell_size
        xs = x0 + hx * (np.arange(self.resolution[0]) + 0.5)
        ys = y0 + hy * (np.arange(self.resolution[1]) + 0.5)
        return xs, ys

    def value_at(self, z: complex) -> int:
        """Stored value of the cell containing ``z``."""
        x0, _, y0, _ = self.box
        hx, hy = self.cell_size
        i = int((z.imag - y0) // hy)
        j = int((z.real - x0) // hx)
        return int(self.values[i, j])


@dataclass
class RegionImage:
    field: WindingField
    inside: np.ndarray          # (ny, nx) booleans, d > 0 (masked cells by polygon winding)
    fraction: np.ndarray        # (ny, nx) covered fraction of each cell
    polylines: list             # boundary curves as (k, 2) arrays of (x, y)
    area: float
    multiplicity: int           # largest d found


def _dense_curve(eta: BoundaryFunction, spacing: float) -> np.ndarray:
    speed = np.abs(samples_of_derivative(eta, 4 * eta.grid.size)).max()
    m = int(np.clip(np.ceil(speed * eta.length / spacing), 8 * eta.grid.size, 1 << 20))
    return eta.fine_samples(m)


def polygon_winding(poly: np.ndarray, z: np.ndarray, orientation: int = 1) -> np.ndarray:
    """Winding of a closed polygon about each point, by signed crossings of a
    rightward ray.  Points are grouped by ordinate, so rows of a grid share
    one intersection pass."""
    z = np.asarray(z, dtype=complex).ravel()
    out = np.zeros(z.size, dtype=int)
    ax, ay = poly.real, poly.imag
    bx, by = np.roll(ax, -1), np.roll(ay, -1)
    ys, inv = np.unique(z.imag, return_inverse=True)
    for k, y in enumerate(ys):
        up = (ay <= y) & (by > y)
        down = (ay > y) & (by <= y)
        hit = up | down
        t = (y - ay[hit]) / (by[hit] - ay[hit])
        xc = ax[hit] + t * (bx[hit] - ax[hit])
        sign = np.where(up[hit], 1, -1)
        idx = np.flatnonzero(inv == k)
        out[idx] = ((xc[None, :] > z.real[idx, None]) * sign[None, :]).sum(axis=1)
    return orientation * out


def default_box(eta: BoundaryFunction, margin: float = 0.25) -> tuple:
    pts = eta.fine_samples(16 * eta.grid.size)
    x0, x1, y0, y1 = pts.real.min(), pts.real.max(), pts.imag.min(), pts.imag.max()
    pad = margin * max(x1 - x0, y1 - y0, 1e-12)
    return (x0 - pad, x1 + pad, y0 - pad, y1 + pad)


def winding_field(eta: BoundaryFunction, box: tuple | None = None, resolution=256,
                  orientation: int = 1, threads: int = 1) -> WindingField:
    """Winding number of ``eta(Gamma)`` at every cell center of a grid.

    Cells closer than 1.5 cell diagonals to the curve are masked; they carry
    the winding of a dense polygon instead of the quadrature value.
    """
    if np.isscalar(resolution):
        resolution = (int(resolution), int(resolution))
    nx, ny = resolution
    if box is None:
        box = default_box(eta)
    box = tuple(float(b) for b in box)
    x0, x1, y0, y1 = box
    pts = eta.fine_samples(16 * eta.grid.size)
    span = max(pts.real.max() - pts.real.min(), pts.imag.max() - pts.imag.min())
    need = 0.1 * span
    if (pts.real.min() - x0 < need or x1 - pts.real.max() < need
            or pts.imag.min() - y0 < need or y1 - pts.imag.max() < need):
        raise ValueError("box must contain the curve with a 10% margin")
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    diag = float(np.hypot(hx, hy))
    curve = _dense_curve(eta, 0.1 * diag)
    xs = x0 + hx * (np.arange(nx) + 0.5)
    ys = y0 + hy * (np.arange(ny) + 0.5)
    zz = (xs[None, :] + 1j * ys[:, None]).ravel()
    tree = cKDTree(np.column_stack([curve.real, curve.imag]))
    dist = tree.query(np.column_stack([zz.real, zz.imag]))[0] - 0.01 * diag
    mask = dist < MASK_DIAGONALS * diag
    values = np.zeros(zz.size, dtype=int)
    free = np.flatnonzero(~mask)

    # trapezoid samples scale with 1/distance; cells are bucketed by power-of-two counts
    speed = np.abs(samples_of_derivative(eta, 4 * eta.grid.size)).max()
    need = 8 * speed * eta.length / np.maximum(dist[free], MASK_DIAGONALS * diag)
    base = 8 * eta.grid.size
    level = np.ceil(np.log2(np.maximum(need / base, 1.0))).astype(int)
    jobs = []
    for lv in np.unique(level):
        idx = free[level == lv]
        m = int(min(base << int(lv), 1 << 18))
        jobs += [(m, part) for part in np.array_split(idx, max(1, threads))]

    def run(job):
        m, part = job
        return winding_raw(eta, zz[part], m, orientation)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            raws = list(pool.map(run, jobs))
    else:
        raws = [run(j) for j in jobs]
    order = np.concatenate([p for _, p in jobs]) if jobs else np.zeros(0, dtype=int)
    raw = np.zeros(zz.size, dtype=complex)
    if jobs:
        raw[order] = np.concatenate(raws)
    raw = raw[free]
    rounded = np.rint(raw.real).astype(int)
    defect = float(np.abs(raw - rounded).max()) if raw.size else 0.0
    values[free] = rounded
    if mask.any():
        values[mask] = polygon_winding(curve, zz[mask], orientation)
    return WindingField(box, (nx, ny), values.reshape(ny, nx), mask.reshape(ny, nx),
                        orientation, defect, curve)


def image_region(fld: WindingField) -> RegionImage:
    """Cells with ``d > 0``, their boundary polylines and the covered area.

    Unmasked cells count fully; masked (boundary) cells are weighted by the
    fraction of a 4x4 sub-grid lying where the polygon winding is positive.
    """
    inside = fld.values > 0
    if not inside.any():
        raise EmptyRegion("no cell has positive winding")
    hx, hy = fld.cell_size
    xs, ys = fld.centers()
    frac = inside.astype(float)
    rows, cols = np.nonzero(fld.mask)
    if rows.size:
        off = (np.arange(SUBCELLS) + 0.5) / SUBCELLS - 0.5
        ox, oy = np.meshgrid(off * hx, off * hy)
        sub = (xs[cols][:, None] + ox.ravel()[None, :]) + 1j * (ys[rows][:, None] + oy.ravel()[None, :])
        w = polygon_winding(fld.curve, sub, fld.orientation).reshape(sub.shape)
        frac[rows, cols] = (w > 0).mean(axis=1)
    area = float(frac.sum() * hx * hy)
    padded = np.pad(inside.astype(float), 1)
    polylines = []
    for c in find_contours(padded, 0.5):
        r, k = c[:, 0] - 1, c[:, 1] - 1
        polylines.append(np.column_stack([fld.box[0] + hx * (k + 0.5), fld.box[2] + hy * (r + 0.5)]))
    return RegionImage(fld, inside, frac, polylines, area, int(fld.values.max()))


@dataclass
class InteriorValue:
    value: complex | None
    residual: float
    determinate: bool
    conditioning: float


def evaluate_interior(lam: BoundaryOperator, kb: KernelBasis, zeta: BoundaryFunction,
                      eta: BoundaryFunction, z: complex, threshold: float = 1e-6,
                      upsilon: BoundaryOperator | None = None) -> InteriorValue:
    """Value at the point over ``z`` of the holomorphic extension of ``zeta``.

    Solves ``Upsilon((zeta - c e) / (eta - z e)) = 0`` for ``c`` in the least
    squares sense.  The one-column system ``c * Upsilon_{eta,z} e`` is
    determinate when its singular value ``||Upsilon_{eta,z} e||`` is at least
    ``threshold`` times ``||Upsilon_{eta,z}||``; otherwise ``value`` is None.
    """
    check_off_curve(eta, z)
    op = build_upsilon_eta_z(lam, eta, z, upsilon)
    e = BoundaryFunction.constant(1.0, lam.grid)
    b = op.matrix @ e.coeffs
    a = op.matrix @ zeta.coeffs
    nb = float(np.linalg.norm(b))
    cond = nb / max(op.norm(), 1e-300)
    if cond < threshold:
        return InteriorValue(None, float(np.linalg.norm(a)) / max(op.norm(), 1e-300), False, cond)
    c = complex(np.vdot(b, a) / nb ** 2)
    den = max(float(np.linalg.norm(a)), abs(c) * nb, 1e-300)
    return InteriorValue(c, float(np.linalg.norm(a - c * b)) / den, True, cond)


@dataclass
class Reconstruction:
    region: RegionImage
    coordinate: BoundaryFunction
    label: str
    multivalent: bool
    histogram: dict             # winding value -> cell count
    samples: list               # interior evaluations of kernel elements

    def summary(self) -> dict:
        return {"coordinate": self.label, "area": self.region.area,
                "multiplicity": self.region.multiplicity, "multivalent": self.multivalent,
                "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
                "samples": self.samples}


def _bandwidth(f: BoundaryFunction, rel: float = 1e-6) -> int:
    c = np.abs(f.coeffs)
    big = np.flatnonzero(c > rel * c.max())
    return int(np.abs(f.grid.wavenumbers[big]).max())


def coordinate_candidates(kb: KernelBasis, limit: int = 6):
    """Kernel vectors by increasing bandwidth, then pairwise mixtures."""
    vecs = kb.vectors[1:1 + limit]
    singles = sorted(((f"v{i + 1}", v) for i, v in enumerate(vecs)),
                     key=lambda t: _bandwidth(t[1]))
    yield from singles
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            for t in (0.3, -0.3, 0.3j, -0.3j):
                yield f"v{i + 1}+{t}*v{j + 1}", vecs[i] + t * vecs[j]


def reconstruct(lam: BoundaryOperator, eta: BoundaryFunction | None = None, resolution=256,
                policy: TolPolicy = TolPolicy(), kb: KernelBasis | None = None,
                allow_multivalent: bool = True, sample_count: int = 5, seed: int = 0,
                threads: int = 1, scan_resolution: int = 64) -> Reconstruction:
    """Region ``{d(z) > 0}`` of a kernel coordinate and interior samples.

    Without ``eta`` the coordinate is chosen among kernel combinations: the
    first one whose coarse winding field takes only the values 0 and 1.  If
    none is univalent the least multivalent candidate is used and reported,
    unless ``allow_multivalent`` is False.
    """
    if kb is None:
        lam = calibrate_orientation(lam, policy)
        kb = kernel_basis(build_upsilon(lam), policy)
    if kb.dim < 2:
        raise NoUnivalentCandidate("kernel has no nonconstant element")
    label = "given"
    if eta is None:
        best = None
        for name, cand in coordinate_candidates(kb):
            try:
                coarse = winding_field(cand, None, scan_resolution, lam.orientation)
            except (OnBoundaryCurve, WindingIllConditioned):
                continue
            vals = coarse.values[~coarse.mask]
            if vals.size == 0 or vals.min() < 0 or vals.max() < 1 or coarse.max_defect > 0.01:
                continue
            if vals.max() == 1:
                best = (1, name, cand)
                break
            if best is None or vals.max() < best[0]:
                best = (int(vals.max()), name, cand)
        if best is None:
            raise NoUnivalentCandidate("no kernel element has a positive winding region")
        if best[0] > 1 and not allow_multivalent:
            raise NoUnivalentCandidate(f"least multivalent candidate {best[1]} has d up to {best[0]}")
        _, label, eta = best
    fld = winding_field(eta, None, resolution, lam.orientation, threads)
    region = image_region(fld)
    ks, counts = np.unique(fld.values[~fld.mask], return_counts=True)
    hist = {int(k): int(c) for k, c in zip(ks, counts)}

    samples = []
    rng = np.random.default_rng(seed)
    rows, cols = np.nonzero((fld.values == 1) & ~fld.mask)
    if rows.size and sample_count:
        pick = rng.choice(rows.size, size=min(sample_count, rows.size), replace=False)
        xs, ys = fld.centers()
        ups = build_upsilon(lam)
        for p in np.sort(pick):
            z = complex(xs[cols[p]], ys[rows[p]])
            vals = []
            for v in kb.vectors[: min(kb.dim, 4)]:
                r = evaluate_interior(lam, kb, v, eta, z, upsilon=ups)
                vals.append(None if r.value is None else [r.value.real, r.value.imag])
            samples.append({"z": [z.real, z.imag], "values": vals})
    return Reconstruction(region, eta, label, region.multiplicity > 1, hist, samples)
