"""Matrix realizations of boundary operators on the truncated Fourier basis.

Column ``j`` of every matrix is the image of the mode ``n = j - N``.  The
``orientation`` of an operator is the sign relating the tangent field used
for differentiation to the direction of increasing arclength.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz

from .boundary import (BoundaryFunction, GridSpec, derivative_symbol, pointwise_coeffs)
from .errors import (NotRealOperator, OnBoundaryCurve, RankAmbiguous, WindingIllConditioned)

REALNESS_TOL = 1e-10
WINDING_DEFECT_TOL = 0.01


@dataclass(frozen=True)
class BoundaryOperator:
    grid: GridSpec
    matrix: np.ndarray
    orientation: int = 1
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.grid.size, self.grid.size):
            raise ValueError(f"matrix shape {m.shape} does not match grid size {self.grid.size}")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def real_flag(self) -> bool:
        m = self.matrix
        scale = max(np.abs(m).max(), 1.0)
        return bool(np.abs(m[::-1, ::-1] - m.conj()).max() <= REALNESS_TOL * scale)

    def apply(self, f: BoundaryFunction) -> BoundaryFunction:
        if f.grid != self.grid:
            raise ValueError("function and operator live on different grids")
        return BoundaryFunction(self.grid, self.matrix @ f.coeffs)

    def __call__(self, f):
        return self.apply(f)

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def with_matrix(self, matrix, **meta) -> "BoundaryOperator":
        return BoundaryOperator(self.grid, matrix, self.orientation, {**self.meta, **meta})

    def flipped(self) -> "BoundaryOperator":
        return BoundaryOperator(self.grid, self.matrix, -self.orientation, dict(self.meta))

    def truncated(self, modes: int) -> "BoundaryOperator":
        """Principal sub-block acting on modes ``|n| <= modes``."""
        n = self.grid.modes
        if modes > n:
            raise ValueError("cannot truncate to a larger order")
        sl = slice(n - modes, n + modes + 1)
        return BoundaryOperator(GridSpec(modes, self.grid.length), self.matrix[sl, sl],
                                self.orientation, dict(self.meta))


def realify(matrix: np.ndarray) -> np.ndarray:
    """Nearest matrix mapping real functions to real functions."""
    return 0.5 * (matrix + matrix[::-1, ::-1].conj())


def derivative_matrix(grid: GridSpec, orientation: int = 1) -> np.ndarray:
    return np.diag(orientation * derivative_symbol(grid))


def integration_matrix(grid: GridSpec, orientation: int = 1) -> np.ndarray:
    """J on the zero-mean subspace; the constant mode is mapped to zero."""
    sym = orientation * derivative_symbol(grid)
    inv = np.zeros_like(sym)
    nz = grid.wavenumbers != 0
    inv[nz] = 1.0 / sym[nz]
    return np.diag(inv)


def tangential_derivative(op: BoundaryOperator, f: BoundaryFunction) -> BoundaryFunction:
    """Derivative along the oriented tangent field of ``op``."""
    return BoundaryFunction(f.grid, op.orientation * derivative_symbol(f.grid) * f.coeffs)


# -- operators built from a candidate DN map ------------------------------

def _require_real(lam: BoundaryOperator) -> None:
    if not lam.real_flag:
        raise NotRealOperator("operator does not map real functions to real functions")


def build_upsilon(lam: BoundaryOperator) -> BoundaryOperator:
    """``Lambda_c + i d_gamma``: complex-linear form of the holomorphy test operator."""
    _require_real(lam)
    mat = lam.matrix + 1j * derivative_matrix(lam.grid, lam.orientation)
    return BoundaryOperator(lam.grid, mat, lam.orientation, {"kind": "upsilon"})


def upsilon_by_parts(lam: BoundaryOperator, zeta: BoundaryFunction) -> BoundaryFunction:
    """The same operator assembled from real and imaginary parts of ``zeta``."""
    from .boundary import im, re
    a, b = re(zeta), im(zeta)
    lam_a, lam_b = lam.apply(a), lam.apply(b)
    da, db = tangential_derivative(lam, a), tangential_derivative(lam, b)
    return (lam_a - db) + 1j * (lam_b + da)


def reciprocal_coeffs(eta: BoundaryFunction, z: complex, modes: int) -> np.ndarray:
    """Fourier coefficients ``-modes..modes`` of ``1/(eta - z)``."""
    return pointwise_coeffs(lambda v: 1.0 / (v - z), [eta.coeffs], modes)


def multiplication_matrix(g_coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Truncated multiplication by ``g`` given its coefficients for ``|j| <= 2N``."""
    n = grid.modes
    if len(g_coeffs) != 4 * n + 1:
        raise ValueError("need coefficients of g for |j| <= 2N")
    mid = 2 * n
    col = g_coeffs[mid: mid + 2 * n + 1]
    row = g_coeffs[mid - 2 * n: mid + 1][::-1]
    return toeplitz(col, row)


def curve_distance(eta: BoundaryFunction, z, samples: int | None = None) -> np.ndarray:
    """Distance from each ``z`` to a dense polygonal sampling of ``eta(Gamma)``."""
    m = samples or max(16 * eta.grid.size, 512)
    pts = eta.fine_samples(m)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty(z.shape, dtype=float)
    for i in range(0, z.size, 2048):
        chunk = z.ravel()[i:i + 2048]
        out.ravel()[i:i + 2048] = np.abs(chunk[:, None] - pts[None, :]).min(axis=1)
    return out


def check_off_curve(eta: BoundaryFunction, z: complex, dist_tol: float | None = None) -> float:
    scale = max(np.abs(eta.fine_samples(max(16 * eta.grid.size, 512))).max(), 1e-300)
    if dist_tol is None:
        dist_tol = 1e-6 * scale
    d = float(curve_distance(eta, z)[0])
    if d < dist_tol:
        raise OnBoundaryCurve(f"z={z} lies within {d:.2e} of the image curve")
    return d


def build_upsilon_eta_z(lam: BoundaryOperator, eta: BoundaryFunction, z: complex,
                        upsilon: BoundaryOperator | None = None,
                        dist_tol: float | None = None) -> BoundaryOperator:
    """``zeta -> Upsilon(zeta / (eta - z e))`` as a matrix."""
    check_off_curve(eta, z, dist_tol)
    ups = upsilon if upsilon is not None else build_upsilon(lam)
    g = reciprocal_coeffs(eta, z, 2 * lam.grid.modes)
    mat = ups.matrix @ multiplication_matrix(g, lam.grid)
    return BoundaryOperator(lam.grid, mat, lam.orientation,
                            {"kind": "upsilon_eta_z", "z": [z.real, z.imag] if isinstance(z, complex)
                             else [float(np.real(z)), float(np.imag(z))]})


def handle_operator(lam: BoundaryOperator) -> BoundaryOperator:
    """``d_gamma + Lambda P0 J P0 Lambda`` with the zero-mean projection made explicit.

    ``meta['projection_residual']`` is the norm of the constant component of the
    range of ``Lambda`` (zero for a genuine DN map), relative to ``||Lambda||``.
    """
    _require_real(lam)
    grid = lam.grid
    p0 = np.eye(grid.size)
    p0[grid.modes, grid.modes] = 0.0
    jm = integration_matrix(grid, lam.orientation)
    mat = derivative_matrix(grid, lam.orientation) + lam.matrix @ p0 @ jm @ p0 @ lam.matrix
    const_row = lam.matrix[grid.modes]
    lam_norm = max(np.linalg.norm(lam.matrix, 2), 1e-300)
    resid = float(np.linalg.norm(const_row))
    return BoundaryOperator(grid, realify(mat), lam.orientation,
                            {"kind": "handle", "projection_residual": resid,
                             "projection_residual_rel": resid / lam_norm})


# -- rank and kernel -----------------------------------------------------

@dataclass(frozen=True)
class TolPolicy:
    """Singular-value threshold rule.

    ``mode='relative'``: ``tau = scale * (2N+1) * rel`` where ``scale`` defaults
    to the largest singular value.  ``mode='gap'``: singular values below
    ``zero_rel * scale`` count as exact zeros; otherwise the threshold is put
    in the widest gap among ranks ``1..max_rank``.  ``tau`` overrides both.
    """
    mode: str = "relative"
    rel: float = 1e-13
    gap_factor: float = 1e3
    tau: float | None = None
    zero_rel: float = 1e-10
    max_rank_fraction: float = 0.25

    def to_dict(self) -> dict:
        return {"mode": self.mode, "rel": self.rel, "gap_factor": self.gap_factor,
                "tau": self.tau, "zero_rel": self.zero_rel,
                "max_rank_fraction": self.max_rank_fraction}


@dataclass(frozen=True)
class RankInfo:
    rank: int
    tau: float
    gap_ratio: float
    singular_values: np.ndarray

    @property
    def ambiguous_candidates(self):
        return (self.rank - 1, self.rank) if self.rank > 0 else (self.rank, self.rank + 1)


def _ratio(hi: float, lo: float) -> float:
    if lo <= 0:
        return float("inf")
    return float(hi / lo)


def rank_from_singular_values(sv: np.ndarray, policy: TolPolicy, size: int,
                              scale: float | None = None) -> RankInfo:
    sv = np.sort(np.asarray(sv, dtype=float))[::-1]
    smax = float(sv[0]) if sv.size else 0.0
    scale = smax if scale is None else float(scale)
    if policy.tau is not None:
        tau = policy.tau
        r = int(np.sum(sv > tau))
    elif policy.mode == "relative":
        tau = scale * size * policy.rel
        r = int(np.sum(sv > tau))
    elif policy.mode == "gap":
        zero_tau = policy.zero_rel * scale
        if sv.size == 0 or sv[0] <= zero_tau:
            tau, r = zero_tau, 0
        else:
            # values below zero_tau are exact zeros: round-off among them is not a gap
            nonzero = int(np.sum(sv > zero_tau))
            clamped = np.where(sv > zero_tau, sv, 0.0)
            rmax = max(1, min(int(policy.max_rank_fraction * size), sv.size - 1, nonzero))
            ratios = [_ratio(clamped[k - 1], clamped[k]) for k in range(1, rmax + 1)]
            r = int(np.argmax(ratios)) + 1
            tau = float(np.sqrt(sv[r - 1] * max(sv[r], 1e-300)))
    else:
        raise ValueError(f"unknown tolerance mode {policy.mode!r}")
    above = sv[r - 1] if r > 0 else max(scale, 1e-300)
    below = sv[r] if r < sv.size else 0.0
    return RankInfo(r, float(tau), _ratio(above, below), sv)


def numerical_rank(op, policy: TolPolicy = TolPolicy(), scale: float | None = None,
                   strict: bool = True) -> RankInfo:
    """Rank with gap evidence; raises :class:`RankAmbiguous` if the gap is too small."""
    mat = op.matrix if isinstance(op, BoundaryOperator) else np.asarray(op)
    sv = np.linalg.svd(mat, compute_uv=False) if mat.size else np.zeros(0)
    info = rank_from_singular_values(sv, policy, max(mat.shape) if mat.size else 1, scale)
    if strict and info.gap_ratio < policy.gap_factor:
        raise RankAmbiguous(f"rank {info.rank} bracketed by gap {info.gap_ratio:.3g} "
                            f"< {policy.gap_factor:g}", info.ambiguous_candidates, info.singular_values)
    return info


@dataclass(frozen=True)
class KernelBasis:
    grid: GridSpec
    matrix: np.ndarray          # columns are orthonormal coefficient vectors
    tol: float
    gap_ratio: float
    singular_values: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def vectors(self) -> list[BoundaryFunction]:
        return [BoundaryFunction(self.grid, self.matrix[:, i]) for i in range(self.dim)]

    def project(self, f: BoundaryFunction) -> BoundaryFunction:
        v = self.matrix
        return BoundaryFunction(self.grid, v @ (v.conj().T @ f.coeffs))

    def distance(self, f: BoundaryFunction) -> float:
        """RMS distance from ``f`` to the span."""
        return float(np.linalg.norm(f.coeffs - self.project(f).coeffs))

    def combine(self, weights) -> BoundaryFunction:
        return BoundaryFunction(self.grid, self.matrix @ np.asarray(weights, dtype=complex))


def _normalize_phase(v: np.ndarray) -> np.ndarray:
    for j in range(v.shape[1]):
        col = v[:, j]
        big = np.abs(col).max()
        k = int(np.argmax(np.abs(col) > 0.5 * big))
        v[:, j] = col * (abs(col[k]) / col[k])
    return v


def kernel_basis(op: BoundaryOperator, policy: TolPolicy = TolPolicy(),
                 strict: bool = True) -> KernelBasis:
    """Orthonormal numerical kernel, smoothest vectors first.

    Within the kernel the basis diagonalizes the ``H^1`` weight ``1 + n^2``
    so that for rotation-invariant operators it consists of single modes.
    """
    u, sv, vh = np.linalg.svd(op.matrix)
    info = rank_from_singular_values(sv, policy, op.grid.size)
    if strict and info.gap_ratio < policy.gap_factor:
        raise RankAmbiguous(f"kernel dimension ambiguous: gap {info.gap_ratio:.3g}",
                            (op.grid.size - info.rank - 1, op.grid.size - info.rank)
                            if info.rank > 0 else (op.grid.size, op.grid.size - 1),
                            sv)
    v = vh.conj().T[:, info.rank:]
    if v.shape[1]:
        w = 1.0 + op.grid.wavenumbers.astype(float) ** 2
        gram = v.conj().T @ (w[:, None] * v)
        evals, evecs = np.linalg.eigh(0.5 * (gram + gram.conj().T))
        v = _normalize_phase(v @ evecs)
    return KernelBasis(op.grid, v, info.tau, info.gap_ratio, sv)


def restricted_rank(ups_eta_z: BoundaryOperator, kb: KernelBasis, rel: float = 1e-8,
                    scale: float | None = None) -> RankInfo:
    """Rank of the image of the kernel basis under ``Upsilon_{eta,z}``."""
    cols = ups_eta_z.matrix @ kb.matrix
    sv = np.linalg.svd(cols, compute_uv=False) if cols.size else np.zeros(0)
    if scale is None:
        scale = ups_eta_z.norm()
    return rank_from_singular_values(sv, TolPolicy(tau=rel * scale), kb.dim)


# -- winding numbers -----------------------------------------------------

def winding_raw(eta: BoundaryFunction, z, samples: int, orientation: int = 1) -> np.ndarray:
    """Trapezoid (spectrally accurate) value of ``(1/2 pi i) \\oint eta' / (eta - z)``."""
    m = samples
    pts = eta.fine_samples(m)
    deta = samples_of_derivative(eta, m)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    flat = z.ravel()
    out = np.empty(flat.shape, dtype=complex)
    step = max(1, (1 << 22) // m)
    for i in range(0, flat.size, step):
        chunk = flat[i:i + step]
        out[i:i + step] = (deta[None, :] / (pts[None, :] - chunk[:, None])).sum(axis=1)
    out *= orientation * (eta.length / m) / (2j * np.pi)
    return out.reshape(z.shape)


def samples_of_derivative(eta: BoundaryFunction, m: int) -> np.ndarray:
    from .boundary import samples_from_coeffs
    return samples_from_coeffs(eta.coeffs * derivative_symbol(eta.grid), m)


def _samples_for_distance(eta: BoundaryFunction, dist: float) -> int:
    """Sample count making the trapezoid error ~exp(-2 pi dist / spacing) negligible."""
    m = max(4 * eta.grid.size, 256)
    probe = eta.fine_samples(m)
    perimeter = float(np.abs(np.diff(np.append(probe, probe[0]))).sum())
    need = int(np.ceil(8.0 * perimeter / max(dist, 1e-300)))
    return int(min(max(m, need), 1 << 18))


def winding_number(eta: BoundaryFunction, z: complex, orientation: int = 1,
                   dist_tol: float | None = None, defect_tol: float = WINDING_DEFECT_TOL):
    """Integer winding of ``eta(Gamma)`` about ``z`` and the pre-rounding defect."""
    dist = check_off_curve(eta, z, dist_tol)
    raw = complex(winding_raw(eta, z, _samples_for_distance(eta, dist), orientation)[0])
    k = int(round(raw.real))
    defect = abs(raw - k)
    if defect > defect_tol:
        raise WindingIllConditioned(f"winding defect {defect:.3g} at z={z}", raw)
    return k, defect


def calibrate_orientation(lam: BoundaryOperator, policy: TolPolicy = TolPolicy(),
                          kb: KernelBasis | None = None) -> BoundaryOperator:
    """Flip the orientation if a kernel element winds negatively about an interior point.

    The interior point is taken as the mean of the smoothest nonconstant kernel
    element, which lies inside the image region for the usual coordinates.
    """
    if kb is None:
        kb = kernel_basis(build_upsilon(lam), policy, strict=False)
    for v in kb.vectors[1:4]:
        c = complex(np.mean(v.fine_samples(4 * v.grid.size)))
        try:
            k, _ = winding_number(v, c, lam.orientation)
        except (OnBoundaryCurve, WindingIllConditioned):
            continue
        if k < 0:
            return lam.flipped()
        if k > 0:
            return lam
    return lam
