"""Spectral calculus on the boundary circle.

Functions on a closed curve of length ``L`` are stored by their truncated
Fourier coefficients ``c_n`` (``n = -N..N``) with respect to the arclength
exponentials ``exp(2*pi*i*n*s/L)``.  The dual sample view lives on the
``2N+1`` uniform points ``s_k = k*L/(2N+1)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GridMismatch, NonZeroMean, TruncationLoss

REAL_TOL = 1e-12
MAX_FINE_SAMPLES = 1 << 20


@dataclass(frozen=True)
class GridSpec:
    modes: int
    length: float = 2 * np.pi

    def __post_init__(self):
        if int(self.modes) != self.modes or self.modes < 4:
            raise ValueError(f"modes must be an integer >= 4, got {self.modes}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        object.__setattr__(self, "modes", int(self.modes))
        object.__setattr__(self, "length", float(self.length))

    @property
    def size(self) -> int:
        return 2 * self.modes + 1

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(-self.modes, self.modes + 1)

    @property
    def arclength(self) -> np.ndarray:
        return self.length * np.arange(self.size) / self.size

    def to_dict(self) -> dict:
        return {"modes": self.modes, "length": self.length}


# -- low level transforms -------------------------------------------------

def samples_from_coeffs(coeffs: np.ndarray, m: int) -> np.ndarray:
    """Evaluate the trigonometric polynomial on ``m`` uniform points."""
    n = (len(coeffs) - 1) // 2
    if m < len(coeffs):
        raise ValueError("sample count below coefficient count")
    spec = np.zeros(m, dtype=complex)
    spec[np.arange(-n, n + 1) % m] = coeffs
    return np.fft.ifft(spec) * m


def coeffs_from_samples(samples: np.ndarray, n: int) -> np.ndarray:
    """Fourier coefficients ``-n..n`` of uniformly sampled data."""
    m = len(samples)
    if m < 2 * n + 1:
        raise ValueError("too few samples for the requested modes")
    spec = np.fft.fft(samples) / m
    return spec[np.arange(-n, n + 1) % m]


def pointwise_coeffs(func: Callable[..., np.ndarray], coeff_list, n: int,
                     start: int | None = None, rtol: float = 1e-16) -> np.ndarray:
    """Coefficients ``-n..n`` of ``func(f1(s), f2(s), ...)``.

    The factors are sampled on a grid that is doubled until the spectrum of
    the result has decayed below ``rtol`` near the Nyquist band, so the
    truncated coefficients are free of aliasing for smooth results.
    """
    width = max(len(c) for c in coeff_list)
    m = start or max(4 * width, 4 * (2 * n + 1), 64)
    while True:
        vals = func(*[samples_from_coeffs(c, m) for c in coeff_list])
        spec = np.fft.fft(vals) / m
        mags = np.abs(np.fft.fftshift(spec))
        top = mags.max()
        edge = np.concatenate([mags[: m // 8], mags[-m // 8:]])
        if top == 0 or edge.max() <= rtol * top or 2 * m > MAX_FINE_SAMPLES:
            return spec[np.arange(-n, n + 1) % m]
        m *= 2


# -- boundary functions ---------------------------------------------------

class BoundaryFunction:
    """Immutable complex function on the boundary circle."""

    __slots__ = ("grid", "_coeffs", "_samples")

    def __init__(self, grid: GridSpec, coeffs):
        coeffs = np.array(coeffs, dtype=complex)
        if coeffs.shape != (grid.size,):
            raise ValueError(f"expected {grid.size} coefficients, got {coeffs.shape}")
        coeffs.setflags(write=False)
        self.grid = grid
        self._coeffs = coeffs
        self._samples = None

    # construction
    @classmethod
    def from_samples(cls, samples, length: float = 2 * np.pi) -> "BoundaryFunction":
        samples = np.asarray(samples, dtype=complex)
        if len(samples) % 2 == 0:
            raise ValueError("sample count must be odd")
        grid = GridSpec((len(samples) - 1) // 2, length)
        return cls(grid, coeffs_from_samples(samples, grid.modes))

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray],
                      grid: GridSpec) -> "BoundaryFunction":
        """Sample ``func`` at the angle ``theta = 2*pi*s/L`` of each grid point."""
        theta = 2 * np.pi * grid.arclength / grid.length
        return cls.from_samples(np.broadcast_to(func(theta), theta.shape), grid.length)

    @classmethod
    def mode(cls, n: int, grid: GridSpec) -> "BoundaryFunction":
        c = np.zeros(grid.size, dtype=complex)
        c[n + grid.modes] = 1.0
        return cls(grid, c)

    @classmethod
    def constant(cls, value: complex, grid: GridSpec) -> "BoundaryFunction":
        return cls.mode(0, grid) * value

    # views
    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def samples(self) -> np.ndarray:
        if self._samples is None:
            s = samples_from_coeffs(self._coeffs, self.grid.size)
            s.setflags(write=False)
            self._samples = s
        return self._samples

    @property
    def modes(self) -> int:
        return self.grid.modes

    @property
    def length(self) -> float:
        return self.grid.length

    @property
    def is_real(self) -> bool:
        c = self._coeffs
        scale = max(np.abs(c).max(), 1e-300)
        return bool(np.abs(c[::-1] - c.conj()).max() <= REAL_TOL * scale)

    def fine_samples(self, m: int) -> np.ndarray:
        return samples_from_coeffs(self._coeffs, m)

    def __call__(self, s) -> np.ndarray:
        """Evaluate at arbitrary arclength positions."""
        s = np.asarray(s, dtype=float)
        k = 2j * np.pi * self.grid.wavenumbers / self.length
        return np.exp(np.multiply.outer(s, k)) @ self._coeffs

    def norm(self) -> float:
        """RMS norm, equal to sqrt((1/L) * integral of |f|^2)."""
        return float(np.linalg.norm(self._coeffs))

    def inner(self, other: "BoundaryFunction") -> complex:
        _same_grid(self, other)
        return complex(np.vdot(self._coeffs, other._coeffs))

    # arithmetic
    def __add__(self, other):
        if isinstance(other, BoundaryFunction):
            _same_grid(self, other)
            return BoundaryFunction(self.grid, self._coeffs + other._coeffs)
        return self + BoundaryFunction.constant(other, self.grid)

    __radd__ = __add__

    def __neg__(self):
        return BoundaryFunction(self.grid, -self._coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, BoundaryFunction):
            return multiply(self, other)
        return BoundaryFunction(self.grid, self._coeffs * complex(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, BoundaryFunction):
            return divide(self, other)
        return self * (1.0 / complex(other))

    def conj(self) -> "BoundaryFunction":
        return BoundaryFunction(self.grid, self._coeffs[::-1].conj())

    def allclose(self, other: "BoundaryFunction", atol: float = 1e-12) -> bool:
        _same_grid(self, other)
        return bool(np.abs(self._coeffs - other._coeffs).max() <= atol)

    def __repr__(self):
        return f"BoundaryFunction(modes={self.modes}, length={self.length:.6g})"

    # serialization
    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "modes": self.modes,
            "coeffs": [[float(c.real), float(c.imag)] for c in self._coeffs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoundaryFunction":
        grid = GridSpec(int(data["modes"]), float(data["length"]))
        pairs = np.asarray(data["coeffs"], dtype=float)
        if pairs.shape != (grid.size, 2):
            raise ValueError("coeffs must be a list of [re, im] pairs of length 2N+1")
        return cls(grid, pairs[:, 0] + 1j * pairs[:, 1])


def _same_grid(f: BoundaryFunction, g: BoundaryFunction) -> None:
    if f.grid != g.grid:
        raise GridMismatch(f"grids differ: {f.grid} vs {g.grid}")


def derivative_symbol(grid: GridSpec) -> np.ndarray:
    return 2j * np.pi * grid.wavenumbers / grid.length


def derivative(f: BoundaryFunction) -> BoundaryFunction:
    """Tangential derivative with respect to arclength."""
    return BoundaryFunction(f.grid, f.coeffs * derivative_symbol(f.grid))


def mean(f: BoundaryFunction) -> complex:
    return complex(f.coeffs[f.modes])


def integrate_J(f: BoundaryFunction, mean_tol: float | None = None) -> BoundaryFunction:
    """Zero-mean antiderivative, the inverse of :func:`derivative` on zero-mean data."""
    if mean_tol is None:
        mean_tol = 1e-10 * max(np.abs(f.samples).max(), 1e-300)
    if abs(mean(f)) > mean_tol:
        raise NonZeroMean(f"mean {mean(f):.3e} exceeds tolerance {mean_tol:.3e}")
    sym = derivative_symbol(f.grid)
    out = np.zeros_like(f.coeffs)
    nz = f.grid.wavenumbers != 0
    out[nz] = f.coeffs[nz] / sym[nz]
    return BoundaryFunction(f.grid, out)


def multiply_with_loss(f: BoundaryFunction, g: BoundaryFunction):
    """Alias-free product and the RMS norm of the discarded high modes."""
    _same_grid(f, g)
    n = f.modes
    m = 2 * f.grid.size
    full = coeffs_from_samples(f.fine_samples(m) * g.fine_samples(m), 2 * n)
    kept = full[n: 3 * n + 1]
    loss = float(np.sqrt(np.sum(np.abs(full[:n]) ** 2) + np.sum(np.abs(full[3 * n + 1:]) ** 2)))
    return BoundaryFunction(f.grid, kept), loss


def multiply(f: BoundaryFunction, g: BoundaryFunction,
             loss_tol: float = 1e-12) -> BoundaryFunction:
    """Pointwise product truncated back to the grid.

    Emits :class:`TruncationLoss` when the exact product has relative energy
    above ``loss_tol`` outside the retained modes.
    """
    h, loss = multiply_with_loss(f, g)
    scale = max(f.norm() * g.norm(), 1e-300)
    if loss > loss_tol * scale:
        warnings.warn(TruncationLoss(f"product lost {loss / scale:.2e} of its norm to truncation"),
                      stacklevel=2)
    return h


def divide(f: BoundaryFunction, g: BoundaryFunction) -> BoundaryFunction:
    _same_grid(f, g)
    return BoundaryFunction(f.grid, pointwise_coeffs(np.divide, [f.coeffs, g.coeffs], f.modes))


def apply_pointwise(func: Callable[[np.ndarray], np.ndarray], f: BoundaryFunction) -> BoundaryFunction:
    """Smooth nonlinear function of ``f`` (exp, log, reciprocal, ...)."""
    return BoundaryFunction(f.grid, pointwise_coeffs(func, [f.coeffs], f.modes))


def resample(f: BoundaryFunction, modes: int) -> BoundaryFunction:
    """Trigonometric interpolation onto a grid with a different truncation order."""
    grid = GridSpec(modes, f.length)
    out = np.zeros(grid.size, dtype=complex)
    k = min(modes, f.modes)
    out[modes - k: modes + k + 1] = f.coeffs[f.modes - k: f.modes + k + 1]
    return BoundaryFunction(grid, out)


def re(f: BoundaryFunction) -> BoundaryFunction:
    return BoundaryFunction.from_samples(f.samples.real.astype(complex), f.length)


def im(f: BoundaryFunction) -> BoundaryFunction:
    return BoundaryFunction.from_samples(f.samples.imag.astype(complex), f.length)
