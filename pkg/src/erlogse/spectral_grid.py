"""Periodic uniform grid and Fourier pseudo-spectral operators in 1-D.

Transform convention: ``numpy.fft`` defaults, i.e. the forward transform is
unscaled and the inverse carries ``1/N``.  With this convention Parseval reads

    h * sum |u_j|^2 == (h / N) * sum |uhat_k|^2 .

All norms and inner products are computed from physical-space samples with
the rectangle rule ``h * sum``, so the transform scaling never leaks into them.
The inner product is linear in the first argument:

    <u, v> = h * sum_j u_j * conj(v_j) .
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, SingularSolveError


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on ``[a, b)`` with ``n_points`` nodes (right end excluded)."""

    a: float
    b: float
    n_points: int

    def __post_init__(self):
        if not self.b > self.a:
            raise ConfigurationError(f"need b > a, got a={self.a}, b={self.b}")
        if int(self.n_points) != self.n_points or self.n_points <= 0:
            raise ConfigurationError(f"n_points must be a positive integer, got {self.n_points}")
        if self.n_points % 2:
            raise ConfigurationError(f"n_points must be even, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def h(self) -> float:
        return self.length / self.n_points

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.n_points)

    @cached_property
    def xi(self) -> np.ndarray:
        """Wavenumbers 2*pi*k/(b-a) in FFT ordering (k = 0..N/2-1, -N/2..-1)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.h)

    @cached_property
    def xi2(self) -> np.ndarray:
        return self.xi**2

    # -- array-level kernels (no wrapping, used in the time stepper) --------

    def check(self, values: np.ndarray) -> None:
        if np.shape(values) != (self.n_points,):
            raise ConfigurationError(
                f"field of shape {np.shape(values)} does not match grid with N={self.n_points}"
            )

    def forward(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fft(values)

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.ifft(coeffs)

    def laplacian(self, values: np.ndarray) -> np.ndarray:
        return np.fft.ifft(-self.xi2 * np.fft.fft(values))

    def derivative(self, values: np.ndarray) -> np.ndarray:
        return np.fft.ifft(1j * self.xi * np.fft.fft(values))

    def helmholtz_denominator(self, alpha: complex) -> np.ndarray:
        denom = 1.0 + alpha * self.xi2
        if np.any(denom == 0):
            raise SingularSolveError(f"1 + alpha*xi^2 vanishes for alpha={alpha!r}")
        return denom

    def helmholtz(self, rhs: np.ndarray, alpha: complex) -> np.ndarray:
        """Solve ``u - alpha * u_xx = rhs`` exactly by diagonal division."""
        if alpha == 0:
            return np.array(rhs, dtype=complex)
        return np.fft.ifft(np.fft.fft(rhs) / self.helmholtz_denominator(alpha))

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        return self.h * np.vdot(v, u)

    def mass(self, u: np.ndarray) -> float:
        return self.h * float(np.vdot(u, u).real)

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.mass(u)))

    def restrict(self, values: np.ndarray, target: "Grid1D") -> np.ndarray:
        """Spectral truncation (or zero padding) of ``values`` onto ``target``.

        Both grids must cover the same interval.
        """
        if not (np.isclose(target.a, self.a) and np.isclose(target.b, self.b)):
            raise ConfigurationError("spectral resampling needs grids on the same interval")
        n_src, n_dst = self.n_points, target.n_points
        if n_src == n_dst:
            return np.array(values, dtype=complex)
        coeffs = np.fft.fft(values)
        out = np.zeros(n_dst, dtype=complex)
        m = min(n_src, n_dst) // 2
        out[:m] = coeffs[:m]
        out[-m:] = coeffs[-m:]
        if n_dst > n_src:
            # split the source Nyquist mode symmetrically
            out[-m] *= 0.5
            out[m] = out[-m]
        else:
            # both +-N_dst/2 source modes land on the target Nyquist mode
            out[-m] += coeffs[m]
        return np.fft.ifft(out) * (n_dst / n_src)

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate the trigonometric interpolant of ``values`` at arbitrary ``points``.

        The Nyquist mode is split evenly between +N/2 and -N/2, so the result is
        real for real data and reproduces ``values`` at the nodes.
        """
        n = self.n_points
        coeffs = np.fft.fft(values) / n
        k = np.fft.fftfreq(n, d=1.0 / n)
        weights = np.ones(n)
        weights[n // 2] = 0.5
        phase = (2.0 * np.pi / self.length) * (np.asarray(points, dtype=float)[:, None] - self.a)
        out = (np.exp(1j * phase * k) * (coeffs * weights)).sum(axis=1)
        nyq = coeffs[n // 2] * 0.5 * np.exp(1j * phase[:, 0] * (n // 2))
        return out + nyq


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Complex samples of a field on a :class:`Grid1D`."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        self.grid.check(values)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid1D, func) -> "SpectralField":
        return cls(grid, func(grid.nodes))

    @property
    def spectrum(self) -> np.ndarray:
        return self.grid.forward(self.values)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.values.copy())


def _same_grid(u: SpectralField, v: SpectralField) -> Grid1D:
    if u.grid != v.grid:
        raise ConfigurationError("fields live on different grids")
    return u.grid


def forward_transform(field: SpectralField) -> np.ndarray:
    return field.grid.forward(field.values)


def inverse_transform(coeffs: np.ndarray, grid: Grid1D) -> SpectralField:
    grid.check(coeffs)
    return SpectralField(grid, grid.inverse(coeffs))


def apply_laplacian(field: SpectralField) -> SpectralField:
    return SpectralField(field.grid, field.grid.laplacian(field.values))


def helmholtz_solve(rhs: SpectralField, alpha: complex) -> SpectralField:
    """Return ``u`` with ``u - alpha * Laplacian(u) == rhs``."""
    return SpectralField(rhs.grid, rhs.grid.helmholtz(rhs.values, alpha))


def inner_product(u: SpectralField, v: SpectralField) -> complex:
    return _same_grid(u, v).inner(u.values, v.values)


def discrete_mass(u: SpectralField) -> float:
    return u.grid.mass(u.values)


def l2_norm(u: SpectralField) -> float:
    return u.grid.norm(u.values)


def resample(field: SpectralField, target: Grid1D) -> SpectralField:
    """Spectral truncation / zero padding onto ``target``."""
    return SpectralField(target, field.grid.restrict(field.values, target))


def sample_on(field: SpectralField, target: Grid1D) -> SpectralField:
    """Evaluate the Fourier interpolant of ``field`` at the nodes of ``target``."""
    return SpectralField(target, field.grid.interpolate(field.values, target.nodes))
