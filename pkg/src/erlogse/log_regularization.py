"""Logarithmic energy density and its local C^k energy regularization.

Below the threshold ``rho < eps**2`` the density ``F(rho) = rho*ln(rho) - rho``
is replaced by the polynomial

    P(rho) = rho * (ln(eps^2) - 1 - sum_{j=1..k} sigma^j / j),  sigma = 1 - rho/eps^2,

whose derivative is

    f(rho) = ln(eps^2) - (k+1)/k * sigma^k - sum_{j=1..k-1} sigma^j / j .

Both are evaluated in ``sigma`` with Horner accumulation.  Scalar
``mpmath.mpf`` inputs are evaluated in arbitrary precision, which the
derivative-continuity checks rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import ConfigurationError, DomainError
from .spectral_grid import SpectralField

MAX_ORDER = 16


@dataclass(frozen=True)
class RegularizationParams:
    eps: float
    k: int = 2

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ConfigurationError(f"eps must lie in (0, 1), got {self.eps}")
        if int(self.k) != self.k or not 2 <= self.k <= MAX_ORDER:
            raise ConfigurationError(f"k must be an integer in [2, {MAX_ORDER}], got {self.k}")

    @property
    def threshold(self) -> float:
        return self.eps * self.eps


@dataclass(frozen=True)
class ModelParams:
    """Nonlinearity strength; ``lam = 0`` gives the linear Schroedinger equation."""

    lam: float = -1.0


def _is_mp(x) -> bool:
    return isinstance(x, (mpmath.mpf, mpmath.mpc))


def _check_rho(rho):
    if _is_mp(rho):
        if rho < 0:
            raise DomainError(f"rho must be nonnegative, got {rho}")
        return rho
    arr = np.asarray(rho, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("rho must be nonnegative")
    return arr


def _unwrap(out, like):
    return out if np.ndim(like) else float(out[0])


def _thresholds(params: RegularizationParams, mp: bool):
    if mp:
        eps2 = mpmath.mpf(params.eps) ** 2
        return eps2, mpmath.log(eps2)
    eps2 = params.eps * params.eps
    return eps2, np.log(eps2)


def _inner_f(sigma, log_eps2, k):
    # (k+1)/k sigma^k + sum_{j<k} sigma^j/j, Horner from the top
    one = mpmath.mpf(1) if _is_mp(sigma) else 1.0
    acc = one * (k + 1) / k
    for j in range(k - 1, 0, -1):
        acc = acc * sigma + one / j
    return log_eps2 - acc * sigma


def _inner_F(rho, sigma, log_eps2, k):
    one = mpmath.mpf(1) if _is_mp(sigma) else 1.0
    acc = one / k
    for j in range(k - 1, 0, -1):
        acc = acc * sigma + one / j
    return rho * (log_eps2 - 1 - acc * sigma)


def energy_density(rho):
    """``F(rho) = rho ln rho - rho`` with ``F(0) = 0``."""
    rho = _check_rho(rho)
    if _is_mp(rho):
        return mpmath.mpf(0) if rho == 0 else rho * mpmath.log(rho) - rho
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(rho > 0, rho * np.log(np.where(rho > 0, rho, 1.0)) - rho, 0.0)
    return out if out.ndim else float(out)


def f_keps(rho, params: RegularizationParams):
    """Regularized nonlinearity ``f = dF_k^eps/drho``; equals ``ln(rho)`` for ``rho >= eps^2``."""
    rho = _check_rho(rho)
    mp = _is_mp(rho)
    eps2, log_eps2 = _thresholds(params, mp)
    if mp:
        if rho >= eps2:
            return mpmath.log(rho)
        return _inner_f(1 - rho / eps2, log_eps2, params.k)
    r = np.atleast_1d(rho)
    outer = r >= eps2
    out = np.empty_like(r)
    out[outer] = np.log(r[outer])
    inner = ~outer
    out[inner] = _inner_f(1.0 - r[inner] / eps2, log_eps2, params.k)
    return _unwrap(out, rho)


def F_keps(rho, params: RegularizationParams):
    """Regularized energy density, ``C^k`` across ``rho = eps^2`` and zero at the origin."""
    rho = _check_rho(rho)
    mp = _is_mp(rho)
    eps2, log_eps2 = _thresholds(params, mp)
    if mp:
        if rho >= eps2:
            return rho * mpmath.log(rho) - rho
        return _inner_F(rho, 1 - rho / eps2, log_eps2, params.k)
    r = np.atleast_1d(rho)
    outer = r >= eps2
    out = np.empty_like(r)
    out[outer] = r[outer] * np.log(r[outer]) - r[outer]
    inner = ~outer
    out[inner] = _inner_F(r[inner], 1.0 - r[inner] / eps2, log_eps2, params.k)
    return _unwrap(out, rho)


def nonlinear_term(u: np.ndarray, params: RegularizationParams, lam: float) -> np.ndarray:
    """Array kernel of :func:`explicit_rhs`: ``-1j * lam * u * f(|u|^2)``."""
    if lam == 0:
        return np.zeros_like(u)
    rho = u.real**2 + u.imag**2
    return (-1j * lam) * u * f_keps(rho, params)


def explicit_rhs(u: SpectralField, params: RegularizationParams, model: ModelParams) -> SpectralField:
    """Explicitly treated part of ``u_t``.

    Solving ``i u_t + u_xx = lam * u * f(|u|^2)`` for ``u_t`` gives
    ``u_t = i u_xx - i lam u f``; this returns the second term.
    """
    return SpectralField(u.grid, nonlinear_term(u.values, params, model.lam))


def _kinetic(u: SpectralField) -> float:
    du = u.grid.derivative(u.values)
    return u.grid.h * float(np.vdot(du, du).real)


def energy(u: SpectralField, model: ModelParams) -> float:
    """``E(u) = ||u_x||^2 + lam * h * sum F(|u|^2)``."""
    rho = np.abs(u.values) ** 2
    return _kinetic(u) + model.lam * u.grid.h * float(np.sum(energy_density(rho)))


def energy_regularized(u: SpectralField, params: RegularizationParams, model: ModelParams) -> float:
    rho = np.abs(u.values) ** 2
    return _kinetic(u) + model.lam * u.grid.h * float(np.sum(F_keps(rho, params)))
