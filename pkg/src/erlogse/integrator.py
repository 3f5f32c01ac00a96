"""IMEX relaxation Runge-Kutta time stepping for ``u_t = i u_xx + g_E(u)``.

The Laplacian is treated implicitly.  Since it is linear and diagonal in
Fourier space, each implicit stage is a single exact division by
``1 + i*tau*a_ii*xi^2``; there is no nonlinear iteration.  After the stages,
the update direction ``d = sum_j (bI_j gI_j + bE_j gE_j)`` is scaled by the
relaxation coefficient

    gamma = -2 Re<d, u_n> / (tau ||d||^2),

which makes ``||u_n + tau*gamma*d||^2 == ||u_n||^2``.  The relaxed solution
approximates the exact one at the shifted time ``t_n + gamma*tau``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, RelaxationBreakdown
from .log_regularization import ModelParams, RegularizationParams, nonlinear_term
from .spectral_grid import Grid1D, SpectralField
from .tableaux import DoubleButcherTableau

log = logging.getLogger(__name__)

FINAL_TIME_MODES = ("adjust_last_step", "overshoot_record")
MAX_LANDING_PASSES = 5
LANDING_TOL = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    tau: float
    tableau: DoubleButcherTableau
    reg: RegularizationParams
    model: ModelParams = field(default_factory=ModelParams)
    gamma_guard: tuple = (0.5, 1.5)
    d_norm_tol: float = 1e-14
    final_time_mode: str = "adjust_last_step"
    relaxation: bool = True  # False forces gamma = 1 (plain IMEX RK)

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}")
        lo, hi = self.gamma_guard
        if not lo < 1 < hi:
            raise ConfigurationError(f"gamma guard must bracket 1, got {self.gamma_guard}")
        if self.final_time_mode not in FINAL_TIME_MODES:
            raise ConfigurationError(f"final_time_mode must be one of {FINAL_TIME_MODES}")


@dataclass
class SolverState:
    """Relaxed iterate ``u`` at relaxed time ``t_hat``.

    ``t_hat`` is accumulated with compensated summation.
    """

    u: SpectralField
    step_index: int = 0
    gamma_history: list = field(default_factory=list)
    mass_history: list = field(default_factory=list)
    warning: str | None = None
    _t_sum: float = 0.0
    _t_comp: float = 0.0

    @classmethod
    def initial(cls, u: SpectralField, t0: float = 0.0) -> "SolverState":
        return cls(u=u, mass_history=[u.grid.mass(u.values)], _t_sum=float(t0))

    @property
    def t_hat(self) -> float:
        return self._t_sum + self._t_comp

    def advance_time(self, dt: float) -> None:
        s, x = self._t_sum, dt
        t = s + x
        if abs(s) >= abs(x):
            self._t_comp += (s - t) + x
        else:
            self._t_comp += (x - t) + s
        self._t_sum = t

    @property
    def relative_mass_error(self) -> np.ndarray:
        m = np.asarray(self.mass_history)
        return np.abs(m - m[0]) / m[0] if m[0] else np.abs(m)


@dataclass
class StageWorkspace:
    u: list
    g_I: list
    g_E: list
    d: np.ndarray

    def residuals(self, u_n: np.ndarray, tau: float, tableau: DoubleButcherTableau) -> np.ndarray:
        """Max-abs residual of each stage equation, substituted back."""
        A_I, A_E = tableau.A_I, tableau.A_E
        out = []
        for i, ui in enumerate(self.u):
            r = ui - u_n
            for j in range(i + 1):
                r = r - tau * A_I[i, j] * self.g_I[j]
            for j in range(i):
                r = r - tau * A_E[i, j] * self.g_E[j]
            out.append(np.max(np.abs(r)))
        return np.array(out)


@lru_cache(maxsize=64)
def _inverse_symbol(grid: Grid1D, alpha: complex) -> np.ndarray:
    return 1.0 / grid.helmholtz_denominator(alpha)


def _stages(grid: Grid1D, u_n: np.ndarray, tau: float, cfg: SolverConfig) -> StageWorkspace:
    tab = cfg.tableau
    A_I, A_E, b_I, b_E = tab.A_I, tab.A_E, tab.b_I, tab.b_E
    lap_symbol = -1j * grid.xi2  # i * (-xi^2)
    reg, lam = cfg.reg, cfg.model.lam
    us, gIs, gEs = [], [], []
    for i in range(tab.stages):
        rhs = u_n.copy()
        for j in range(i):
            if A_I[i, j]:
                rhs += (tau * A_I[i, j]) * gIs[j]
            if A_E[i, j]:
                rhs += (tau * A_E[i, j]) * gEs[j]
        coeffs = np.fft.fft(rhs)
        if A_I[i, i]:
            coeffs *= _inverse_symbol(grid, 1j * tau * A_I[i, i])
            ui = np.fft.ifft(coeffs)
        else:
            ui = rhs
        us.append(ui)
        gIs.append(np.fft.ifft(lap_symbol * coeffs))
        gEs.append(nonlinear_term(ui, reg, lam))
    d = np.zeros_like(u_n)
    for j in range(tab.stages):
        if b_I[j]:
            d += b_I[j] * gIs[j]
        if b_E[j]:
            d += b_E[j] * gEs[j]
    return StageWorkspace(us, gIs, gEs, d)


def compute_stages(state: SolverState, cfg: SolverConfig, tau: float | None = None) -> StageWorkspace:
    """Stage values and derivatives for one step from ``state.u``."""
    return _stages(state.u.grid, state.u.values, cfg.tau if tau is None else tau, cfg)


def relaxation_gamma(ws: StageWorkspace, u_n: SpectralField, tau: float, cfg: SolverConfig,
                     step_index: int = 0) -> float:
    if not cfg.relaxation:
        return 1.0
    d, u = ws.d, u_n.values
    dd = float(np.vdot(d, d).real)
    if np.sqrt(dd) <= cfg.d_norm_tol * np.sqrt(float(np.vdot(u, u).real)):
        return 1.0
    gamma = -2.0 * float(np.vdot(u, d).real) / (tau * dd)
    lo, hi = cfg.gamma_guard
    if not lo <= gamma <= hi:
        raise RelaxationBreakdown(gamma, step_index)
    return gamma


def _trial(state: SolverState, cfg: SolverConfig, tau: float):
    ws = compute_stages(state, cfg, tau)
    gamma = relaxation_gamma(ws, state.u, tau, cfg, state.step_index)
    u_new = state.u.values + (tau * gamma) * ws.d
    return u_new, gamma


def _commit(state: SolverState, u_new: np.ndarray, gamma: float, tau: float) -> SolverState:
    grid = state.u.grid
    state.u = SpectralField(grid, u_new)
    state.advance_time(gamma * tau)
    state.step_index += 1
    state.gamma_history.append(gamma)
    state.mass_history.append(grid.mass(u_new))
    return state


def step(state: SolverState, cfg: SolverConfig, tau: float | None = None) -> SolverState:
    """Advance ``state`` in place by one relaxed step and return it."""
    tau = cfg.tau if tau is None else tau
    u_new, gamma = _trial(state, cfg, tau)
    return _commit(state, u_new, gamma, tau)


def _notify(observer, state: SolverState) -> None:
    if observer is not None:
        observer(state.step_index, state.t_hat, state.gamma_history[-1], state.mass_history[-1])


def _land(state: SolverState, T: float, cfg: SolverConfig):
    """Fixed-point iteration on the nominal step so that t_hat + gamma*tau hits T."""
    remaining = T - state.t_hat
    gamma_est = 1.0
    floor = 4 * np.finfo(float).eps * max(abs(T), cfg.tau)
    best = None
    for _ in range(MAX_LANDING_PASSES):
        tau = remaining / gamma_est
        u_new, gamma = _trial(state, cfg, tau)
        miss = abs(gamma * tau - remaining)
        if best is None or miss < best[3]:
            best = (u_new, gamma, tau, miss)
        if miss <= floor:
            break
        gamma_est = gamma
    return best


def integrate_to(state: SolverState, T: float, cfg: SolverConfig, observer=None) -> SolverState:
    """Step until the relaxed time reaches ``T`` (see ``cfg.final_time_mode``).

    ``observer(step_index, t_hat, gamma, mass)`` is called after every step.
    """
    tau = cfg.tau
    mode = cfg.final_time_mode
    while T - state.t_hat > tau * 1e-9:
        remaining = T - state.t_hat
        if mode == "overshoot_record" or remaining >= 2 * tau:
            step(state, cfg, tau)
            _notify(observer, state)
            continue
        if remaining > tau:
            # two shrunken steps instead of a full one plus a sliver; a
            # sliver step makes gamma pure roundoff
            step(state, cfg, remaining / 2)
            _notify(observer, state)
            continue
        u_new, gamma, tau_last, miss = _land(state, T, cfg)
        _commit(state, u_new, gamma, tau_last)
        _notify(observer, state)
        if miss > LANDING_TOL * tau:
            state.warning = (
                f"final-step adjustment did not converge (miss {miss:.3e}); "
                "recording achieved time"
            )
            log.warning(state.warning)
            mode = "overshoot_record"
        break
    return state


def run(u0: SpectralField, T: float, cfg: SolverConfig, observer=None) -> SolverState:
    return integrate_to(SolverState.initial(u0), T, cfg, observer)
