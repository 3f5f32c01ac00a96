import numpy as np
import pytest

from erlogse.errors import ConfigurationError, RelaxationBreakdown
from erlogse.experiments import exact_gausson
from erlogse.integrator import (
    SolverConfig, SolverState, compute_stages, integrate_to, relaxation_gamma, run, step,
)
from erlogse.log_regularization import ModelParams, RegularizationParams
from erlogse.spectral_grid import Grid1D, SpectralField
from erlogse.tableaux import load_tableau

NAMES = ("RK(1,2)", "RK(2,3)", "RK(6,4)", "RK(8,5)")
TAUS = [0.1 * 2.0**-j for j in range(1, 6)]


def cfg_for(name, tau=0.01, lam=-1.0, eps=1e-4, **kw):
    return SolverConfig(tau, load_tableau(name), RegularizationParams(eps), ModelParams(lam), **kw)


@pytest.fixture(scope="module")
def gausson_grid():
    return Grid1D(-10.0, 10.0, 64)


def gausson0(grid):
    return SpectralField(grid, np.exp(-grid.nodes**2 / 2))


def plane_wave(grid, m, t=0.0):
    return np.exp(1j * m * grid.nodes - 1j * m * m * t)


class TestConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ConfigurationError):
            cfg_for("RK(1,2)", tau=0.0)
        with pytest.raises(ConfigurationError):
            cfg_for("RK(1,2)", gamma_guard=(1.1, 2.0))
        with pytest.raises(ConfigurationError):
            cfg_for("RK(1,2)", final_time_mode="stop")


class TestSingleStep:
    @pytest.mark.parametrize("name", NAMES)
    def test_mass_preserved_to_roundoff(self, name, gausson_grid):
        state = SolverState.initial(gausson0(gausson_grid))
        step(state, cfg_for(name, tau=0.05))
        assert state.relative_mass_error[-1] < 1e-14
        assert state.step_index == 1
        assert state.t_hat == pytest.approx(0.05 * state.gamma_history[0])

    @pytest.mark.parametrize("name", NAMES)
    def test_stage_residuals(self, name, gausson_grid):
        cfg = cfg_for(name, tau=0.05)
        state = SolverState.initial(gausson0(gausson_grid))
        ws = compute_stages(state, cfg)
        assert ws.residuals(state.u.values, cfg.tau, cfg.tableau).max() <= 1e-11

    def test_zero_field_gives_gamma_one(self, gausson_grid):
        state = SolverState.initial(SpectralField(gausson_grid, np.zeros(64)))
        cfg = cfg_for("RK(2,3)")
        ws = compute_stages(state, cfg)
        assert relaxation_gamma(ws, state.u, cfg.tau, cfg) == 1.0

    def test_guard_raises(self, gausson_grid):
        cfg = cfg_for("RK(1,2)", tau=0.2, gamma_guard=(0.999999, 1.000001))
        state = SolverState.initial(gausson0(gausson_grid))
        with pytest.raises(RelaxationBreakdown) as info:
            step(state, cfg)
        assert info.value.step_index == 0
        assert not 0.999999 <= info.value.gamma <= 1.000001

    def test_relaxation_off(self, gausson_grid):
        state = SolverState.initial(gausson0(gausson_grid))
        step(state, cfg_for("RK(1,2)", tau=0.1, relaxation=False))
        assert state.gamma_history == [1.0]
        assert state.t_hat == 0.1


class TestFinalTime:
    def test_lands_on_final_time(self, gausson_grid):
        state = run(gausson0(gausson_grid), 1.0, cfg_for("RK(2,3)", tau=0.03))
        assert state.t_hat == pytest.approx(1.0, abs=1e-14)
        assert state.warning is None

    def test_overshoot_records_time(self, gausson_grid):
        state = run(gausson0(gausson_grid), 1.0, cfg_for("RK(2,3)", tau=0.03, final_time_mode="overshoot_record"))
        assert 1.0 <= state.t_hat < 1.0 + 0.04
        assert all(g != 0 for g in state.gamma_history)

    def test_observer_sees_every_step(self, gausson_grid):
        seen = []
        state = run(gausson0(gausson_grid), 0.5, cfg_for("RK(1,2)", tau=0.1),
                    observer=lambda *a: seen.append(a))
        assert [s[0] for s in seen] == list(range(1, state.step_index + 1))
        assert seen[-1][1] == state.t_hat

    def test_compensated_time_sum(self):
        s = SolverState.initial(SpectralField(Grid1D(0, 1, 2), np.zeros(2)))
        for _ in range(10**5):
            s.advance_time(0.1)
        assert s.t_hat == pytest.approx(1e4, abs=1e-11)

    def test_deterministic(self, gausson_grid):
        a = run(gausson0(gausson_grid), 0.3, cfg_for("RK(6,4)", tau=0.02))
        b = run(gausson0(gausson_grid), 0.3, cfg_for("RK(6,4)", tau=0.02))
        assert np.array_equal(a.u.values, b.u.values)


class TestAccuracy:
    def test_gausson_sign_convention(self, gausson_grid):
        # with the other sign of the nonlinearity the phase would rotate the wrong way
        state = run(gausson0(gausson_grid), 1.0, cfg_for("RK(6,4)", tau=0.01, eps=1e-8))
        exact = exact_gausson(gausson_grid.nodes, state.t_hat)
        assert gausson_grid.norm(state.u.values - exact) < 1e-6

    @pytest.mark.parametrize("name", NAMES)
    def test_linear_order(self, name):
        grid = Grid1D(0.0, 2 * np.pi, 16)
        p = load_tableau(name).order
        errs = []
        for tau in TAUS:
            s = run(SpectralField(grid, plane_wave(grid, 3)), 1.0, cfg_for(name, tau, lam=0.0, relaxation=False))
            errs.append(grid.norm(s.u.values - plane_wave(grid, 3, s.t_hat)))
        slope = np.polyfit(np.log(TAUS[-3:]), np.log(errs[-3:]), 1)[0]
        assert abs(slope - p) <= 0.2

    def test_linear_mass_exact_with_relaxation(self):
        grid = Grid1D(0.0, 2 * np.pi, 16)
        u0 = SpectralField(grid, plane_wave(grid, 2) + 0.5 * plane_wave(grid, -5))
        s = run(u0, 1.0, cfg_for("RK(2,3)", 0.05, lam=0.0))
        assert s.relative_mass_error.max() < 1e-14
