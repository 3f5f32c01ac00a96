"""Convergence studies and dynamics runs for the regularized LogSE.

All error norms are the discrete L2 norm ``sqrt(h * sum |.|^2)`` on the grid
the numerical solution lives on.  A fine-grid reference is compared with a
coarse solution by evaluating the reference's Fourier interpolant at the
coarse nodes (plain subsampling when the nodes nest).
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigurationError
from .integrator import SolverConfig, SolverState, integrate_to
from .log_regularization import ModelParams, RegularizationParams, energy, energy_regularized
from .spectral_grid import Grid1D, SpectralField
from .tableaux import load_tableau

log = logging.getLogger(__name__)

NORM_NAME = "discrete L2, sqrt(h*sum|v_j|^2)"
CSV_COLUMNS = (
    "series", "param", "error_e", "error_ehat", "error_rho", "error_energy",
    "observed_order", "max_gamma_dev", "t_final_achieved",
)


# -- exact and initial data --------------------------------------------------

@dataclass(frozen=True)
class GaussonParams:
    b: float = 1.0
    zeta: float = 0.0
    lam: float = -1.0

    @property
    def a(self) -> float:
        return -self.lam * (1.0 - math.log(self.b**2))


def exact_gausson(x, t: float, g: GaussonParams = GaussonParams()):
    """Travelling Gausson ``b exp(i(x zeta - (a + zeta^2) t) + lam/2 (x - 2 zeta t)^2)``."""
    x = np.asarray(x, dtype=float)
    phase = x * g.zeta - (g.a + g.zeta**2) * t
    return g.b * np.exp(1j * phase + 0.5 * g.lam * (x - 2.0 * g.zeta * t) ** 2)


@dataclass(frozen=True)
class GaussonComponent:
    b: float
    a: float
    x0: float
    v: float


TWO_GAUSSONS = (GaussonComponent(1.0, 1.0, -30.0, 2.0), GaussonComponent(1.0, 1.0, 30.0, -2.0))


def multi_gausson(x, components=TWO_GAUSSONS):
    x = np.asarray(x, dtype=float)
    if not components:
        raise ConfigurationError("need at least one Gausson component")
    out = np.zeros(x.shape, dtype=complex)
    for c in components:
        out += c.b * np.exp(-0.5 * c.a * (x - c.x0) ** 2 + 1j * c.v * x)
    return out


def two_gausson_initial(grid: Grid1D, components=TWO_GAUSSONS) -> SpectralField:
    return SpectralField(grid, multi_gausson(grid.nodes, components))


@dataclass(frozen=True)
class GaussonProblem:
    params: GaussonParams = GaussonParams()

    @property
    def key(self) -> str:
        p = self.params
        return f"gausson(b={p.b!r},zeta={p.zeta!r},lam={p.lam!r})"

    def initial(self, grid: Grid1D) -> SpectralField:
        return SpectralField(grid, exact_gausson(grid.nodes, 0.0, self.params))

    def exact(self, grid: Grid1D, t: float) -> np.ndarray:
        return exact_gausson(grid.nodes, t, self.params)


@dataclass(frozen=True)
class MultiGaussonProblem:
    components: tuple = TWO_GAUSSONS

    @property
    def key(self) -> str:
        parts = ";".join(f"{c.b!r},{c.a!r},{c.x0!r},{c.v!r}" for c in self.components)
        return f"multigausson({parts})"

    def initial(self, grid: Grid1D) -> SpectralField:
        return two_gausson_initial(grid, self.components)


# -- reference solutions and cache ---------------------------------------------

@dataclass
class ReferenceSolution:
    metadata: dict
    grid: Grid1D
    values: np.ndarray
    t_final: float

    def sample(self, grid: Grid1D) -> np.ndarray:
        if grid == self.grid:
            return self.values.copy()
        if not (grid.a == self.grid.a and grid.b == self.grid.b):
            raise ConfigurationError("reference and study grids cover different intervals")
        return self.grid.interpolate(self.values, grid.nodes)


def reference_metadata(problem, cfg: SolverConfig, grid: Grid1D, tau_e: float, T: float) -> dict:
    return {
        "problem": problem.key,
        "eps": repr(cfg.reg.eps),
        "k": str(cfg.reg.k),
        "lambda": repr(cfg.model.lam),
        "tableau": cfg.tableau.name,
        "relaxation": str(cfg.relaxation),
        "a": repr(grid.a),
        "b": repr(grid.b),
        "n_points": str(grid.n_points),
        "tau_e": repr(tau_e),
        "T": repr(T),
    }


def _cache_path(cache_dir: Path, metadata: dict) -> Path:
    text = " ".join(f"{k}={v}" for k, v in metadata.items())
    digest = hashlib.sha256(text.encode()).hexdigest()[:20]
    return cache_dir / f"ref_{digest}.txt"


def write_reference(path: Path, ref: ReferenceSolution) -> None:
    header = dict(ref.metadata, t_final_achieved=repr(ref.t_final))
    buf = io.StringIO()
    buf.write(" ".join(f"{k}={v}" for k, v in header.items()) + "\n")
    for x, u in zip(ref.grid.nodes, ref.values):
        buf.write(f"{x:.17g} {u.real:.17g} {u.imag:.17g}\n")
    tmp = path.with_suffix(f".tmp{os.getpid()}_{threading.get_ident()}")
    tmp.write_text(buf.getvalue(), encoding="utf-8")
    os.replace(tmp, path)


def read_reference(path: Path) -> ReferenceSolution:
    lines = path.read_text(encoding="utf-8").splitlines()
    meta = dict(item.split("=", 1) for item in lines[0].split())
    t_final = float(meta.pop("t_final_achieved"))
    data = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    grid = Grid1D(float(meta["a"]), float(meta["b"]), int(meta["n_points"]))
    if data.shape != (grid.n_points, 3):
        raise ValueError(f"expected {grid.n_points} rows of 3 numbers, got {data.shape}")
    return ReferenceSolution(meta, grid, data[:, 1] + 1j * data[:, 2], t_final)


_cache_guard = threading.Lock()
_key_locks: dict = {}


def _lock_for(key: str) -> threading.Lock:
    with _cache_guard:
        return _key_locks.setdefault(key, threading.Lock())


def make_reference(cfg: SolverConfig, grid_fine: Grid1D, tau_e: float, T: float,
                   problem=GaussonProblem(), cache_dir=None) -> ReferenceSolution:
    """Fine-step solution at ``T`` (landing exactly on ``T``), cached on disk."""
    cfg = replace(cfg, tau=tau_e, final_time_mode="adjust_last_step")
    meta = reference_metadata(problem, cfg, grid_fine, tau_e, T)
    path = _cache_path(Path(cache_dir), meta) if cache_dir else None
    with _lock_for(str(path) if path else repr(meta)):
        if path is not None and path.exists():
            try:
                ref = read_reference(path)
                if ref.metadata == meta:
                    return ref
                log.warning("reference cache %s has mismatched metadata; recomputing", path)
            except (ValueError, KeyError, IndexError) as exc:
                log.warning("reference cache %s unreadable (%s); recomputing", path, exc)
        state = integrate_to(SolverState.initial(problem.initial(grid_fine)), T, cfg)
        ref = ReferenceSolution(meta, grid_fine, state.u.values, state.t_hat)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            write_reference(path, ref)
            # hand back exactly what a later cache hit would return
            ref = read_reference(path)
        return ref


# -- reports -------------------------------------------------------------------

@dataclass
class ErrorRow:
    series: str
    param: float
    error_e: float = math.nan
    error_ehat: float = math.nan
    error_rho: float = math.nan
    error_energy: float = math.nan
    observed_order: float = math.nan
    max_gamma_dev: float = math.nan
    t_final_achieved: float = math.nan
    error_total: float = math.nan  # ||u_ex - u||, kept for the triangle check only

    def triangle_ok(self, rtol: float = 1e-12) -> bool:
        if any(math.isnan(v) for v in (self.error_total, self.error_e, self.error_ehat)):
            return True
        bound = self.error_e + self.error_ehat
        return self.error_total <= bound * (1 + rtol) + 1e-300


@dataclass
class StudyReport:
    study: str
    rows: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)  # series -> {quantity: value}
    norm: str = NORM_NAME

    def series(self, name: str) -> list:
        return [r for r in self.rows if r.series == name]

    def series_names(self) -> list:
        return list(dict.fromkeys(r.series for r in self.rows))

    def check_triangle(self) -> None:
        bad = [r for r in self.rows if not r.triangle_ok()]
        if bad:
            raise AssertionError(f"triangle inequality violated on {len(bad)} row(s) of {self.study}")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return f"{v:.17g}"


def report_csv(report: StudyReport) -> str:
    buf = io.StringIO()
    buf.write(f"# study={report.study} norm={report.norm}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def fits_csv(report: StudyReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("series", "quantity", "value"))
    for series, values in report.fits.items():
        for q, v in values.items():
            w.writerow((series, q, _fmt(v)))
    return buf.getvalue()


def write_report(report: StudyReport, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{report.study}.csv", out / f"{report.study}_fits.csv"]
    paths[0].write_text(report_csv(report), encoding="utf-8")
    paths[1].write_text(fits_csv(report), encoding="utf-8")
    return paths


def loglog_slope(params, values) -> float:
    """Least-squares slope of log(values) against log(params)."""
    p = np.asarray(params, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(p) < 2:
        return math.nan
    return float(np.polyfit(np.log(p), np.log(v), 1)[0])


def local_orders(params, errors) -> list:
    """``log(e_j/e_{j+1}) / log(p_j/p_{j+1})`` for consecutive rows (first entry NaN)."""
    out = [math.nan]
    for j in range(1, len(errors)):
        out.append(math.log(errors[j - 1] / errors[j]) / math.log(params[j - 1] / params[j]))
    return out


def asymptotic_order(params, errors, floor: float, n_fit: int = 3) -> float:
    """Fitted order over the finest ``n_fit`` rows whose errors exceed ``floor``."""
    keep = [(p, e) for p, e in zip(params, errors) if e > floor]
    keep = sorted(keep, key=lambda pe: -pe[0])[-n_fit:]
    if len(keep) < 2:
        return math.nan
    return loglog_slope([p for p, _ in keep], [e for _, e in keep])


# -- helpers -------------------------------------------------------------------

def _pmap(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _grid(cfg: ExperimentConfig, n: int | None = None) -> Grid1D:
    return Grid1D(cfg.domain_left, cfg.domain_right, cfg.n_points if n is None else n)


def _solver_cfg(cfg: ExperimentConfig, tableau: str | None = None, tau: float | None = None,
                eps: float | None = None, k: int | None = None) -> SolverConfig:
    return SolverConfig(
        tau=cfg.tau if tau is None else tau,
        tableau=load_tableau(tableau or cfg.tableau),
        reg=RegularizationParams(cfg.eps if eps is None else eps, cfg.reg_order if k is None else k),
        model=ModelParams(cfg.lam),
        final_time_mode=cfg.final_time_mode,
        relaxation=cfg.relaxation,
    )


def _problem(cfg: ExperimentConfig) -> GaussonProblem:
    return GaussonProblem(GaussonParams(cfg.b, cfg.zeta, cfg.lam))


def _solve(u0: SpectralField, T: float, scfg: SolverConfig) -> SolverState:
    return integrate_to(SolverState.initial(u0), T, scfg)


def _max_gamma_dev(state: SolverState) -> float:
    g = np.asarray(state.gamma_history)
    return float(np.max(np.abs(g - 1.0))) if g.size else 0.0


def _cache(cfg: ExperimentConfig):
    return cfg.cache_dir or None


# -- studies -------------------------------------------------------------------

def study_epsilon(eps_list, k_list, cfg: ExperimentConfig) -> StudyReport:
    """Regularization error against the exact Gausson, for each ``(k, eps)``."""
    report = StudyReport("converge-eps")
    problem = _problem(cfg)
    grid = _grid(cfg, cfg.n_ref)
    model = ModelParams(cfg.lam)
    u0 = problem.initial(grid)
    T = cfg.final_time

    def point(item):
        k, eps = item
        scfg = _solver_cfg(cfg, eps=eps, k=k)
        ref = make_reference(scfg, grid, cfg.tau_ref, T, problem, _cache(cfg))
        exact = problem.exact(grid, T)
        e_energy = energy(u0, model) - energy_regularized(u0, scfg.reg, model)
        return ErrorRow(
            series=f"k={k}", param=eps,
            error_ehat=grid.norm(exact - ref.values),
            error_rho=grid.norm(np.abs(exact) ** 2 - np.abs(ref.values) ** 2),
            error_energy=e_energy,
            t_final_achieved=ref.t_final,
        )

    items = [(k, eps) for k in k_list for eps in eps_list]
    report.rows = _pmap(point, items, cfg.threads)
    for name in report.series_names():
        rows = report.series(name)
        eps = [r.param for r in rows]
        report.fits[name] = {
            "slope_error_ehat": loglog_slope(eps, [r.error_ehat for r in rows]),
            "slope_error_rho": loglog_slope(eps, [r.error_rho for r in rows]),
            "slope_error_energy": loglog_slope(eps, [abs(r.error_energy) for r in rows]),
        }
    return report


def _reference_floor(cfg: ExperimentConfig, scfg: SolverConfig, grid: Grid1D, ref, problem):
    if cfg.order_floor > 0:
        return cfg.order_floor
    coarse = make_reference(scfg, grid, 2 * cfg.tau_ref, cfg.final_time, problem, _cache(cfg))
    return max(100.0 * grid.norm(coarse.values - ref.values), 1e-13)


def study_time(tau_list, tableau_list, eps: float, k: int, cfg: ExperimentConfig) -> StudyReport:
    """Temporal errors against a same-eps fine-step reference on the study grid."""
    report = StudyReport("converge-time")
    problem = _problem(cfg)
    grid = _grid(cfg)
    T = cfg.final_time
    ref_scfg = _solver_cfg(cfg, tableau=cfg.ref_tableau or None, eps=eps, k=k)
    ref = make_reference(ref_scfg, grid, cfg.tau_ref, T, problem, _cache(cfg))
    floor = _reference_floor(cfg, ref_scfg, grid, ref, problem)
    exact = problem.exact(grid, ref.t_final)
    ehat = grid.norm(exact - ref.values)
    u0 = problem.initial(grid)
    taus = sorted(tau_list, reverse=True)

    def point(item):
        name, tau = item
        state = _solve(u0, T, _solver_cfg(cfg, tableau=name, tau=tau, eps=eps, k=k))
        return ErrorRow(
            series=f"{name} eps={eps:g} k={k}", param=tau,
            error_e=grid.norm(ref.values - state.u.values),
            error_ehat=ehat,
            max_gamma_dev=_max_gamma_dev(state),
            t_final_achieved=state.t_hat,
            error_total=grid.norm(exact - state.u.values),
        )

    report.rows = _pmap(point, [(n, t) for n in tableau_list for t in taus], cfg.threads)
    report.check_triangle()
    for name in report.series_names():
        rows = report.series(name)
        params = [r.param for r in rows]
        errs = [r.error_e for r in rows]
        for r, q in zip(rows, local_orders(params, errs)):
            r.observed_order = q
        report.fits[name] = {
            "declared_order": float(load_tableau(name.split()[0]).order),
            "observed_order": asymptotic_order(params, errs, floor),
            "reference_floor": floor,
            "slope_max_gamma_dev": loglog_slope(params, [r.max_gamma_dev for r in rows]),
        }
    return report


def study_space(N_list, cfg: ExperimentConfig) -> StudyReport:
    """Spatial errors against an ``n_ref``-point reference with the same time step."""
    report = StudyReport("converge-space")
    problem = _problem(cfg)
    T = cfg.final_time
    scfg = _solver_cfg(cfg)
    ref = make_reference(scfg, _grid(cfg, cfg.n_ref), cfg.tau_ref, T, problem, _cache(cfg))

    def point(n):
        grid = _grid(cfg, n)
        state = _solve(problem.initial(grid), T, scfg)
        ref_here = ref.sample(grid)
        exact = problem.exact(grid, ref.t_final)
        return ErrorRow(
            series=f"{scfg.tableau.name} eps={scfg.reg.eps:g} k={scfg.reg.k}", param=float(n),
            error_e=grid.norm(ref_here - state.u.values),
            error_ehat=grid.norm(exact - ref_here),
            max_gamma_dev=_max_gamma_dev(state),
            t_final_achieved=state.t_hat,
            error_total=grid.norm(exact - state.u.values),
        )

    ns = sorted(N_list)
    report.rows = _pmap(point, ns, cfg.threads)
    report.check_triangle()
    h = [(cfg.domain_right - cfg.domain_left) / n for n in ns]
    for r, q in zip(report.rows, local_orders(h, [r.error_e for r in report.rows])):
        r.observed_order = q
    return report


def study_gamma(tau_list, tableau_list, cfg: ExperimentConfig) -> StudyReport:
    """``max_n |gamma_n - 1|`` per tableau and step size."""
    report = StudyReport("gamma-study")
    problem = _problem(cfg)
    grid = _grid(cfg)
    u0 = problem.initial(grid)
    taus = sorted(tau_list, reverse=True)

    def point(item):
        name, tau = item
        state = _solve(u0, cfg.final_time, _solver_cfg(cfg, tableau=name, tau=tau))
        return ErrorRow(series=name, param=tau, max_gamma_dev=_max_gamma_dev(state),
                        t_final_achieved=state.t_hat)

    report.rows = _pmap(point, [(n, t) for n in tableau_list for t in taus], cfg.threads)
    for name in report.series_names():
        rows = report.series(name)
        params = [r.param for r in rows]
        devs = [r.max_gamma_dev for r in rows]
        for r, q in zip(rows, local_orders(params, devs)):
            r.observed_order = q
        report.fits[name] = {
            "declared_order": float(load_tableau(name).order),
            "slope_max_gamma_dev": loglog_slope(params, devs),
        }
    return report


@dataclass
class DynamicsResult:
    grid: Grid1D
    snapshot_times: list
    snapshots: list  # |u| at each achieved snapshot time
    steps: list
    times: list
    gammas: list
    masses: list

    @property
    def relative_mass_error(self) -> np.ndarray:
        m = np.asarray(self.masses)
        return np.abs(m - m[0]) / m[0]


def run_dynamics(cfg: ExperimentConfig, problem=MultiGaussonProblem()) -> DynamicsResult:
    """Integrate colliding Gaussons, recording ``|u|`` snapshots and the mass history."""
    grid = _grid(cfg)
    scfg = _solver_cfg(cfg)
    state = SolverState.initial(problem.initial(grid))
    res = DynamicsResult(grid, [], [], [0], [0.0], [], [state.mass_history[0]])

    def observer(n, t, gamma, mass):
        res.steps.append(n)
        res.times.append(t)
        res.gammas.append(gamma)
        res.masses.append(mass)

    targets = sorted(set(float(t) for t in cfg.snapshot_times) | {float(cfg.final_time)})
    for t in targets:
        if t > cfg.final_time:
            break
        if t > state.t_hat:
            integrate_to(state, t, scfg, observer)
        res.snapshot_times.append(state.t_hat)
        res.snapshots.append(np.abs(state.u.values))
    return res


def write_dynamics(res: DynamicsResult, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    snap = out / "dynamics_snapshots.csv"
    with snap.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x"] + [f"abs_u_t={_fmt(t)}" for t in res.snapshot_times])
        for j, x in enumerate(res.grid.nodes):
            w.writerow([_fmt(x)] + [_fmt(s[j]) for s in res.snapshots])
    mass = out / "dynamics_mass.csv"
    rel = res.relative_mass_error
    with mass.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "t_hat", "gamma", "mass", "relative_mass_error"])
        for i, n in enumerate(res.steps):
            gamma = res.gammas[i - 1] if i else 1.0
            w.writerow([n, _fmt(res.times[i]), _fmt(gamma), _fmt(res.masses[i]), _fmt(rel[i])])
    return [snap, mass]


def density_centroid(grid: Grid1D, u: np.ndarray, window) -> float:
    """Centroid of ``|u|^2`` restricted to ``window = (lo, hi)``."""
    lo, hi = window
    mask = (grid.nodes >= lo) & (grid.nodes < hi)
    rho = np.abs(u[mask]) ** 2
    return float(np.sum(grid.nodes[mask] * rho) / np.sum(rho))
