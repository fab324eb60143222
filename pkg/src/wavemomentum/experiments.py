"""
Coupled KdV / Peregrine / water-wave runs and convergence-rate fitting.

All three models start from one surface profile.  The water-wave potential is
chosen so that its depth-averaged velocity equals the KdV velocity
reconstruction, and the Peregrine velocity is that same averaged velocity, so
the two Peregrine comparisons start from identical data.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats

from . import kdv, peregrine, waterwave
from .kdv import KdVState, Soliton
from .peregrine import PeregrineState
from .spectral import Grid1D, ModelParams, edge_magnitude
from .waterwave import VerticalGrid, WaterWaveState

log = logging.getLogger(__name__)

LOCALIZATION_TOL = 1e-8
SOBOLEV_INDEX = 2.0

# error family -> how a time series is reduced to one number per sweep point
FAMILY_METRICS = {
    "momentum": "sup_over_1pt",
    "kdv_pair_linf": "sup_over_1pt",
    "ww_pair_linf": "sup_over_1pt",
    "kdv_pair_hsmu": "sup_over_1pt",
    "ww_pair_hsmu": "sup_over_1pt",
    "residual_r": "sup_over_1pt",
    "residual_R": "sup_over_1pt",
    "proofbound": "sup_t_le_1",
}

EXPECTED_SLOPES = {
    "momentum": 2.0,
    "kdv_pair_linf": 2.0,
    "ww_pair_linf": 2.0,
    "kdv_pair_hsmu": 2.0,
    "ww_pair_hsmu": 2.0,
    "residual_r": 2.0,
    "residual_R": 2.0,
    "proofbound": 1.0,
}


class LocalizationError(RuntimeError):
    """The solution reached the periodic seam."""


class TimeMismatchError(ValueError):
    pass


class RunFailure(RuntimeError):
    """A solver failed inside a coupled run; the message names the model and time."""


@dataclass(frozen=True)
class InitialProfile:
    shape: str = "gaussian"
    amplitude: float = 1.0
    width: float = 2.0
    center: float | None = None

    def __post_init__(self):
        if self.shape not in ("gaussian", "sech2", "soliton"):
            raise ValueError(f"unknown profile shape {self.shape!r}")

    def sample(self, grid: Grid1D, p: ModelParams) -> np.ndarray:
        x0 = 0.5 * grid.L if self.center is None else self.center
        if self.shape == "soliton":
            return Soliton(self.amplitude, x0, p).profile(grid)
        s = (grid.x - x0) / self.width
        if self.shape == "gaussian":
            return self.amplitude * np.exp(-(s**2))
        return self.amplitude / np.cosh(s) ** 2

    def check_localized(self, values: np.ndarray) -> None:
        peak = float(np.max(np.abs(values)))
        if peak > 0 and edge_magnitude(values) > LOCALIZATION_TOL * peak:
            raise LocalizationError(
                f"profile is not localized: edge value {edge_magnitude(values):.3e} vs peak {peak:.3e}"
            )


@dataclass
class CoupledInitialData:
    eta0: np.ndarray
    xi0: np.ndarray
    u0: np.ndarray
    zeta0: np.ndarray
    phi0: np.ndarray
    mean_slope: float
    inversion_iterations: int = 0

    def kdv_state(self) -> KdVState:
        return KdVState(self.eta0.copy())

    def peregrine_state(self) -> PeregrineState:
        return PeregrineState(self.xi0.copy(), self.u0.copy())

    def waterwave_state(self) -> WaterWaveState:
        return WaterWaveState(self.zeta0.copy(), self.phi0.copy(), mean_slope=self.mean_slope)


def _flat_average_symbol(grid: Grid1D, p: ModelParams) -> np.ndarray:
    # depth average of phi_x for a flat strip: tanh(sqrt(mu) k) / (sqrt(mu) k)
    q = np.sqrt(p.mu) * grid.k
    out = np.ones_like(q)
    out[1:] = np.tanh(q[1:]) / q[1:]
    return out


def surface_potential_for_velocity(zeta, target, grid: Grid1D, p: ModelParams, vg: VerticalGrid,
                                   tol: float = 1e-13, maxiter: int = 60):
    """Find ``(phi_s, mean_slope)`` whose depth-averaged velocity equals ``target``.

    Fixed-point iteration preconditioned by the flat-strip averaging symbol.
    Returns ``(phi_s, mean_slope, potential, iterations)``.
    """
    solver = waterwave.PotentialSolver(grid, vg, p)
    inverse = 1.0 / _flat_average_symbol(grid, p)
    scale = max(1.0, grid.norm_linf(target))

    def correction(res):
        c = np.fft.irfft(inverse * np.fft.rfft(res), n=grid.N)
        mean = float(np.mean(c))
        return grid.antiderivative(c - mean), mean

    phi_s, slope = correction(target)
    for it in range(1, maxiter + 1):
        pf = solver.solve(zeta, phi_s, slope)
        res = target - waterwave.averaged_velocity(pf)
        if grid.norm_linf(res) <= tol * scale:
            return phi_s, slope, pf, it
        dphi, dslope = correction(res)
        phi_s = phi_s + dphi
        slope += dslope
    raise waterwave.EllipticSolveError(
        f"velocity inversion did not converge: residual {grid.norm_linf(res):.3e}"
    )


def build_coupled_initial_data(profile: InitialProfile, p: ModelParams, vg: VerticalGrid,
                               grid: Grid1D) -> CoupledInitialData:
    zeta0 = profile.sample(grid, p)
    profile.check_localized(zeta0)
    target = kdv.v_kdv(zeta0, grid, p)
    if not np.any(zeta0):
        zeros = np.zeros(grid.N)
        return CoupledInitialData(zeros, zeros.copy(), zeros.copy(), zeros.copy(), zeros.copy(), 0.0)
    phi0, slope, pf, iters = surface_potential_for_velocity(zeta0, target, grid, p, vg)
    u0 = waterwave.averaged_velocity(pf)
    log.debug("velocity inversion converged in %d iterations (mean slope %.3e)", iters, slope)
    return CoupledInitialData(
        eta0=zeta0.copy(), xi0=zeta0.copy(), u0=u0, zeta0=zeta0.copy(), phi0=phi0,
        mean_slope=slope, inversion_iterations=iters,
    )


# error quantities ----------------------------------------------------------


def _same_time(a, b):
    if not math.isclose(a.t, b.t, rel_tol=0.0, abs_tol=1e-9):
        raise TimeMismatchError(f"states at different times: {a.t} vs {b.t}")


def momentum_error(ww: WaterWaveState, kdv_state: KdVState, p: ModelParams, vg: VerticalGrid,
                   grid: Grid1D, pf: waterwave.PotentialField | None = None) -> float:
    """``|| int phi_x dz - I(eta) ||_inf``."""
    _same_time(ww, kdv_state)
    if pf is None:
        pf = waterwave.solve_potential(ww.zeta, ww.phi_s, p, vg, grid, ww.mean_slope)
    diff = waterwave.momentum_density_exact(pf) - kdv.momentum_density_I(kdv_state.eta, grid, p)
    return grid.norm_linf(diff)


def pair_error(surface_a, velocity_a, surface_b, velocity_b, grid: Grid1D, p: ModelParams,
               s: float = SOBOLEV_INDEX):
    """``(L_inf, H^s x H^s_mu)`` distance between two (surface, velocity) pairs."""
    ds = surface_a - surface_b
    dv = velocity_a - velocity_b
    linf = max(grid.norm_linf(ds), grid.norm_linf(dv))
    hs = math.hypot(grid.norm_hs_mu(ds, s, 0.0), grid.norm_hs_mu(dv, s, p.mu))
    return linf, hs


def pair_error_kdv(kdv_state: KdVState, pg: PeregrineState, grid: Grid1D, p: ModelParams,
                   s: float = SOBOLEV_INDEX):
    _same_time(kdv_state, pg)
    v = kdv.v_kdv(kdv_state.eta, grid, p)
    return pair_error(kdv_state.eta, v, pg.xi, pg.u, grid, p, s)


def pair_error_ww(ww: WaterWaveState, pg: PeregrineState, grid: Grid1D, p: ModelParams,
                  vg: VerticalGrid, s: float = SOBOLEV_INDEX, pf=None):
    _same_time(ww, pg)
    if pf is None:
        pf = waterwave.solve_potential(ww.zeta, ww.phi_s, p, vg, grid, ww.mean_slope)
    return pair_error(ww.zeta, waterwave.averaged_velocity(pf), pg.xi, pg.u, grid, p, s)


def kdv_consistency_residuals(eta: np.ndarray, grid: Grid1D, p: ModelParams):
    """Peregrine residuals of ``(eta, v_kdv(eta))`` with time derivatives from the KdV equation."""
    v = kdv.v_kdv(eta, grid, p)
    eta_t, v_t, v_xxt = kdv.velocity_time_derivatives(eta, grid, p)
    return peregrine.consistency_residuals(eta, v, eta_t, v_t, v_xxt, grid, p)


# coupled runs ---------------------------------------------------------------


@dataclass(frozen=True)
class TripleConfig:
    eps: float
    mu: float
    L: float = 80.0
    N: int = 512
    Nz: int = 24
    T: float = 5.0
    dt: float = 0.01
    sample_interval: float = 0.1
    profile: InitialProfile = field(default_factory=InitialProfile)

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.eps, self.mu)

    @property
    def grid(self) -> Grid1D:
        return Grid1D(self.L, self.N)

    @property
    def vgrid(self) -> VerticalGrid:
        return VerticalGrid(self.Nz)

    def step_counts(self) -> tuple[int, int]:
        nsteps = round(self.T / self.dt)
        every = round(self.sample_interval / self.dt)
        if every < 1 or not math.isclose(every * self.dt, self.sample_interval, rel_tol=1e-9):
            raise ValueError(f"sample_interval {self.sample_interval} is not a multiple of dt {self.dt}")
        if not math.isclose(nsteps * self.dt, self.T, rel_tol=1e-9) or nsteps % every:
            raise ValueError(f"T {self.T} is not a multiple of sample_interval {self.sample_interval}")
        return nsteps, every

    def refined(self) -> "TripleConfig":
        """Double N and Nz, halve dt."""
        return replace(self, N=2 * self.N, Nz=2 * self.Nz, dt=0.5 * self.dt)


SERIES = (
    "E_momentum", "E_kdv_pair_linf", "E_ww_pair_linf", "E_kdv_pair_hsmu", "E_ww_pair_hsmu",
    "residual_r_linf", "residual_R_linf", "proofbound_linf", "mass_kdv", "mass_peregrine", "mass_ww",
)

FAMILY_SERIES = {
    "momentum": "E_momentum",
    "kdv_pair_linf": "E_kdv_pair_linf",
    "ww_pair_linf": "E_ww_pair_linf",
    "kdv_pair_hsmu": "E_kdv_pair_hsmu",
    "ww_pair_hsmu": "E_ww_pair_hsmu",
    "residual_r": "residual_r_linf",
    "residual_R": "residual_R_linf",
    "proofbound": "proofbound_linf",
}


@dataclass
class RunResult:
    eps: float
    mu: float
    times: np.ndarray
    series: dict
    edge_max: float = 0.0
    inversion_iterations: int = 0
    mean_slope: float = 0.0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("sample times must be strictly increasing")
        for name, values in self.series.items():
            values = np.asarray(values, dtype=float)
            if not np.all(np.isfinite(values)):
                raise ValueError(f"non-finite values in series {name}")
            self.series[name] = values

    def __getitem__(self, name) -> np.ndarray:
        return self.series[name]

    def envelope(self, name: str) -> float:
        """Smallest C with ``E(t) <= C (1 + t)`` at every sample."""
        return float(np.max(self.series[name] / (1.0 + self.times)))

    def reduce(self, family: str, metric: str | None = None) -> float:
        values = self.series[FAMILY_SERIES[family]]
        metric = metric or FAMILY_METRICS[family]
        if metric == "sup_over_1pt":
            return float(np.max(values / (1.0 + self.times)))
        if metric == "sup":
            return float(np.max(values))
        if metric == "final":
            return float(values[-1])
        if metric == "sup_t_le_1":
            return float(np.max(values[self.times <= 1.0 + 1e-9]))
        raise ValueError(f"unknown metric {metric!r}")

    def rows(self):
        for i, t in enumerate(self.times):
            yield [float(t)] + [float(self.series[name][i]) for name in SERIES]


def run_triple(config: TripleConfig) -> RunResult:
    """Step all three models from coupled data and sample every error quantity."""
    p, grid, vg = config.params, config.grid, config.vgrid
    nsteps, every = config.step_counts()
    data = build_coupled_initial_data(config.profile, p, vg, grid)

    kdv_stepper = kdv.KdVStepper(grid, p, config.dt)
    pg_stepper = peregrine.PeregrineStepper(grid, p, config.dt)
    ww_model = waterwave.ZCSModel(grid, vg, p)
    ks, ps, ws = data.kdv_state(), data.peregrine_state(), data.waterwave_state()

    times = []
    series = {name: [] for name in SERIES}
    edge_max = 0.0
    for n in range(0, nsteps + 1, every):
        if n > 0:
            t_next = n * config.dt
            try:
                ks = kdv_stepper.step(ks, every)
            except Exception as exc:
                raise RunFailure(f"kdv failed near t={t_next:g} (mu={p.mu}): {exc}") from exc
            try:
                ps = pg_stepper.step(ps, every)
            except Exception as exc:
                raise RunFailure(f"peregrine failed near t={t_next:g} (mu={p.mu}): {exc}") from exc
            try:
                ws = ww_model.step(ws, config.dt, every)
            except Exception as exc:
                raise RunFailure(f"waterwave failed near t={t_next:g} (mu={p.mu}): {exc}") from exc
            # exact sample times; accumulated dt sums would drift in the last digit
            ks = replace(ks, t=t_next)
            ps = replace(ps, t=t_next)
            ws = replace(ws, t=t_next)

        pf = ww_model.potential(ws)
        vbar = waterwave.averaged_velocity(pf)
        eta = ks.eta
        kp = pair_error_kdv(ks, ps, grid, p)
        wp = pair_error_ww(ws, ps, grid, p, vg, pf=pf)
        r, R = kdv_consistency_residuals(eta, grid, p)

        times.append(ks.t)
        series["E_momentum"].append(momentum_error(ws, ks, p, vg, grid, pf=pf))
        series["E_kdv_pair_linf"].append(kp[0])
        series["E_ww_pair_linf"].append(wp[0])
        series["E_kdv_pair_hsmu"].append(kp[1])
        series["E_ww_pair_hsmu"].append(wp[1])
        series["residual_r_linf"].append(grid.norm_linf(r))
        series["residual_R_linf"].append(grid.norm_linf(R))
        series["proofbound_linf"].append(grid.norm_linf(kdv.proof_bound_quantity(eta, grid, p)))
        series["mass_kdv"].append(grid.integral(eta))
        series["mass_peregrine"].append(grid.integral(ps.xi))
        series["mass_ww"].append(grid.integral(ws.zeta))

        edge = max(edge_magnitude(f) for f in (eta, ps.xi, ps.u, ws.zeta, vbar))
        edge_max = max(edge_max, edge)
        if edge > LOCALIZATION_TOL:
            raise LocalizationError(f"wave reached the periodic seam at t={ks.t:g}: {edge:.3e}")

    return RunResult(eps=p.eps, mu=p.mu, times=np.array(times), series=series, edge_max=edge_max,
                     inversion_iterations=data.inversion_iterations, mean_slope=data.mean_slope)


# rate fitting ---------------------------------------------------------------


@dataclass
class RateFit:
    slope: float
    intercept: float
    r2: float
    points: list

    def within(self, expected: float, band: float = 0.3) -> bool:
        return abs(self.slope - expected) <= band


def fit_rate(points) -> RateFit:
    """Least-squares slope of ``log E`` against ``log mu``."""
    points = [(float(m), float(e)) for m, e in points]
    if len(points) < 3:
        raise ValueError(f"need at least 3 points, got {len(points)}")
    mus = np.array([m for m, _ in points])
    errs = np.array([e for _, e in points])
    if np.any(mus <= 0) or np.any(errs <= 0):
        raise ValueError("rate fit needs positive mu and error values")
    if np.ptp(np.log(mus)) < 1e-12:
        raise ValueError("rate fit needs at least two distinct mu values")
    fit = stats.linregress(np.log(mus), np.log(errs))
    return RateFit(slope=float(fit.slope), intercept=float(fit.intercept), r2=float(fit.rvalue**2),
                   points=points)


@dataclass(frozen=True)
class SweepConfig:
    mus: tuple = (0.08, 0.04, 0.02, 0.01)
    eps_ratio: float = 1.0
    base: TripleConfig = field(default_factory=lambda: TripleConfig(eps=0.08, mu=0.08))
    workers: int = 1

    def point(self, mu: float) -> TripleConfig:
        return replace(self.base, mu=mu, eps=self.eps_ratio * mu)


@dataclass
class SweepReport:
    config: SweepConfig
    runs: list
    fits: dict
    alt_fits: dict

    def rows(self):
        """One row per error family: name, metric, slope, intercept, r2, then per-mu values."""
        for family, fit in self.fits.items():
            yield family, FAMILY_METRICS[family], fit

    def as_dict(self) -> dict:
        def fit_dict(fit):
            return {
                "slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
                "points": [{"mu": m, "value": v} for m, v in fit.points],
            }

        return {
            "families": {
                name: {"metric": FAMILY_METRICS[name], **fit_dict(fit)} for name, fit in self.fits.items()
            },
            "alternative_metrics": {
                name: {metric: fit_dict(fit) for metric, fit in fits.items()}
                for name, fits in self.alt_fits.items()
            },
        }


def _run_point(config: TripleConfig) -> RunResult:
    log.info("running mu=%g eps=%g N=%d Nz=%d dt=%g T=%g", config.mu, config.eps, config.N,
             config.Nz, config.dt, config.T)
    return run_triple(config)


def convergence_study(sweep: SweepConfig) -> SweepReport:
    configs = [sweep.point(mu) for mu in sweep.mus]
    if sweep.workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=sweep.workers) as pool:
            runs = list(pool.map(_run_point, configs))
    else:
        runs = [_run_point(c) for c in configs]
    return fit_report(sweep, runs)


def fit_report(sweep: SweepConfig, runs) -> SweepReport:
    runs = sorted(runs, key=lambda r: r.mu, reverse=True)
    fits, alt = {}, {}
    for family in FAMILY_SERIES:
        fits[family] = fit_rate([(r.mu, r.reduce(family)) for r in runs])
        alt[family] = {
            metric: fit_rate([(r.mu, r.reduce(family, metric)) for r in runs])
            for metric in ("sup_over_1pt", "sup", "final")
            if metric != FAMILY_METRICS[family]
        }
    return SweepReport(config=sweep, runs=runs, fits=fits, alt_fits=alt)


def config_echo(sweep: SweepConfig) -> dict:
    d = asdict(sweep)
    d["mus"] = list(sweep.mus)
    return d
