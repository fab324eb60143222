"""
Command-line front end.

    wavemomentum run-kdv | run-peregrine | run-waterwave | compare | sweep | selftest

Settings come from built-in defaults, then an optional ``--config`` file
(flat ``key = value`` text or JSON), then the ``OUT_DIR`` environment variable
(output directory only), then command-line flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import experiments, kdv, peregrine, waterwave
from .experiments import InitialProfile, SweepConfig, TripleConfig
from .spectral import Grid1D, ModelParams

log = logging.getLogger("wavemomentum")

SCHEMA_VERSION = 1
MODELS = ("kdv", "peregrine", "waterwave", "compare", "sweep", "selftest")
SUBCOMMANDS = {
    "run-kdv": "kdv",
    "run-peregrine": "peregrine",
    "run-waterwave": "waterwave",
    "compare": "compare",
    "sweep": "sweep",
    "selftest": "selftest",
}
TIMESERIES_COLUMNS = ["t"] + list(experiments.SERIES)


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    model: str = "compare"
    L: float = 80.0
    N: int = 512
    Nz: int = 24
    mu: float = 0.04
    eps: float | None = None  # None: eps_ratio * mu
    eps_ratio: float = 1.0
    mus: tuple = (0.08, 0.04, 0.02, 0.01)
    profile: str = "gaussian"
    amplitude: float = 1.0
    width: float = 2.0
    center: float | None = None  # None: middle of the cell
    dt: float = 0.01
    T: float = 5.0
    sample_interval: float = 0.1
    out: str = "results"
    workers: int = 1
    seed: int = 0  # reserved; every workflow is deterministic
    format: str = "csv"

    @property
    def effective_eps(self) -> float:
        return self.eps if self.eps is not None else self.eps_ratio * self.mu

    def params(self) -> ModelParams:
        return ModelParams(self.effective_eps, self.mu)

    def grid(self) -> Grid1D:
        return Grid1D(self.L, self.N)

    def initial_profile(self) -> InitialProfile:
        return InitialProfile(self.profile, self.amplitude, self.width, self.center)

    def triple(self) -> TripleConfig:
        return TripleConfig(eps=self.effective_eps, mu=self.mu, L=self.L, N=self.N, Nz=self.Nz, T=self.T,
                            dt=self.dt, sample_interval=self.sample_interval, profile=self.initial_profile())

    def sweep(self) -> SweepConfig:
        base = replace(self.triple(), mu=self.mus[0], eps=self.eps_ratio * self.mus[0])
        return SweepConfig(mus=tuple(self.mus), eps_ratio=self.eps_ratio, base=base, workers=self.workers)


_FIELD_TYPES = {
    "model": str, "L": float, "N": int, "Nz": int, "mu": float, "eps": float, "eps_ratio": float,
    "mus": tuple, "profile": str, "amplitude": float, "width": float, "center": float, "dt": float,
    "T": float, "sample_interval": float, "out": str, "workers": int, "seed": int, "format": str,
}
_POSITIVE = ("L", "N", "Nz", "mu", "eps", "eps_ratio", "amplitude", "width", "dt", "T", "sample_interval", "workers")


def _coerce(key, value):
    kind = _FIELD_TYPES[key]
    try:
        if kind is tuple:
            if isinstance(value, str):
                value = [v for v in value.replace(",", " ").split() if v]
            if not isinstance(value, (list, tuple)):
                raise TypeError("expected a list of numbers")
            return tuple(float(v) for v in value)
        if kind is int:
            if isinstance(value, bool):
                raise TypeError("expected an integer")
            if isinstance(value, float) and not value.is_integer():
                raise TypeError("expected an integer")
            return int(value) if not isinstance(value, str) else int(value.strip())
        if kind is float:
            if isinstance(value, bool):
                raise TypeError("expected a number")
            return float(value)
        if not isinstance(value, str):
            raise TypeError("expected a string")
        return value.strip()
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"type mismatch for value {value!r} ({exc})") from None


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.model not in MODELS:
        raise ConfigError("model", f"unknown model {cfg.model!r}; choose from {', '.join(MODELS)}")
    if cfg.format not in ("csv", "json"):
        raise ConfigError("format", f"must be csv or json, got {cfg.format!r}")
    for key in _POSITIVE:
        value = getattr(cfg, key)
        if value is not None and not (value > 0 and math.isfinite(value)):
            raise ConfigError(key, f"must be positive, got {value}")
    if len(cfg.mus) < 1 or any(not m > 0 for m in cfg.mus):
        raise ConfigError("mus", "must be a non-empty list of positive values")
    if any(b >= a for a, b in zip(cfg.mus, cfg.mus[1:])):
        raise ConfigError("mus", f"must be strictly decreasing, got {list(cfg.mus)}")
    if cfg.N % 2 or cfg.N < 8:
        raise ConfigError("N", f"must be an even integer >= 8, got {cfg.N}")
    try:
        cfg.initial_profile()
    except ValueError as exc:
        raise ConfigError("profile", str(exc)) from None
    try:
        cfg.params()
    except ValueError as exc:
        raise ConfigError("mu" if cfg.eps is None else "eps", str(exc)) from None
    return cfg


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file or a JSON object into raw values."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "JSON config must be an object")
        return data
    data = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        data[key] = value
    return data


def parse_config(path=None, overrides: dict | None = None, environ=None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``OUT_DIR``, then ``overrides``."""
    environ = os.environ if environ is None else environ
    values = {}
    if path is not None:
        values.update(read_config_file(path))
    if environ.get("OUT_DIR"):
        values["out"] = environ["OUT_DIR"]
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    coerced = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(key, "unknown key")
        if key in ("eps", "center") and (value is None or str(value).strip().lower() in ("", "none", "auto")):
            coerced[key] = None
        else:
            coerced[key] = _coerce(key, value)
    return validate(RunConfig(**coerced))


# output helpers -------------------------------------------------------------


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    return repr(float(v))


def table_text(columns, rows, fmt: str) -> str:
    rows = [[float(v) for v in row] for row in rows]
    if fmt == "json":
        return json.dumps({"schema_version": SCHEMA_VERSION, "columns": list(columns), "rows": rows},
                          indent=1) + "\n"
    lines = [f"# schema_version={SCHEMA_VERSION}", ",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_table(out: Path, stem: str, columns, rows, fmt: str) -> Path:
    path = out / f"{stem}.{fmt}"
    write_atomic(path, table_text(columns, rows, fmt))
    return path


def write_json(path: Path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    write_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _config_echo(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["mus"] = list(cfg.mus)
    d["eps"] = cfg.effective_eps
    return d


# workflows ------------------------------------------------------------------


def _sample_plan(cfg: RunConfig):
    every = round(cfg.sample_interval / cfg.dt)
    nsteps = round(cfg.T / cfg.dt)
    if every < 1 or not math.isclose(every * cfg.dt, cfg.sample_interval, rel_tol=1e-9):
        raise ConfigError("sample_interval", "must be a multiple of dt")
    if not math.isclose(nsteps * cfg.dt, cfg.T, rel_tol=1e-9) or nsteps % every:
        raise ConfigError("T", "must be a multiple of sample_interval")
    return nsteps, every


def run_kdv(cfg: RunConfig, out: Path) -> None:
    grid, p = cfg.grid(), cfg.params()
    prof = cfg.initial_profile()
    eta0 = prof.sample(grid, p)
    prof.check_localized(eta0)
    nsteps, every = _sample_plan(cfg)
    stepper = kdv.KdVStepper(grid, p, cfg.dt)
    state = kdv.KdVState(eta0)
    rows = []
    for n in range(0, nsteps + 1, every):
        if n:
            state = stepper.step(state, every)
            log.info("kdv t=%.3f", n * cfg.dt)
        i1, i2, i3 = kdv.conserved_integrals(state.eta, grid, p)
        rows.append([n * cfg.dt, i1, i2, i3, grid.norm_linf(state.eta)])
    write_table(out, "kdv_timeseries", ["t", "integral_1", "integral_2", "integral_3", "linf_eta"], rows, cfg.format)
    write_table(out, "kdv_profile", ["x", "eta_0", "eta_T", "momentum_density_T", "v_kdv_T"],
                zip(grid.x, eta0, state.eta, kdv.momentum_density_I(state.eta, grid, p),
                    kdv.v_kdv(state.eta, grid, p)), cfg.format)


def run_peregrine(cfg: RunConfig, out: Path) -> None:
    grid, p = cfg.grid(), cfg.params()
    prof = cfg.initial_profile()
    xi0 = prof.sample(grid, p)
    prof.check_localized(xi0)
    nsteps, every = _sample_plan(cfg)
    stepper = peregrine.PeregrineStepper(grid, p, cfg.dt)
    state = peregrine.PeregrineState(xi0, kdv.v_kdv(xi0, grid, p))
    u0 = state.u
    rows = []
    for n in range(0, nsteps + 1, every):
        if n:
            state = stepper.step(state, every)
            log.info("peregrine t=%.3f", n * cfg.dt)
        m_xi, m_u = peregrine.conserved_quantities(state, grid, p)
        rows.append([n * cfg.dt, m_xi, m_u, grid.norm_linf(state.xi), grid.norm_linf(state.u)])
    write_table(out, "peregrine_timeseries", ["t", "integral_xi", "integral_u_dispersive", "linf_xi", "linf_u"],
                rows, cfg.format)
    write_table(out, "peregrine_profile", ["x", "xi_0", "u_0", "xi_T", "u_T"],
                zip(grid.x, xi0, u0, state.xi, state.u), cfg.format)


def run_waterwave(cfg: RunConfig, out: Path) -> None:
    grid, p, vg = cfg.grid(), cfg.params(), waterwave.VerticalGrid(cfg.Nz)
    data = experiments.build_coupled_initial_data(cfg.initial_profile(), p, vg, grid)
    nsteps, every = _sample_plan(cfg)
    model = waterwave.ZCSModel(grid, vg, p)
    state = data.waterwave_state()
    rows = []
    for n in range(0, nsteps + 1, every):
        if n:
            state = model.step(state, cfg.dt, every)
            log.info("waterwave t=%.3f", n * cfg.dt)
        pf = model.potential(state)
        rows.append([n * cfg.dt, grid.integral(state.zeta), waterwave.energy(state, pf),
                     grid.norm_linf(state.zeta), pf.residual()])
    pf = model.potential(state)
    write_table(out, "waterwave_timeseries", ["t", "mass", "energy", "linf_zeta", "elliptic_residual"],
                rows, cfg.format)
    write_table(out, "waterwave_profile", ["x", "zeta_0", "zeta_T", "momentum_density_T", "averaged_velocity_T"],
                zip(grid.x, data.zeta0, state.zeta, waterwave.momentum_density_exact(pf),
                    waterwave.averaged_velocity(pf)), cfg.format)


def run_compare(cfg: RunConfig, out: Path) -> None:
    result = experiments.run_triple(cfg.triple())
    write_table(out, "timeseries", TIMESERIES_COLUMNS, result.rows(), cfg.format)
    write_json(out / "summary.json", {
        "eps": result.eps, "mu": result.mu,
        "envelopes": {name: result.envelope(name) for name in experiments.SERIES[:8]},
        "edge_max": result.edge_max,
        "config": _config_echo(cfg),
    })


def run_sweep(cfg: RunConfig, out: Path) -> experiments.SweepReport:
    report = experiments.convergence_study(cfg.sweep())
    for run in report.runs:
        write_table(out, f"timeseries_mu{run.mu:g}", TIMESERIES_COLUMNS, run.rows(), cfg.format)
    families = list(experiments.FAMILY_SERIES)
    write_table(out, "sweep", ["mu", "eps"] + families,
                ([r.mu, r.eps] + [r.reduce(f) for f in families] for r in report.runs), cfg.format)
    write_json(out / "rates.json", {**report.as_dict(), "config": _config_echo(cfg)})
    for family, metric, fit in report.rows():
        log.info("%-14s slope %.3f  R^2 %.4f  (%s)", family, fit.slope, fit.r2, metric)
    return report


def selftest() -> bool:
    """Fast smoke checks of every solver; one line per check."""
    checks = []
    grid = Grid1D(80.0, 256)
    vg = waterwave.VerticalGrid(24)
    worst = 0.0
    for mu in (0.01, 0.04, 0.08):
        p = ModelParams(mu, mu)
        for m in (1, 5, 10, 20, 40):
            k = grid.k[m]
            G = waterwave.dirichlet_neumann(np.zeros(grid.N), np.cos(k * grid.x), p, vg, grid)
            exact = np.sqrt(mu) * k * np.tanh(np.sqrt(mu) * k) * np.cos(k * grid.x)
            worst = max(worst, grid.norm_linf(G - exact))
    checks.append(("flat Dirichlet-Neumann operator", worst, 1e-9))

    p = ModelParams(0.04, 0.04)
    grid = Grid1D(80.0, 512)
    sol = kdv.Soliton(1.0, 30.0, p)
    end = kdv.integrate(kdv.KdVState(sol.profile(grid)), 1.0, 1e-3, grid, p)
    checks.append(("KdV soliton transport", grid.norm_linf(end.eta - sol.profile(grid, 1.0)), 1e-6))

    rest = peregrine.step(peregrine.PeregrineState(np.zeros(grid.N), np.zeros(grid.N)), 0.01, grid, p)
    checks.append(("Peregrine rest state", max(grid.norm_linf(rest.xi), grid.norm_linf(rest.u)), 0.0))

    ok = True
    for name, value, tol in checks:
        passed = value <= tol
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {value:.3e} (tol {tol:.0e})")
    return ok


WORKFLOWS = {
    "kdv": run_kdv,
    "peregrine": run_peregrine,
    "waterwave": run_waterwave,
    "compare": run_compare,
    "sweep": run_sweep,
}


def run(cfg: RunConfig) -> int:
    if cfg.model == "selftest":
        return 0 if selftest() else 1
    out = Path(cfg.out)
    try:
        WORKFLOWS[cfg.model](cfg, out)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        module = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"error in {cfg.model} workflow ({module}.{type(exc).__name__}): {exc}", file=sys.stderr)
        return 1
    log.info("wrote outputs to %s", out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    d = RunConfig()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value or JSON config file")
    common.add_argument("--mu", type=float, help=f"long-wave parameter (default {d.mu})")
    common.add_argument("--eps", type=float, help="amplitude parameter (default: eps_ratio * mu)")
    common.add_argument("--mus", help=f"decreasing comma-separated mu list for sweeps (default {','.join(map(str, d.mus))})")
    common.add_argument("--eps-ratio", dest="eps_ratio", type=float, help=f"eps/mu in sweeps (default {d.eps_ratio})")
    common.add_argument("--N", type=int, help=f"grid points (default {d.N})")
    common.add_argument("--Nz", type=int, help=f"vertical Chebyshev points (default {d.Nz})")
    common.add_argument("--L", type=float, help=f"periodic cell length (default {d.L})")
    common.add_argument("--T", type=float, help=f"final time (default {d.T})")
    common.add_argument("--dt", type=float, help=f"time step (default {d.dt})")
    common.add_argument("--sample-interval", dest="sample_interval", type=float,
                        help=f"time between samples (default {d.sample_interval})")
    common.add_argument("--profile", choices=["gaussian", "sech2", "soliton"], help=f"initial shape (default {d.profile})")
    common.add_argument("--amplitude", type=float, help=f"profile amplitude (default {d.amplitude})")
    common.add_argument("--width", type=float, help=f"profile width (default {d.width})")
    common.add_argument("--out", help=f"output directory (default {d.out}; OUT_DIR env overrides the file value)")
    common.add_argument("--workers", type=int, help=f"parallel sweep workers (default {d.workers})")
    common.add_argument("--format", choices=["csv", "json"], help=f"time-series format (default {d.format})")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="wavemomentum", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run-kdv": "integrate the KdV equation",
        "run-peregrine": "integrate the Peregrine system",
        "run-waterwave": "integrate the water-wave (ZCS) equations",
        "compare": "coupled run of all three models; writes timeseries.csv",
        "sweep": "mu sweep of coupled runs; writes rates.json",
        "selftest": "quick solver checks",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    overrides["model"] = SUBCOMMANDS[args.command]
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
