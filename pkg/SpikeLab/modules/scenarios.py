"""Scenario documents, the built-in reproductions and their pipelines.

A scenario is a flat INI document:

    [scenario]  name, kind
    [model]     a, b, theta, epsilon, tau
    [grid]      n            ("auto" picks ceil(16/eps) rounded up to even)
    [time]      dt, t_end, save_every, track_every, window_start, scheme, flux
    [initial]   type, x0, width, mass, noise, seed, path
    [sweep]     list-valued keys, comma separated
    [output]    dir, prefix

Every pipeline writes CSV/JSON artifacts into one directory and returns a
summary dict; run_scenario adds the manifest and the ledger entry.
"""
import configparser
import hashlib
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .. import __version__, config
from ..core.async_utils import gather_points
from ..core.constants import CELLS_PER_EPSILON, CSV_FLOAT_FORMAT, EPSILON_LADDER, THETA_LADDER
from ..core.database import init_db, record_run
from ..core.exceptions import AcceptanceError, ConfigError, InsufficientExtremaError, ParameterDomainError, SolverError
from ..core.handlers import BUILTIN_SCENARIOS, builtin_scenario, get_pipeline, scenario_kind
from ..core.params import ModelParams, make_grid
from . import innersolve, pdesim, slowdyn, stability, steady

logger = logging.getLogger(__name__)

SECTIONS = ("model", "grid", "time", "initial", "sweep", "output")


# --- SCENARIO DOCUMENT ---
@dataclass
class Scenario:
    name: str
    kind: str
    model: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    time: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def model_params(self, **overrides) -> ModelParams:
        values = {**self.model, **overrides}
        try:
            return ModelParams(a=float(values["a"]), b=float(values["b"]), theta=float(values["theta"]),
                               epsilon=float(values["epsilon"]), tau=float(values.get("tau", 0.0)))
        except KeyError as e:
            raise ConfigError(f"Scenario '{self.name}' is missing model parameter {e}") from e
        except ParameterDomainError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Scenario '{self.name}' has a non-numeric model parameter: {e}") from e

    def sweep_list(self, key: str, fallback=None) -> list:
        value = self.sweep.get(key, fallback)
        if value is None:
            raise ConfigError(f"Scenario '{self.name}' needs [sweep] {key}")
        return list(value) if isinstance(value, (list, tuple)) else [value]


def _format_value(value) -> str:
    if isinstance(value, (list, tuple)):
        parts = [_format_value(v) for v in value]
        return ", ".join(parts) + ("," if len(parts) == 1 else "")
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_scalar(raw: str):
    raw = raw.strip()
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def _parse_value(raw: str):
    if "," in raw:
        return [_parse_scalar(part) for part in raw.split(",") if part.strip()]
    return _parse_scalar(raw)


def scenario_to_ini(s: Scenario) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["scenario"] = {"name": s.name, "kind": s.kind}
    for section in SECTIONS:
        values = getattr(s, section)
        if values:
            parser[section] = {key: _format_value(value) for key, value in values.items()}
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


def scenario_from_ini(text: str) -> Scenario:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"Malformed scenario document: {e}") from e
    if not parser.has_section("scenario"):
        raise ConfigError("Scenario document needs a [scenario] section.")
    unknown = set(parser.sections()) - set(SECTIONS) - {"scenario"}
    if unknown:
        raise ConfigError(f"Unknown sections {sorted(unknown)}; allowed: scenario, {', '.join(SECTIONS)}")
    head = parser["scenario"]
    if "name" not in head or "kind" not in head:
        raise ConfigError("[scenario] needs both 'name' and 'kind'.")
    sections = {
        section: {key: _parse_value(raw) for key, raw in parser[section].items()}
        for section in SECTIONS if parser.has_section(section)
    }
    return Scenario(name=head["name"], kind=head["kind"], **sections)


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Scenario file '{path}' does not exist.")
    return scenario_from_ini(path.read_text())


def resolve_scenario(target: str) -> Scenario:
    if target in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[target]()
    return load_scenario(target)


def grid_for(s: Scenario, epsilon: float):
    n = s.grid.get("n", "auto")
    if n == "auto":
        n = int(math.ceil(CELLS_PER_EPSILON / epsilon))
        n += n % 2
    elif not _is_number(n):
        raise ConfigError(f"[grid] n must be an integer or 'auto', got {n!r}")
    return make_grid(n, epsilon)


NUMERIC_KEYS = {
    "time": ("dt", "t_end", "save_every", "track_every", "window_start"),
    "initial": ("x0", "width", "mass", "noise", "seed", "l0", "k0"),
}
TEXT_SWEEP_KEYS = ("method", "relax")


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _require_numbers(s: Scenario) -> None:
    for section, keys in NUMERIC_KEYS.items():
        values = getattr(s, section)
        for key in keys:
            if key in values and not _is_number(values[key]):
                raise ConfigError(f"[{section}] {key} must be a number, got {values[key]!r}")
    for key, value in s.sweep.items():
        if key in TEXT_SWEEP_KEYS:
            continue
        items = value if isinstance(value, (list, tuple)) else [value]
        if not all(_is_number(v) for v in items):
            raise ConfigError(f"[sweep] {key} must list numbers, got {value!r}")


def validate_scenario(s: Scenario) -> Scenario:
    get_pipeline(s.kind)
    if not s.name or any(ch in s.name for ch in "/\\"):
        raise ConfigError(f"Scenario name '{s.name}' must be a plain non-empty identifier.")
    _require_numbers(s)
    if s.kind in ("simulate", "drift_compare"):
        params = s.model_params()
        grid = grid_for(s, params.epsilon)
        if s.kind == "simulate":
            sim = _sim_config(s, params, grid)
            if not 0.0 <= _window_start(s, sim.t_end) < sim.t_end:
                raise ConfigError(f"[time] window_start must lie in [0, t_end), got {s.time['window_start']!r}")
        else:
            steady.check_center(float(s.initial.get("x0", 0.5)), params)
    elif s.kind in ("steady_sweep", "hopf_sweep", "nlep_trace"):
        for epsilon in s.sweep_list("epsilon", s.model.get("epsilon")):
            for theta in s.sweep_list("theta", s.model.get("theta")):
                s.model_params(epsilon=epsilon, theta=theta).require_outer_valid()
    elif s.kind == "canonical_nlep":
        if any(float(r) < 1.0 for r in s.sweep_list("r", 1.0)):
            raise ConfigError("Canonical problem needs every r >= 1.")
    logger.info(f"Scenario '{s.name}' ({s.kind}) is valid.")
    return s


# --- ARTIFACTS ---
def _write_rows(rows: list[dict], columns: list[str], path: Path) -> Path:
    data = np.array([[row[c] for c in columns] for row in rows], dtype=float).reshape(-1, len(columns))
    np.savetxt(path, data, delimiter=",", header=",".join(columns), comments="", fmt=CSV_FLOAT_FORMAT)
    return path


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _prefix(s: Scenario) -> str:
    return str(s.output.get("prefix", s.name))


# --- PIPELINES ---
def _sim_config(s: Scenario, params: ModelParams, grid) -> pdesim.SimConfig:
    t = s.time
    save_every = t.get("save_every")
    return pdesim.SimConfig(params=params, grid=grid, t_end=float(t.get("t_end", 10.0)), dt=float(t.get("dt", 1e-3)),
                            save_every=float(save_every) if save_every is not None else None,
                            track_every=float(t.get("track_every", 0.05)), initial=dict(s.initial) or {"type": "homogeneous"},
                            scheme=str(t.get("scheme", "rosenbrock")), flux=str(t.get("flux", "exponential")))


def _window_start(s: Scenario, t_end: float) -> float:
    return float(s.time.get("window_start", t_end / 2.0))


@scenario_kind("simulate")
async def simulate_pipeline(s: Scenario, out: Path) -> tuple[list[Path], dict]:
    params = s.model_params()
    grid = grid_for(s, params.epsilon)
    traj = pdesim.run(_sim_config(s, params, grid))
    prefix = _prefix(s)
    artifacts = [pdesim.write_trajectory_csv(traj, out / f"{prefix}_track.csv")]
    for i, (t, u) in enumerate(zip(traj.times, traj.snapshots)):
        artifacts.append(pdesim.write_snapshot_csv(u, grid, out / f"{prefix}_snapshot_{i:04d}.csv"))
    x0 = traj.track("x0")
    summary = {"x0_initial": float(x0[0]), "x0_final": float(x0[-1]), "x0_track": x0.tolist(),
               "height_final": float(traj.track("height_k")[-1])}
    t_end = float(s.time.get("t_end", 10.0))
    try:
        report = pdesim.measure_oscillation(traj, (_window_start(s, t_end), t_end))
        summary.update(asdict(report))
    except InsufficientExtremaError as e:
        logger.info(f"No oscillation measured for '{s.name}': {e}")
        summary["classification"] = "none"
    return artifacts, summary


def _inner_point(S: float, theta: float, a: float) -> dict:
    profile = innersolve.solve_inner(S, theta)
    return {"S": S, "theta": theta, "a": a, "xi": profile.xi, "I": innersolve.compute_I(profile, a),
            "first_integral_residual": innersolve.first_integral_residual(profile)}


@scenario_kind("inner_sweep")
async def inner_sweep_pipeline(s: Scenario, out: Path) -> tuple[list[Path], dict]:
    a = float(s.model.get("a", 1.0))
    amplitudes = [float(v) for v in s.sweep_list("S")]
    thetas = [float(v) for v in s.sweep_list("theta", s.model.get("theta"))]
    points = [{"S": S, "theta": theta, "a": a} for theta in thetas for S in amplitudes]
    rows = await gather_points(_inner_point, points, stage="inner_sweep")
    prefix = _prefix(s)
    artifacts = [_write_rows(rows, ["S", "theta", "a", "xi", "I", "first_integral_residual"], out / f"{prefix}_table.csv")]
    profile_theta = float(s.model.get("theta", thetas[0]))
    for S in amplitudes:
        artifacts.append(innersolve.write_profile_csv(innersolve.solve_inner(S, profile_theta),
                                                      out / f"{prefix}_profile_S{S:g}.csv"))
    return artifacts, {"rows": rows}


def _steady_point(s: Scenario, epsilon: float, theta: float, relax: str) -> dict:
    params = s.model_params(epsilon=epsilon, theta=theta)
    match = steady.match_amplitude(epsilon, params.a, params.b, theta)
    sub = innersolve.subinner_asymptotics(epsilon, params.a, params.b, theta)
    row = {"epsilon": epsilon, "theta": theta, "a": params.a, "b": params.b,
           "S_pde": math.nan, "xi_pde": math.nan, "S_match": match.S, "xi_match": match.inner.xi,
           "S_subinner": sub.S, "xi_subinner": sub.xi}
    if relax != "none":
        relaxed = steady.relax_steady_state(params.with_(tau=float(params.tau or 1.0)), grid_for(s, epsilon),
                                            method=relax)
        row.update(S_pde=relaxed.S, xi_pde=relaxed.xi)
    return row


@scenario_kind("steady_sweep")
async def steady_sweep_pipeline(s: Scenario, out: Path) -> tuple[list[Path], dict]:
    relax = str(s.sweep.get("relax", "newton"))
    points = [{"s": s, "epsilon": float(epsilon), "theta": float(theta), "relax": relax}
              for epsilon in s.sweep_list("epsilon", s.model.get("epsilon"))
              for theta in s.sweep_list("theta", s.model.get("theta"))]
    rows = await gather_points(_steady_point, points, stage="steady_sweep")
    columns = ["epsilon", "theta", "a", "b", "S_pde", "xi_pde", "S_match", "xi_match", "S_subinner", "xi_subinner"]
    return [_write_rows(rows, columns, out / f"{_prefix(s)}_table.csv")], {"rows": rows}


def _hopf_point(epsilon: float, theta: float, a: float, b: float, methods: list, options: dict) -> dict:
    return stability.hopf_table([epsilon], [theta], a, b, methods=methods, **options)[0]


@scenario_kind("hopf_sweep")
async def hopf_sweep_pipeline(s: Scenario, out: Path) -> tuple[list[Path], dict]:
    base = s.model_params()
    methods = [str(m) for m in s.sweep_list("method", ["nlep"])]
    options = {"tau_bracket": tuple(float(v) for v in s.sweep_list("tau_bracket", [0.05, 4.0]))}
    if "t_end" in s.time:
        options["t_end"] = float(s.time["t_end"])
    if "dt" in s.time:
        options["dt"] = float(s.time["dt"])
    points = [{"epsilon": float(epsilon), "theta": float(theta), "a": base.a, "b": base.b,
               "methods": methods, "options": options}
              for epsilon in s.sweep_list("epsilon", base.epsilon) for theta in s.sweep_list("theta", base.theta)]
    rows = await gather_points(_hopf_point, points, stage="hopf_scan")
    return [stability.write_hopf_table(rows, out / f"{_prefix(s)}_hopf.csv")], {"rows": rows}


@scenario_kind("drift_compare")
async def drift_compare_pipeline(s: Scenario, out: Path) -> tuple[list[Path], dict]:
    params = s.model_params()
    grid = grid_for(s, params.epsilon)
    x0_init = float(s.initial.get("x0", 0.5))
    sim = _sim_config(s, params, grid)
    traj = pdesim.run(sim)
    try:
        drift = slowdyn.integrate_drift(x0_init, sim.t_end, params.epsilon, params.a, params.b, params.theta,
                                        n_out=max(len(traj.spike_track), 2),
                                        time_variable=str(s.time.get("time_variable", "fast")))
    except SolverError as e:
        if e.partial is not None and e.partial.states:
            e.artifacts.append(slowdyn.write_drift_csv(e.partial, out / f"{_prefix(s)}_drift_partial.csv"))
            logger.warning(f"Kept {len(e.partial.states)} drift states up to t={e.partial.times[-1]:g} "
                           f"in {e.artifacts[-1].name}")
        raise
    rows = slowdyn.compare_with_track(drift, traj.spike_track)
    prefix = _prefix(s)
    artifacts = [
        pdesim.write_trajectory_csv(traj, out / f"{prefix}_pde_track.csv"),
        slowdyn.write_drift_csv(drift, out / f"{prefix}_drift.csv"),
        slowdyn.write_comparison_csv(rows, out / f"{prefix}_comparison.csv"),
    ]
    t = np.array([r["t"] for r in rows])
    x_pde = np.array([r["x0_pde"] for r in rows])
    x_dae = np.array([r["x0_dae"] for r in rows])
    late = t >= 0.5 * t[-1]
    summary = {
        "max_deviation": float(np.max(np.abs(x_pde - x_dae))),
        "rate_pde": _decay_rate(t[late], x_pde[late]),
        "rate_dae": _decay_rate(t[late], x_dae[late]),
        "small_eigenvalue": stability.small_eigenvalue(params.epsilon, params.a, params.b, params.theta),
        "linear_growth_rate": slowdyn.linear_growth_rate(params.epsilon, params.a, params.b, params.theta),
    }
    return artifacts, summary


def _decay_rate(t: np.ndarray, x: np.ndarray) -> float:
    keep = np.abs(x) > 0.0
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(t[keep], np.log(np.abs(x[keep])), 1)[0])


@scenario_kind("nlep_trace")
async def nlep_trace_pipeline(s: Scenario, out: Path) -> tuple[list[Path], dict]:
    base = s.model_params()
    lo, hi, count = s.sweep_list("lambda_range", [0.0, 2.0, 201])
    lambdas = np.linspace(float(lo), float(hi), int(count))
    artifacts, traces = [], []
    for theta in s.sweep_list("theta", base.theta):
        ctx = stability.build_nlep_context(base.epsilon, base.a, base.b, float(theta))
        scan = stability.scan_real_axis(ctx, base.tau, lambdas)
        artifacts.append(stability.write_f_trace(ctx, base.tau, lambdas, out / f"{_prefix(s)}_f_theta{theta:g}.csv"))
        traces.append({"theta": float(theta), "roots": scan.roots,
                       "positive_roots": [r for r in scan.roots if r > 0.0]})
    return artifacts, {"traces": traces}


@scenario_kind("canonical_nlep")
async def canonical_pipeline(s: Scenario, out: Path) -> tuple[list[Path], dict]:
    points = [{"alpha": float(alpha), "r": float(r)}
              for r in s.sweep_list("r", 1.0) for alpha in s.sweep_list("alpha")]
    values = await gather_points(stability.canonical_nlep_leading, points, stage="canonical_nlep")
    rows = [{**point, "re_lambda": value.real, "im_lambda": value.imag} for point, value in zip(points, values)]
    return [_write_rows(rows, ["alpha", "r", "re_lambda", "im_lambda"], out / f"{_prefix(s)}_canonical.csv")], {"rows": rows}


# --- BUILT-IN REPRODUCTIONS ---
@builtin_scenario("fig1b")
def _fig1b() -> Scenario:
    return Scenario(
        name="fig1b", kind="simulate",
        model={"a": 1.0, "b": 1.0, "theta": 0.5, "epsilon": 1e-2, "tau": 2.7},
        grid={"n": "auto"},
        time={"dt": 1e-3, "t_end": 240.0, "window_start": 160.0, "save_every": 40.0, "track_every": 0.02},
        initial={"type": "steady", "x0": 0.0, "noise": 1e-3, "seed": 7},
    )


@builtin_scenario("fig1c")
def _fig1c() -> Scenario:
    return Scenario(
        name="fig1c", kind="simulate",
        model={"a": 1.0, "b": 1.0, "theta": 0.5, "epsilon": 1e-2, "tau": 0.1},
        grid={"n": "auto"},
        time={"dt": 1e-3, "t_end": 5000.0, "save_every": 500.0, "track_every": 25.0},
        initial={"type": "steady", "x0": 0.4},
    )


@builtin_scenario("fig2")
def _fig2() -> Scenario:
    return Scenario(
        name="fig2", kind="inner_sweep",
        model={"a": 1.0, "theta": 0.5},
        sweep={"S": [0.05, 0.1, 0.2, 0.4], "theta": [0.25, 0.5, 0.75]},
    )


@builtin_scenario("fig3")
def _fig3() -> Scenario:
    return Scenario(
        name="fig3", kind="steady_sweep",
        model={"a": 1.0, "b": 0.25, "theta": 0.5},
        grid={"n": "auto"},
        sweep={"epsilon": list(EPSILON_LADDER), "relax": "newton"},
    )


@builtin_scenario("fig4")
def _fig4() -> Scenario:
    return Scenario(
        name="fig4", kind="steady_sweep",
        model={"a": 1.0, "b": 1.0, "epsilon": 2.5e-3},
        grid={"n": "auto"},
        sweep={"theta": list(THETA_LADDER), "relax": "none"},
    )


@builtin_scenario("fig5")
def _fig5() -> Scenario:
    return Scenario(
        name="fig5", kind="hopf_sweep",
        model={"a": 1.0, "b": 1.0, "theta": 0.5, "epsilon": 2.5e-3},
        grid={"n": "auto"},
        time={"dt": 1e-3, "t_end": 60.0},
        sweep={"method": ["pde_bisect", "nlep"], "tau_bracket": [1.3, 1.6]},
    )


@builtin_scenario("fig6")
def _fig6() -> Scenario:
    return Scenario(
        name="fig6", kind="hopf_sweep",
        model={"a": 1.0, "b": 1.0, "theta": 0.5, "epsilon": 1e-2},
        sweep={"epsilon": [1e-2, 5e-3, 2.5e-3], "theta": list(THETA_LADDER), "method": ["nlep", "discretized"],
               "tau_bracket": [0.05, 4.0]},
    )


@builtin_scenario("fig7")
def _fig7() -> Scenario:
    return Scenario(
        name="fig7", kind="drift_compare",
        model={"a": 1.0, "b": 0.25, "theta": 0.5, "epsilon": 5e-3, "tau": 0.1},
        grid={"n": "auto"},
        time={"dt": 1e-3, "t_end": 20000.0, "track_every": 100.0, "time_variable": "fast"},
        initial={"type": "steady", "x0": 0.5},
    )


@builtin_scenario("appendixA")
def _appendix_a() -> Scenario:
    return Scenario(
        name="appendixA", kind="canonical_nlep",
        sweep={"alpha": [0.0, 0.5, 1.0, 1.5, 2.0, 3.0], "r": [1.0, 2.0]},
    )


def list_scenarios() -> dict[str, Scenario]:
    return {name: factory() for name, factory in BUILTIN_SCENARIOS.items()}


# --- ACCEPTANCE CHECKS ---
ACCEPTANCE_CHECKS = {}


def acceptance_check(name: str):
    def decorator(func):
        ACCEPTANCE_CHECKS[name] = func
        return func
    return decorator


def _strictly_decreasing(values) -> bool:
    return all(later < earlier for earlier, later in zip(values, values[1:]))


@acceptance_check("fig1b")
def _check_fig1b(summary: dict) -> list[tuple[str, bool]]:
    return [("late-time height oscillation is sustained", summary.get("classification") == "sustained")]


@acceptance_check("fig1c")
def _check_fig1c(summary: dict) -> list[tuple[str, bool]]:
    x0 = np.abs(np.array(summary["x0_track"]))
    return [("spike center approaches 0", bool(np.all(np.diff(x0) <= 1e-3)) and x0[-1] < x0[0])]


@acceptance_check("fig2")
def _check_fig2(summary: dict) -> list[tuple[str, bool]]:
    checks = []
    for theta in sorted({row["theta"] for row in summary["rows"]}):
        rows = sorted((r for r in summary["rows"] if r["theta"] == theta), key=lambda r: r["S"])
        checks.append((f"xi and I grow as S decreases at theta={theta:g}",
                       _strictly_decreasing([r["xi"] for r in rows]) and _strictly_decreasing([r["I"] for r in rows])))
    checks.append(("first-integral residual <= 1e-8", all(r["first_integral_residual"] <= 1e-8 for r in summary["rows"])))
    return checks


@acceptance_check("fig3")
def _check_fig3(summary: dict) -> list[tuple[str, bool]]:
    rows = sorted(summary["rows"], key=lambda r: -r["epsilon"])
    pde_gap = [abs(r["S_pde"] - r["S_match"]) / r["S_pde"] for r in rows]
    sub_gap = [abs(r["S_match"] - r["S_subinner"]) / r["S_match"] for r in rows]
    return [("PDE/matching discrepancy shrinks with epsilon", _strictly_decreasing(pde_gap)),
            ("matching/sub-inner discrepancy shrinks with epsilon", _strictly_decreasing(sub_gap))]


@acceptance_check("fig4")
def _check_fig4(summary: dict) -> list[tuple[str, bool]]:
    rows = sorted(summary["rows"], key=lambda r: r["theta"])
    gap = [abs(r["S_match"] - r["S_subinner"]) / r["S_match"] for r in rows]
    return [("matching/sub-inner discrepancy grows with theta", _strictly_decreasing(gap[::-1]))]


@acceptance_check("fig5")
def _check_fig5(summary: dict) -> list[tuple[str, bool]]:
    row = summary["rows"][0]
    pde, nlep = row["tau_h_pde"], row["tau_h_nlep"]
    return [("PDE Hopf threshold in (1.43, 1.44)", 1.43 < pde < 1.44),
            ("NLEP threshold within 15% of the PDE value", abs(nlep - pde) <= 0.15 * pde)]


@acceptance_check("fig6")
def _check_fig6(summary: dict) -> list[tuple[str, bool]]:
    rows = summary["rows"]
    finite = all(math.isfinite(r["tau_h_nlep"]) and math.isfinite(r["tau_h_discretized"]) for r in rows)
    checks = [("every threshold found", finite)]
    for epsilon in sorted({r["epsilon"] for r in rows}):
        ladder = sorted((r for r in rows if r["epsilon"] == epsilon), key=lambda r: r["theta"])
        trend_nlep = np.sign(np.diff([r["tau_h_nlep"] for r in ladder]))
        trend_disc = np.sign(np.diff([r["tau_h_discretized"] for r in ladder]))
        checks.append((f"theta trend agrees at eps={epsilon:g}", bool(np.all(trend_nlep == trend_disc))))
    return checks


@acceptance_check("fig7")
def _check_fig7(summary: dict) -> list[tuple[str, bool]]:
    rate_pde, rate_dae = summary["rate_pde"], summary["rate_dae"]
    small, linear = summary["small_eigenvalue"], summary["linear_growth_rate"]
    return [("max |x0_pde - x0_dae| <= 0.05", summary["max_deviation"] <= 0.05),
            ("late decay rates within 20%", abs(rate_pde - rate_dae) <= 0.2 * abs(rate_dae)),
            ("small eigenvalue is negative", small < 0.0),
            ("small eigenvalue equals drift linearization", abs(small - linear) <= 1e-6 * abs(small))]


@acceptance_check("appendixA")
def _check_appendix_a(summary: dict) -> list[tuple[str, bool]]:
    lookup = {(r["alpha"], r["r"]): r["re_lambda"] for r in summary["rows"]}
    return [("Lambda(0, 1) = 1/4", abs(lookup[(0.0, 1.0)] - 0.25) <= 1e-4),
            ("positive eigenvalue at alpha = 0.5", lookup[(0.5, 1.0)] > 0.0),
            ("no unstable eigenvalue at alpha = 2", lookup[(2.0, 1.0)] <= 0.0)]


@acceptance_check("nlep_trace")
def _check_nlep_sign(summary: dict) -> list[tuple[str, bool]]:
    return [(f"no positive real root at theta={t['theta']:g}", not t["positive_roots"]) for t in summary["traces"]]


def evaluate_checks(name: str, summary: dict, kind: str | None = None) -> list[tuple[str, bool]]:
    check = ACCEPTANCE_CHECKS.get(name) or ACCEPTANCE_CHECKS.get(kind)
    if check is None:
        raise ConfigError(f"No acceptance checks are registered for '{name}'.")
    results = check(summary)
    for description, passed in results:
        log = logger.info if passed else logger.error
        log(f"[{'PASS' if passed else 'FAIL'}] {name}: {description}")
    return results


# --- RUNNER ---
def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


async def run_scenario(s: Scenario, output_root=None, check: bool = False, ledger: bool = True) -> dict:
    """Run one scenario; returns its manifest. Artifacts of a failed run are removed."""
    validate_scenario(s)
    out = Path(s.output.get("dir") or Path(output_root or config.OUTPUT_DIR) / s.name)
    out.mkdir(parents=True, exist_ok=True)
    before = set(out.iterdir())
    pipeline = get_pipeline(s.kind)
    started = time.perf_counter()
    logger.info(f"Running scenario '{s.name}' ({s.kind}) into {out}")
    if ledger:
        init_db()

    try:
        artifacts, summary = await pipeline(s, out)
        wall_time = time.perf_counter() - started
        manifest = {
            "scenario": s.name,
            "kind": s.kind,
            "inputs": scenario_to_ini(s),
            "versions": {"SpikeLab": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
            "wall_time": wall_time,
            "artifacts": {path.name: _sha256(path) for path in artifacts},
            "summary": summary,
        }
        if check:
            results = evaluate_checks(s.name, summary, s.kind)
            manifest["checks"] = [{"check": d, "passed": p} for d, p in results]
        manifest_path = out / f"{_prefix(s)}_manifest.json"
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default))
    except Exception as e:
        kept = set(getattr(e, "artifacts", []))
        for path in set(out.iterdir()) - before - kept:
            if path.is_file():
                path.unlink()
        note = f", kept {sorted(p.name for p in kept)}" if kept else ""
        logger.error(f"Scenario '{s.name}' failed after {time.perf_counter() - started:.1f}s; "
                     f"removed partial artifacts{note}.")
        if ledger:
            record_run(s.name, s.kind, "failed", str(out), time.perf_counter() - started)
        raise

    if ledger:
        record_run(s.name, s.kind, "ok", str(out), wall_time, json.loads(json.dumps(manifest, default=_json_default)))
    if check and not all(passed for _, passed in manifest["checks"]):
        failed = [c["check"] for c in manifest["checks"] if not c["passed"]]
        raise AcceptanceError(f"Scenario '{s.name}' failed acceptance checks: {failed}")
    logger.info(f"Scenario '{s.name}' finished in {wall_time:.1f}s with {len(artifacts)} artifacts.")
    return manifest
