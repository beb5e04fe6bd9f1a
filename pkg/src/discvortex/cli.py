"""Config-driven runner: simulate, kernel-test, rates, plotdata."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import _kernels
from .diagnostics import (
    ABSeries,
    FitError,
    HypothesisError,
    RateFit,
    alpha_profile,
    area_check,
    check_2_6,
    energy_drift,
    fit_growth,
    gronwall_margin,
    integrate_ab,
    merging_measure,
    rate_predict,
    uniform_betas,
    write_ab_csv,
    write_alpha_csv,
    write_area_csv,
)
from .geometry import boundary_height
from .initial_data import (
    ResolutionError,
    ScenarioParams,
    VorticityFunction,
    build_omega0,
    discretize,
    exceptional_measure,
)
from .kernel import BlobKernelConfig, estimate_C_gamma
from .solver import (
    ContourCurve,
    ContourTracker,
    NumericalError,
    StabilityError,
    simulate,
    write_checkpoint,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_RESOLUTION = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


# -- config ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    cfl: float = 0.5
    boundary_tol: float = 1e-8
    substeps: int = 1
    near_origin: float = 4.0
    safety: float = 0.9


@dataclass(frozen=True)
class KernelConfig:
    epsilon: float | None = None  # absolute blob radius; default is per-particle
    cutoff_rule: str = "max"


@dataclass(frozen=True)
class DiagnosticsConfig:
    enabled: tuple[str, ...] = ("ab_series", "alpha_profile", "area_check", "hyperbolic",
                                "energy", "exceptional_measure", "C_gamma")
    M: int = 64
    gronwall_form: str = "integrated"
    alpha_times: tuple[float, ...] = (0.0, 0.5, 1.0)
    alpha_level: float = 0.99
    alpha_polish: int = 16
    n_betas: int = 100
    contour_markers: int = 200
    h_max_over_delta: float = 0.005
    marker_cap: int = 20000
    readvect_budget: int = 0  # 0: always re-advect new markers from the seed
    strict_cap: bool = False
    area_square: tuple[float, float, float] = (0.2, 0.4, 0.2)  # lower-left x1, x2, side
    area_markers: int = 400
    area_h_max: float = 0.01
    area_times: tuple[float, ...] = (0.0, 0.5, 1.0, 1.5, 2.0)
    hyperbolic_times: tuple[float, ...] = (0.0, 0.5, 1.0)
    gamma: float = 0.5
    mc_samples: int = 200000


@dataclass(frozen=True)
class RatesConfig:
    series: str = "ab_series.csv"
    model: str = "double_exp"
    mode: str | None = None
    window: tuple[float, float] | None = None
    times: tuple[float, ...] = (10.0, 20.0, 50.0, 100.0)
    bisection_rtol: float = 1e-12
    bracket: tuple[float, float] = (0.0, 1e3)
    # explicit constants bypass fitting
    c: float | None = None
    C: float | None = None
    c_b: float | None = None
    C_b: float | None = None


@dataclass(frozen=True)
class KernelTestConfig:
    n_boundary: int = 100
    n_sources: int = 10
    n_pairs: int = 100
    seed: int = 0
    resolution_N: int = 4000
    delta: float = 0.05


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioParams
    horizon_T: float = 2.0
    checkpoint_every: float = 0.5
    output_dir: str = "out"
    rng_seed: int = 0
    omega_override: float | None = None  # constant vorticity instead of the ramp
    solver: SolverConfig = field(default_factory=SolverConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    rates: RatesConfig = field(default_factory=RatesConfig)
    kernel_test: KernelTestConfig = field(default_factory=KernelTestConfig)


_RUN_KEYS = {"horizon_T", "checkpoint_every", "output_dir", "rng_seed", "omega_override"}
_SECTIONS = {
    "scenario": ScenarioParams,
    "solver": SolverConfig,
    "kernel": KernelConfig,
    "diagnostics": DiagnosticsConfig,
    "rates": RatesConfig,
    "kernel_test": KernelTestConfig,
}
DIAGNOSTIC_NAMES = set(DiagnosticsConfig.enabled)


def _locate(text: str, key: str) -> tuple[int | None, int | None]:
    pat = re.compile(r"^\s*" + re.escape(key) + r"\s*=", re.M)
    m = pat.search(text)
    if not m:
        pat = re.compile(r"^\s*\[\s*" + re.escape(key) + r"\s*\]", re.M)
        m = pat.search(text)
    if not m:
        return None, None
    line = text.count("\n", 0, m.start()) + 1
    col = m.start() - (text.rfind("\n", 0, m.start()) + 1) + 1 + (len(m.group(0)) - len(m.group(0).lstrip()))
    return line, col


def _coerce(cls, data: dict, text: str, section: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kw = {}
    for key, val in data.items():
        if key not in fields:
            raise ConfigError(f"unknown key '{section}.{key}'", *_locate(text, key))
        if isinstance(val, list):
            val = tuple(val)
        kw[key] = val
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        bad = next((k for k in kw if k in str(exc)), section)
        raise ConfigError(f"[{section}] {exc}", *_locate(text, bad)) from exc


def parse_config(text: str, relaxed: bool = False) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(exc), getattr(exc, "lineno", None), getattr(exc, "colno", None)) from exc
    top: dict[str, Any] = {}
    parts: dict[str, Any] = {}
    for key, val in raw.items():
        if key in _SECTIONS:
            if not isinstance(val, dict):
                raise ConfigError(f"'{key}' must be a table", *_locate(text, key))
            parts[key] = val
        elif key in _RUN_KEYS:
            top[key] = val
        else:
            raise ConfigError(f"unknown key '{key}'", *_locate(text, key))
    scen = dict(parts.get("scenario", {}))
    if relaxed:
        scen["relaxed_mode"] = True
    built = {name: _coerce(cls, scen if name == "scenario" else parts.get(name, {}), text, name)
             for name, cls in _SECTIONS.items()}
    cfg = RunConfig(**built, **top)
    if not cfg.horizon_T >= 0:
        raise ConfigError("horizon_T must be >= 0", *_locate(text, "horizon_T"))
    if not 0 < cfg.checkpoint_every or (cfg.horizon_T > 0 and cfg.checkpoint_every > cfg.horizon_T):
        raise ConfigError("checkpoint_every must lie in (0, horizon_T]", *_locate(text, "checkpoint_every"))
    if cfg.kernel.epsilon is not None and not cfg.kernel.epsilon > 0:
        raise ConfigError("kernel.epsilon must be > 0", *_locate(text, "epsilon"))
    if cfg.kernel.cutoff_rule != "max":
        raise ConfigError("kernel.cutoff_rule must be 'max'", *_locate(text, "cutoff_rule"))
    unknown = set(cfg.diagnostics.enabled) - DIAGNOSTIC_NAMES
    if unknown:
        raise ConfigError(f"unknown diagnostics {sorted(unknown)}", *_locate(text, "enabled"))
    if cfg.diagnostics.gronwall_form not in ("integrated", "literal"):
        raise ConfigError("gronwall_form must be 'integrated' or 'literal'",
                          *_locate(text, "gronwall_form"))
    return cfg


def load_config(path: str | Path | None, relaxed: bool = False) -> RunConfig:
    if path is None:
        return parse_config("", relaxed)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text, relaxed)


# -- error records -------------------------------------------------------------------------


def _error(kind: str, message: str, code: int, out: Path | None = None, **extra) -> int:
    rec = {"error": kind, "message": message, "exit_code": code, **extra}
    text = json.dumps(rec, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def _config_error(exc: ConfigError, out: Path | None = None) -> int:
    return _error("config", str(exc), EXIT_CONFIG, out, line=exc.line, column=exc.column)


def _fmt_t(t: float) -> str:
    return f"{t:.6g}"


# -- simulate ---------------------------------------------------------------------------------


def _grid(step: float, end: float) -> list[float]:
    n = int(math.floor(end / step + 1e-9))
    return [k * step for k in range(n + 1)]


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    p = cfg.scenario
    d = cfg.diagnostics
    out.mkdir(parents=True, exist_ok=True)
    kcfg = BlobKernelConfig(epsilon=cfg.kernel.epsilon, cutoff_rule=cfg.kernel.cutoff_rule)
    ramp = build_omega0(p)
    f = ramp if cfg.omega_override is None else VorticityFunction.constant_value(cfg.omega_override)
    try:
        state0 = discretize(ramp, p)
    except ResolutionError as exc:
        return _error("resolution", str(exc), EXIT_RESOLUTION, out)
    if cfg.omega_override is not None:
        state0 = dataclasses.replace(state0, omega=f(state0.positions))

    T = cfg.horizon_T
    within = lambda ts: sorted({float(t) for t in ts if 0 <= t <= T})  # noqa: E731
    ckpt_times = _grid(cfg.checkpoint_every, T) if T > 0 else [0.0]
    alpha_times = within(d.alpha_times)
    area_times = within(d.area_times)
    hyp_times = within(d.hyperbolic_times)
    stops = set(ckpt_times) | set(alpha_times) | set(area_times) | set(hyp_times)

    ckdir = out / "checkpoints"
    ckdir.mkdir(exist_ok=True)
    pending = list(ckpt_times)

    def save(state) -> None:
        while pending and abs(pending[0] - state.t) <= 1e-12 * max(1.0, state.t):
            write_checkpoint(ckdir / f"state_t{_fmt_t(pending.pop(0))}.bin", state)

    save(state0)
    try:
        tl = simulate(state0, p.dt, T, kcfg, cfl=cfg.solver.cfl,
                      boundary_tol=cfg.solver.boundary_tol, callback=save, stops=stops,
                      safety=cfg.solver.safety)
        tl.near_origin = cfg.solver.near_origin
        tl.boundary_tol = cfg.solver.boundary_tol
    except (StabilityError, NumericalError) as exc:
        return _error("numerical", str(exc), EXIT_NUMERICAL, out)

    summary: dict[str, Any] = {
        "n_particles": state0.n,
        "steps": len(tl) - 1,
        "boundary_projections": tl.projections,
        "delta": p.delta,
        "A": p.A,
        "C_half": p.C_half,
        "relaxed_mode": p.relaxed_mode,
    }
    try:
        series = None
        if "ab_series" in d.enabled or "alpha_profile" in d.enabled:
            series = integrate_ab(tl, p.delta, d.M, cfg=kcfg)
            margins = gronwall_margin(series, p.C_half, d.gronwall_form)
            summary["gronwall_C"] = margins.C
            summary["gronwall_first_violation"] = margins.first_violation
            summary["corridor_collapsed_at"] = series.collapsed_at
            if "ab_series" in d.enabled:
                write_ab_csv(out / "ab_series.csv", series, margins)

        if "alpha_profile" in d.enabled and cfg.omega_override is None:
            profiles, exits = _alpha_profiles(cfg, tl, f, series, alpha_times, out)
            summary["alpha_profiles"] = profiles
            summary["contour_exits"] = exits

        if "area_check" in d.enabled:
            x0, y0, side = d.area_square
            sq = ContourCurve.polyline([[x0, y0], [x0 + side, y0], [x0 + side, y0 + side],
                                        [x0, y0 + side]], d.area_markers, closed=True,
                                       h_max=d.area_h_max, cap=d.marker_cap, strict=d.strict_cap,
                                       label="custom", readvect_budget=d.readvect_budget or None)
            rep = area_check(sq, tl, area_times, substeps=cfg.solver.substeps)
            write_area_csv(out / "area_check.csv", rep)
            summary["area_self_intersecting"] = any(rep.self_intersecting)
            summary["area_truncated"] = rep.truncated

        if "hyperbolic" in d.enabled:
            summary["hyperbolic"] = [
                {"t": t, **dataclasses.asdict(check_2_6(tl, p.A, p.delta, t=t, cfg=kcfg))}
                for t in hyp_times]
        if "energy" in d.enabled:
            drift = energy_drift(tl, every=max(1, (len(tl) - 1) // 20), cfg=kcfg)
            summary["energy_max_rel_drift"] = float(np.max(np.abs(drift)))
        if "exceptional_measure" in d.enabled:
            est, err = exceptional_measure(f, d.mc_samples, cfg.rng_seed)
            summary["exceptional_measure"] = {"estimate": est, "stderr": err,
                                              "limit": p.delta**2}
        if "C_gamma" in d.enabled:
            summary["C_gamma_empirical"] = estimate_C_gamma(d.gamma, state0, cfg=kcfg)
    except NumericalError as exc:
        return _error("numerical", str(exc), EXIT_NUMERICAL, out)

    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


def _alpha_profiles(cfg: RunConfig, tl, f, series: ABSeries, times: list[float],
                    out: Path) -> tuple[list, dict]:
    p = cfg.scenario
    d = cfg.diagnostics
    x1c = f.level_x1(d.alpha_level)
    contour = ContourCurve.polyline(
        [[x1c, float(boundary_height(x1c))], [x1c, 2.0 * p.delta]], d.contour_markers,
        h_max=d.h_max_over_delta * p.delta, cap=d.marker_cap, strict=d.strict_cap, label="custom",
        readvect_budget=d.readvect_budget or None)
    tracker = ContourTracker(contour, tl, substeps=cfg.solver.substeps, exit_box=p.delta)
    betas = uniform_betas(p.delta, d.n_betas)
    rows = []
    for t in times:
        shot = tracker.advance_to(t)
        prof = alpha_profile(t, betas, shot, p.delta, tl, f, level=d.alpha_level,
                             polish=d.alpha_polish)
        write_alpha_csv(out / f"alpha_profile_{_fmt_t(t)}.csv", prof)
        a_t = float(np.exp(np.interp(t, series.times, series.log_a)))
        rows.append({
            "t": t,
            "found": int(np.count_nonzero(prof.found)),
            "agreement": prof.agreement,
            "truncated": prof.truncated,
            "markers": shot.n,
            "a": a_t,
            "merging_measure": merging_measure(prof, a_t),
            "measure_margin": merging_measure(prof, a_t) - (p.delta - a_t),
        })
    return rows, tracker.exit_report()


# -- kernel test -------------------------------------------------------------------------------


def cmd_kernel_test(cfg: RunConfig) -> int:
    from .selfcheck import run_kernel_suite

    results = run_kernel_suite(cfg.kernel_test, BlobKernelConfig(epsilon=cfg.kernel.epsilon))
    width = max(len(r.name) for r in results)
    ok = True
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
        ok &= r.passed
    return EXIT_OK if ok else EXIT_FAIL


# -- rates -------------------------------------------------------------------------------------

AB_HEADER = ["t", "log_a", "log_b", "gronwall_margin"]
ALPHA_HEADER = ["beta", "alpha", "found"]
AREA_HEADER = ["t", "rel_dev"]


class SchemaError(ValueError):
    pass


def read_table(path: Path, header: Sequence[str] | None = None) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file (no header)")
    head = rows[0]
    if header is not None and head != list(header):
        raise SchemaError(f"{path}: header {head} does not match {list(header)}")
    try:
        data = np.array([[float(v) if v != "" else math.nan for v in r] for r in rows[1:]],
                        dtype=np.float64).reshape(-1, len(head))
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    return head, data


def read_ab_series(path: Path) -> ABSeries:
    _, data = read_table(path, AB_HEADER)
    return ABSeries(times=list(data[:, 0]), log_a=list(data[:, 1]), log_b=list(data[:, 2]))


def cmd_rates(cfg: RunConfig, series_path: Path | None, out: Path) -> int:
    r = cfg.rates
    p = cfg.scenario
    try:
        if r.c is not None and r.C is not None:
            fit_a = RateFit(r.model, r.c, r.C, r.c_b, r.C_b, (math.nan, math.nan), 0.0)
        else:
            path = series_path or (out / r.series)
            if not path.exists():
                return _error("config", f"series file {path} not found", EXIT_CONFIG, out)
            series = read_ab_series(path)
            fit_a = fit_growth(series, r.model, r.window)
        pred = rate_predict(fit_a, fit_a, p.A, p.C_half, r.mode, r.times,
                            bracket=r.bracket, rtol=r.bisection_rtol)
    except SchemaError as exc:
        return _error("schema", str(exc), EXIT_CONFIG, out)
    except (FitError, HypothesisError) as exc:
        return _error("fit", str(exc), EXIT_FAIL, out)
    res = pred.to_json()
    res["residual"] = fit_a.residual
    res["residual_b"] = fit_a.residual_b
    out.mkdir(parents=True, exist_ok=True)
    (out / "rates.json").write_text(json.dumps(res, sort_keys=True, indent=1, allow_nan=True) + "\n")
    return EXIT_OK


# -- plotdata ----------------------------------------------------------------------------------


def cmd_plotdata(paths: Sequence[Path], out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    alpha_cols: dict[float, np.ndarray] = {}
    betas = None
    try:
        for path in paths:
            if not path.exists():
                raise SchemaError(f"{path}: not found")
            head, data = read_table(path)
            if head == AB_HEADER:
                t = data[:, 0]
                if np.any(np.diff(t) <= 0):
                    raise SchemaError(f"{path}: times are not strictly increasing")
                with np.errstate(invalid="ignore", divide="ignore"):
                    rows = zip(t, np.log(-data[:, 1]), np.log(-data[:, 2]), data[:, 1] - data[:, 2])
                _write_rows(out / "plot_ab.csv", ["t", "ln_neg_log_a", "ln_neg_log_b", "log_ratio"], rows)
            elif head == ALPHA_HEADER:
                m = re.search(r"alpha_profile_(.+)\.csv$", path.name)
                if not m:
                    raise SchemaError(f"{path}: cannot read the time from the file name")
                b = data[:, 0]
                if betas is None:
                    betas = b
                elif not np.array_equal(betas, b):
                    raise SchemaError(f"{path}: beta grid differs from the other profiles")
                alpha_cols[float(m.group(1))] = np.where(data[:, 2] > 0, data[:, 1], math.nan)
            elif head == AREA_HEADER:
                if np.any(np.diff(data[:, 0]) <= 0):
                    raise SchemaError(f"{path}: times are not strictly increasing")
                _write_rows(out / "plot_area.csv", ["t", "abs_rel_dev"],
                            zip(data[:, 0], np.abs(data[:, 1])))
            else:
                raise SchemaError(f"{path}: unrecognised header {head}")
    except SchemaError as exc:
        return _error("schema", str(exc), EXIT_CONFIG, out)
    if alpha_cols:
        ts = sorted(alpha_cols)
        _write_rows(out / "alpha_heat.csv", ["beta"] + [f"alpha_t{_fmt_t(t)}" for t in ts],
                    (np.concatenate([[b], [alpha_cols[t][k] for t in ts]])
                     for k, b in enumerate(betas)))
    return EXIT_OK


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


# -- entry point -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="discvortex", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="TOML run configuration")
        p.add_argument("--output", type=Path, help="output directory (overrides output_dir)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for pair sums")
        p.add_argument("--relaxed", action="store_true", help="force relaxed_mode")

    common(sub.add_parser("simulate", help="run a scenario and write series"))
    common(sub.add_parser("kernel-test", help="Green's function and velocity property suite"))
    pr = sub.add_parser("rates", help="fit growth constants and write rates.json")
    common(pr)
    pr.add_argument("series", nargs="?", type=Path, help="ab_series.csv")
    pp = sub.add_parser("plotdata", help="convert CSV series to plot-ready tables")
    common(pp)
    pp.add_argument("files", nargs="*", type=Path)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        return _error("config", "--threads must be >= 1", EXIT_CONFIG)
    _kernels.set_threads(args.threads)
    if args.command == "plotdata":
        return cmd_plotdata(args.files, args.output or Path("."))
    try:
        cfg = load_config(args.config, args.relaxed)
    except ConfigError as exc:
        return _config_error(exc, args.output)
    out = args.output or Path(cfg.output_dir)
    if args.command == "simulate":
        return cmd_simulate(cfg, out)
    if args.command == "kernel-test":
        return cmd_kernel_test(cfg)
    return cmd_rates(cfg, args.series, out)


if __name__ == "__main__":
    sys.exit(main())
