"""Command line interface wiring the solver, verifier and simulator.

Subcommands
-----------
solve        integrate the coefficient ODE system and write g/f/f0 tables
convergence  step-size study with fitted convergence slopes
verify       certify the optimality conditions on a time grid
compare-fdm  cross-check the ODE route against the 1-d finite difference solver
simulate     Monte Carlo policy comparison table

Configuration file (YAML).  Unknown keys are rejected; every block except
``model`` is optional and falls back to the defaults shown::

    model:                      # required
      r: 0.3                    # risk-free rate
      gamma: 0.5                # utility exponent, strictly inside (0, 1)
      rho0: 0.03                # discount level
      rho: [0.02, 0.01]         # discount linear coefficient, length n
      varrho: [[0.002, 0.0],    # discount quadratic coefficient, n x n symmetric
               [0.0, 0.002]]
      alpha: [0.301, 0.428]     # mean reversion speeds, all positive
      mu: [3.093, 2.991]        # long-run log price levels
      sigma: [[0.334, 0.01],    # volatility matrix, invertible
              [0.01, 0.257]]
      T: 0.25                   # horizon
    solver:
      scheme: erow3-rk3         # or expeuler-rk2
      steps: 100                # uniform grid steps on [0, T]
    verify:
      grid_nodes: null          # condition-check nodes (null = every solver node)
      start_time: 0.0           # covariance reference time
    simulate:
      paths: 2000
      policy_steps: 50          # policy grid resolution
      substeps: 4               # Euler-Maruyama substeps per policy step
      seed: 7
      x0: 25.0
      s0: [2.0, 2.0]
      policies: null            # null = the full comparison library
      random_redraw: step       # or path
    convergence:
      step_counts: [8, 16, 32, 64, 128]
    fdm:
      s_lo: -10.0
      s_hi: 10.0
      n_space: 100
      n_time: 100
      ode_steps: 25
    output: out

Outputs are CSV tables plus one JSON summary per run (config echo, version
stamp, measured wall times).  CSV content is a pure function of config and
seed: reruns are byte identical.  Timings live only in the JSON summary.

Exit codes: 0 success, 1 computational failure, 2 configuration error,
3 verification failed.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .benchmark import DecoupledParams, benchmark_table, phi_reference_1d
from .coeffs import RK2_MIDPOINT, RK3_KUTTA, solve_coefficients
from .fdm1d import solve_fdm_1d
from .market import ModelError, ModelParams, validate
from .montecarlo import (mean_utility, numerical_policy, path_utilities,
                         policy_library, simulate_paths)
from .riccati import solve_riccati
from .valuation import PhiEvaluator
from .verification import check_conditions

SCHEME_PAIRS = {
    "expeuler-rk2": ("expeuler", RK2_MIDPOINT),
    "erow3-rk3": ("erow3", RK3_KUTTA),
}


class ConfigError(ValueError):
    """Invalid configuration; the message carries the field path."""


class VerificationFailed(RuntimeError):
    """The optimality conditions did not certify."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _expect_mapping(value, path):
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}")
    return value


def _reject_unknown(d, allowed, path):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}")


def _number(d, key, path, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    return float(v)


def _integer(d, key, path, default=None, minimum=None):
    if key not in d:
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}, got {v}")
    return v


def _optional_integer(d, key, path, minimum=None):
    if key not in d or d[key] is None:
        return None
    return _integer(d, key, path, minimum=minimum)


def _vector(d, key, path, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: required")
        return None
    v = d[key]
    if not isinstance(v, list) or not v or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{path}.{key}: expected a list of numbers")
    return [float(x) for x in v]


def _matrix(d, key, path, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: required")
        return None
    v = d[key]
    if not isinstance(v, list) or not all(isinstance(row, list) for row in v):
        raise ConfigError(f"{path}.{key}: expected a list of rows")
    width = len(v[0]) if v else 0
    for i, row in enumerate(v):
        if len(row) != width or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in row):
            raise ConfigError(f"{path}.{key}[{i}]: expected {width} numbers")
    return [[float(x) for x in row] for row in v]


@dataclass
class RunConfig:
    model: dict
    scheme: str
    steps: int
    verify_nodes: int | None
    verify_start: float
    paths: int
    policy_steps: int
    substeps: int
    seed: int
    x0: float
    s0: list | None
    policies: list | None
    random_redraw: str
    step_counts: list
    fdm: dict
    output: str
    raw: dict


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    raw = _expect_mapping(raw, "config")
    _reject_unknown(raw, {"model", "solver", "verify", "simulate", "convergence",
                          "fdm", "output"}, "config")

    model = _expect_mapping(raw.get("model", None) or {}, "model")
    if not model:
        raise ConfigError("model: required")
    _reject_unknown(model, {"r", "gamma", "rho0", "rho", "varrho", "alpha", "mu",
                            "sigma", "T"}, "model")
    model_block = {
        "r": _number(model, "r", "model", required=True),
        "gamma": _number(model, "gamma", "model", required=True),
        "rho0": _number(model, "rho0", "model", required=True),
        "rho": _vector(model, "rho", "model", required=True),
        "varrho": _matrix(model, "varrho", "model", required=True),
        "alpha": _vector(model, "alpha", "model", required=True),
        "mu": _vector(model, "mu", "model", required=True),
        "sigma": _matrix(model, "sigma", "model", required=True),
        "T": _number(model, "T", "model", required=True),
    }

    solver = _expect_mapping(raw.get("solver", {}) or {}, "solver")
    _reject_unknown(solver, {"scheme", "steps"}, "solver")
    scheme = solver.get("scheme", "erow3-rk3")
    if scheme not in SCHEME_PAIRS:
        raise ConfigError(f"solver.scheme: expected one of {sorted(SCHEME_PAIRS)}, got {scheme!r}")
    steps = _integer(solver, "steps", "solver", default=100, minimum=1)

    ver = _expect_mapping(raw.get("verify", {}) or {}, "verify")
    _reject_unknown(ver, {"grid_nodes", "start_time"}, "verify")
    verify_nodes = _optional_integer(ver, "grid_nodes", "verify", minimum=1)
    verify_start = _number(ver, "start_time", "verify", default=0.0)

    sim = _expect_mapping(raw.get("simulate", {}) or {}, "simulate")
    _reject_unknown(sim, {"paths", "policy_steps", "substeps", "seed", "x0", "s0",
                          "policies", "random_redraw"}, "simulate")
    policies = sim.get("policies")
    if policies is not None and (not isinstance(policies, list)
                                 or not all(isinstance(p, str) for p in policies)):
        raise ConfigError("simulate.policies: expected a list of policy names or null")
    random_redraw = sim.get("random_redraw", "step")
    if random_redraw not in ("step", "path"):
        raise ConfigError(f"simulate.random_redraw: expected 'step' or 'path', got {random_redraw!r}")

    conv = _expect_mapping(raw.get("convergence", {}) or {}, "convergence")
    _reject_unknown(conv, {"step_counts"}, "convergence")
    step_counts = conv.get("step_counts", [8, 16, 32, 64, 128])
    if (not isinstance(step_counts, list) or not step_counts
            or not all(isinstance(k, int) and not isinstance(k, bool) and k >= 1
                       for k in step_counts)):
        raise ConfigError("convergence.step_counts: expected a list of positive integers")

    fdm = _expect_mapping(raw.get("fdm", {}) or {}, "fdm")
    _reject_unknown(fdm, {"s_lo", "s_hi", "n_space", "n_time", "ode_steps"}, "fdm")
    fdm_block = {
        "s_lo": _number(fdm, "s_lo", "fdm", default=-10.0),
        "s_hi": _number(fdm, "s_hi", "fdm", default=10.0),
        "n_space": _integer(fdm, "n_space", "fdm", default=100, minimum=3),
        "n_time": _integer(fdm, "n_time", "fdm", default=100, minimum=1),
        "ode_steps": _integer(fdm, "ode_steps", "fdm", default=25, minimum=4),
    }

    output = raw.get("output", "out")
    if not isinstance(output, str):
        raise ConfigError(f"output: expected a path string, got {output!r}")

    return RunConfig(
        model=model_block, scheme=scheme, steps=steps,
        verify_nodes=verify_nodes, verify_start=verify_start,
        paths=_integer(sim, "paths", "simulate", default=2000, minimum=1),
        policy_steps=_integer(sim, "policy_steps", "simulate", default=50, minimum=1),
        substeps=_integer(sim, "substeps", "simulate", default=4, minimum=1),
        seed=_integer(sim, "seed", "simulate", default=0),
        x0=_number(sim, "x0", "simulate", default=25.0),
        s0=_vector(sim, "s0", "simulate"),
        policies=policies, random_redraw=random_redraw,
        step_counts=step_counts, fdm=fdm_block, output=output, raw=raw,
    )


def _build_model(cfg: RunConfig) -> ModelParams:
    m = cfg.model
    return ModelParams(r=m["r"], gamma=m["gamma"], rho0=m["rho0"],
                       rho=np.array(m["rho"]), varrho=np.array(m["varrho"]),
                       alpha=np.array(m["alpha"]), mu=np.array(m["mu"]),
                       sigma=np.array(m["sigma"]), T=m["T"])


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return repr(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")


def _version_stamp() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
        if out.returncode == 0:
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"ouportfolio-{__version__}"


def _write_summary(out_dir: Path, command: str, cfg: RunConfig, payload: dict) -> Path:
    summary = {"command": command, "version": _version_stamp(), "config": cfg.raw}
    summary.update(payload)
    path = out_dir / f"{command}_summary.json"
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return path


def _solve_pair(params, consts, scheme_name: str, steps: int, with_grid: bool = False):
    riccati_scheme, tableau = SCHEME_PAIRS[scheme_name]
    grid = solve_riccati(params, consts, scheme=riccati_scheme, K=steps,
                         need_half_steps=True)
    path = solve_coefficients(params, consts, grid, tableau)
    return (grid, path) if with_grid else path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(cfg: RunConfig, out_dir: Path) -> dict:
    params = _build_model(cfg)
    consts = validate(params)
    t0 = time.perf_counter()
    grid, path = _solve_pair(params, consts, cfg.scheme, cfg.steps, with_grid=True)
    elapsed = time.perf_counter() - t0

    outputs = []
    gpath = out_dir / "g.csv"
    grid.to_csv(gpath)
    outputs.append(gpath)
    cpath = out_dir / "coefficients.csv"
    path.to_csv(cpath)
    outputs.append(cpath)

    summary = {"scheme": cfg.scheme, "steps": cfg.steps, "walltime_s": elapsed,
               "terminal": {"f0_at_0": float(path.f0_values[0])}}
    try:
        dp = DecoupledParams.from_model(params, consts)
    except ModelError:
        dp = None
    if dp is not None:
        times, g_b, f_b, f0_b = benchmark_table(dp, cfg.steps)
        _write_csv(out_dir / "benchmark_f.csv",
                   ["t"] + [f"f{i + 1}" for i in range(params.n)],
                   [[t] + list(row) for t, row in zip(times, f_b)])
        _write_csv(out_dir / "benchmark_f0.csv", ["t", "f0"],
                   [[t, v] for t, v in zip(times, f0_b)])
        outputs += [out_dir / "benchmark_f.csv", out_dir / "benchmark_f0.csv"]
        for scheme_name in SCHEME_PAIRS:
            spath = _solve_pair(params, consts, scheme_name, cfg.steps)
            err_f = spath.f_values - f_b
            err_f0 = spath.f0_values - f0_b
            _write_csv(out_dir / f"error_f_{scheme_name}.csv",
                       ["t"] + [f"f{i + 1}" for i in range(params.n)],
                       [[t] + list(row) for t, row in zip(times, err_f)])
            _write_csv(out_dir / f"error_f0_{scheme_name}.csv", ["t", "f0"],
                       [[t, v] for t, v in zip(times, err_f0)])
            outputs += [out_dir / f"error_f_{scheme_name}.csv",
                        out_dir / f"error_f0_{scheme_name}.csv"]
        summary["benchmark"] = "decoupled closed form"
    summary["outputs"] = [str(p) for p in outputs]
    return summary


def _relative_error(num: np.ndarray, ref: np.ndarray) -> float:
    scale = 1.0 + np.max(np.sqrt((ref**2).reshape(ref.shape[0], -1).sum(axis=1)))
    diff = num - ref
    per_node = np.sqrt((diff**2).reshape(diff.shape[0], -1).sum(axis=1))
    return float(per_node.max() / scale)


def cmd_convergence(cfg: RunConfig, out_dir: Path) -> dict:
    params = _build_model(cfg)
    consts = validate(params)
    dp = DecoupledParams.from_model(params, consts)

    rows = []
    walltimes = []
    errors = {name: {"f": [], "f0": []} for name in SCHEME_PAIRS}
    hs = []
    for K in cfg.step_counts:
        times, g_b, f_b, f0_b = benchmark_table(dp, K)
        h = params.T / K
        hs.append(h)
        row = [h, K]
        for scheme_name in SCHEME_PAIRS:
            t0 = time.perf_counter()
            spath = _solve_pair(params, consts, scheme_name, K)
            wt = time.perf_counter() - t0
            ef = _relative_error(spath.f_values, f_b)
            ef0 = _relative_error(spath.f0_values[:, None], f0_b[:, None])
            errors[scheme_name]["f"].append(ef)
            errors[scheme_name]["f0"].append(ef0)
            walltimes.append({"scheme": scheme_name, "steps": K, "walltime_s": wt,
                              "err_f": ef, "err_f0": ef0})
            row += [ef, ef0]
        rows.append(row)

    header = ["h", "steps"]
    for scheme_name in SCHEME_PAIRS:
        header += [f"err_f_{scheme_name}", f"err_f0_{scheme_name}"]
    _write_csv(out_dir / "convergence.csv", header, rows)

    slopes = {}
    if len(hs) >= 2:
        logh = np.log2(hs)
        for scheme_name in SCHEME_PAIRS:
            for key in ("f", "f0"):
                fit = np.polyfit(logh, np.log2(errors[scheme_name][key]), 1)
                slopes[f"{scheme_name}_{key}"] = float(fit[0])
    return {"outputs": [str(out_dir / "convergence.csv")], "slopes": slopes,
            "timings": walltimes}


def cmd_verify(cfg: RunConfig, out_dir: Path) -> dict:
    params = _build_model(cfg)
    consts = validate(params)
    riccati_scheme, _ = SCHEME_PAIRS[cfg.scheme]
    grid = solve_riccati(params, consts, scheme=riccati_scheme, K=cfg.steps)
    report = check_conditions(grid, params, consts, nodes=cfg.verify_nodes,
                              start_time=cfg.verify_start)
    report.to_csv(out_dir / "margins.csv")
    for line in report.summary_lines():
        print(line)
    return {"outputs": [str(out_dir / "margins.csv")], "passed": report.passed,
            "min_margins": {name: cond.min_margin
                            for name, cond in report.conditions.items()},
            "notes": report.notes}


def cmd_compare_fdm(cfg: RunConfig, out_dir: Path) -> dict:
    params = _build_model(cfg)
    consts = validate(params)
    if params.n != 1:
        raise ConfigError("compare-fdm requires a single-asset model")
    dp = DecoupledParams.from_model(params, consts)
    fb = cfg.fdm
    times = np.linspace(0.0, params.T, fb["n_time"] + 1)
    s = np.linspace(fb["s_lo"], fb["s_hi"], fb["n_space"] + 1)
    reference = phi_reference_1d(dp, times, s)

    def ode_surface_at(steps):
        path = _solve_pair(params, consts, "erow3-rk3", steps)
        ev = PhiEvaluator(path, params, consts)
        return ev.phi_lattice(times, s)

    t0 = time.perf_counter()
    ode_surface = ode_surface_at(fb["ode_steps"])
    ode_time = time.perf_counter() - t0

    # coarse probe row: still far more accurate than the grid method, in a
    # fraction of the time
    probe_steps = max(4, fb["ode_steps"] // 4)
    t0 = time.perf_counter()
    probe_surface = ode_surface_at(probe_steps)
    probe_time = time.perf_counter() - t0

    t0 = time.perf_counter()
    fdm = solve_fdm_1d(params, consts, fb["s_lo"], fb["s_hi"], fb["n_space"], fb["n_time"])
    fdm_time = time.perf_counter() - t0

    err_ode = ode_surface - reference
    err_fdm = fdm.phi - reference
    header = ["t"] + [f"s{i}" for i in range(s.size)]
    for name, surf in (("surface_ode", ode_surface), ("surface_fdm", fdm.phi),
                       ("error_ode", err_ode), ("error_fdm", err_fdm)):
        _write_csv(out_dir / f"{name}.csv", header,
                   [[t] + list(row) for t, row in zip(times, surf)])

    stats = {
        "ode": {"max_error": float(np.abs(err_ode).max()), "walltime_s": ode_time,
                "steps": fb["ode_steps"]},
        "ode_probe": {"max_error": float(np.abs(probe_surface - reference).max()),
                      "walltime_s": probe_time, "steps": probe_steps},
        "fdm": {"max_error": float(np.abs(err_fdm).max()), "walltime_s": fdm_time,
                "n_space": fb["n_space"], "n_time": fb["n_time"]},
    }
    for key in ("ode", "ode_probe", "fdm"):
        row = stats[key]
        print(f"{key:10s} max error {row['max_error']:.3e}  "
              f"wall {row['walltime_s']:.4f}s")
    outputs = [str(out_dir / f"{name}.csv")
               for name in ("surface_ode", "surface_fdm", "error_ode", "error_fdm")]
    return {"outputs": outputs, "comparison": stats}


def cmd_simulate(cfg: RunConfig, out_dir: Path, force: bool = False,
                 dump_paths: bool = False) -> dict:
    params = _build_model(cfg)
    consts = validate(params)
    if cfg.s0 is None:
        raise ConfigError("simulate.s0: required for simulation")
    s0 = np.asarray(cfg.s0, dtype=float)

    riccati_scheme, _ = SCHEME_PAIRS[cfg.scheme]
    verify_grid = solve_riccati(params, consts, scheme=riccati_scheme, K=cfg.steps)
    report = check_conditions(verify_grid, params, consts, nodes=cfg.verify_nodes,
                              start_time=cfg.verify_start)
    if not report.passed and not force:
        raise VerificationFailed(
            "optimality conditions failed; rerun with --force to simulate anyway")

    path = _solve_pair(params, consts, cfg.scheme, cfg.policy_steps)
    ev = PhiEvaluator(path, params, consts)
    library = policy_library(params, ev, random_redraw=cfg.random_redraw)
    if cfg.policies is not None:
        by_name = {p.name: p for p in library}
        missing = [name for name in cfg.policies if name not in by_name]
        if missing:
            raise ConfigError(f"simulate.policies: unknown policy name(s) {missing}; "
                              f"known: {sorted(by_name)}")
        library = [by_name[name] for name in cfg.policies]

    rows = []
    ensembles = {}
    for pol in library:
        ens = simulate_paths(params, consts, pol, cfg.paths, cfg.policy_steps,
                             cfg.seed, x0=cfg.x0, s0=s0, substeps=cfg.substeps)
        ensembles[pol.name] = (pol, ens)
        rows.append([pol.name, *pol.rule_text, ens.mean_utility, ens.std_error,
                     ens.absorbed_count])
        print(f"{pol.name:24s} mean utility {ens.mean_utility:9.4f} "
              f"(se {ens.std_error:.4f}, absorbed {ens.absorbed_count})")

    header = ["policy", "pi1", "pi2", "consumption", "mean_utility", "std_error",
              "absorbed_paths"]
    _write_csv(out_dir / "policy_table.csv", header, rows)
    outputs = [out_dir / "policy_table.csv"]

    paired = {}
    if "Our Numerical Policy" in ensembles:
        _, ours = ensembles["Our Numerical Policy"]
        u_ours = path_utilities(ours, params)
        for name, (_, ens) in ensembles.items():
            if name == "Our Numerical Policy":
                continue
            diff = u_ours - path_utilities(ens, params)
            paired[name] = {
                "mean_diff": float(diff.mean()),
                "paired_se": float(diff.std(ddof=1) / np.sqrt(diff.size)),
            }

    if dump_paths:
        for name, (_, ens) in ensembles.items():
            slug = name.lower().replace(" ", "_").replace("(", "").replace(")", "").replace(".", "")
            ppath = out_dir / f"paths_{slug}.csv"
            header = (["path", "t"] + [f"S{i + 1}" for i in range(params.n)]
                      + ["X", "psi"])
            with open(ppath, "w", newline="") as fh:
                fh.write(",".join(header) + "\n")
                for m in range(ens.n_paths):
                    for i, t in enumerate(ens.times):
                        vals = [str(m), repr(float(t))]
                        vals += [repr(float(v)) for v in ens.S[m, i]]
                        vals += [repr(float(ens.X[m, i])), repr(float(ens.psi[m, i]))]
                        fh.write(",".join(vals) + "\n")
            outputs.append(ppath)

    return {"outputs": [str(p) for p in outputs], "verified": report.passed,
            "paired_vs_numerical": paired,
            "table": [{"policy": r[0], "mean_utility": r[4], "std_error": r[5],
                       "absorbed": r[6]} for r in rows]}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--config", required=True, help="YAML configuration file")
    sub.add_argument("--out", default=None, help="output directory (default from config)")
    sub.add_argument("--seed", type=int, default=None, help="override simulate.seed")
    sub.add_argument("--scheme", choices=sorted(SCHEME_PAIRS), default=None,
                     help="override solver.scheme")
    sub.add_argument("--steps", type=int, default=None, help="override solver.steps")
    sub.add_argument("--paths", type=int, default=None, help="override simulate.paths")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ouportfolio",
                                     description="portfolio-consumption solver toolkit")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "convergence", "verify", "compare-fdm", "simulate"):
        sub = subs.add_parser(name)
        _add_common(sub)
        if name == "simulate":
            sub.add_argument("--force", action="store_true",
                             help="simulate even when verification fails")
            sub.add_argument("--dump-paths", action="store_true",
                             help="write per-path CSV files")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.scheme is not None:
            cfg.scheme = args.scheme
        if args.steps is not None:
            if args.steps < 1:
                raise ConfigError("--steps: must be >= 1")
            cfg.steps = args.steps
        if args.paths is not None:
            if args.paths < 1:
                raise ConfigError("--paths: must be >= 1")
            cfg.paths = args.paths
        out_dir = Path(args.out if args.out is not None else cfg.output)
        out_dir.mkdir(parents=True, exist_ok=True)

        command = args.command
        if command == "solve":
            payload = cmd_solve(cfg, out_dir)
        elif command == "convergence":
            payload = cmd_convergence(cfg, out_dir)
        elif command == "verify":
            payload = cmd_verify(cfg, out_dir)
        elif command == "compare-fdm":
            payload = cmd_compare_fdm(cfg, out_dir)
        else:
            payload = cmd_simulate(cfg, out_dir, force=args.force,
                                   dump_paths=args.dump_paths)
        _write_summary(out_dir, command.replace("-", "_"), cfg, payload)
        if command == "verify" and not payload["passed"]:
            return 3
        return 0
    except (ConfigError, ModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
