"""Reproducible experiment driver.

Subcommands map to the toolkit's experiment kinds (curves, distributions,
optimize, validate, scenario).  Configuration comes from TOML files or
in-repo presets, with CLI flags and WETBENCH_* environment variables taking
precedence.  All outputs are CSV with '#'-prefixed metadata lines carrying
the config hash and seed, and are byte-identical for a fixed seed regardless
of --threads.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import PhaseFunctionInputs, dist_aa_is, dist_aa_ss
from .channel import ArrayConfig, Exponential, PhaseShift, Uniform, build_correlation, r_sum
from .errors import (
    BudgetExceeded,
    ConfigError,
    Infeasible,
    NonConvergence,
    WetbenchError,
)
from .harvester import TABLE2_CURVE, dbm_to_mw, mw_to_dbm
from .montecarlo import ExperimentSpec, FixedPhi, RandomPhi, run, validate_theorem2
from .optimize import Objective, aa_is_shift, max_energy_shift, min_var_shift, search_phase
from .rng import stream
from .schemes import Scheme, SchemeConfig
from .scenario import (
    evaluate_plan,
    scenario_a,
    scenario_b,
    scenario_b_plan,
    scenario_c,
    scenario_c_plan,
    single_scheme_plan,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

PRESETS = ("paper-table2", "paper-appendixB", "paper-fig10-A", "paper-fig10-B", "paper-fig10-C")

# Allowed keys per config section, per experiment kind; unknown keys are
# rejected with the offending path in the message.
_ARRAY_KEYS = {"m", "kappa", "phi", "phi0", "correlation", "coefficient"}
_SCHEMA: dict[str, dict[str, set[str] | None]] = {
    "curves": {
        "array": _ARRAY_KEYS,
        "run": {"samples", "beta_dbm", "schemes"},
        "sweep": {"parameter", "values"},
    },
    "distributions": {
        "array": _ARRAY_KEYS,
        "run": {"samples", "beta_dbm", "schemes", "bins", "lo_mw", "hi_mw"},
    },
    "optimize": {
        "optimize": {"objective", "m", "restarts", "grid"},
    },
    "validate": {
        "validate": {
            "m", "trials", "samples", "bins", "lo", "hi", "beta", "psi", "p1", "kappas", "phis",
        },
    },
    "scenario": {
        "array": _ARRAY_KEYS,
        "scenario": {"name", "samples", "devices"},
    },
}

_SCHEME_NAMES = ("aa-ss-maxe", "aa-ss-minvar", "aa-is", "sa")


def _validate_config(config: dict) -> None:
    kind = config.get("kind")
    if kind not in _SCHEMA:
        raise ConfigError(f"kind={kind!r} must be one of {sorted(_SCHEMA)}")
    schema = _SCHEMA[kind]
    for key, value in config.items():
        if key == "kind":
            continue
        if key not in schema:
            raise ConfigError(f"unknown section [{key}] for kind={kind}")
        if not isinstance(value, dict):
            raise ConfigError(f"section [{key}] must be a table")
        extra = set(value) - schema[key]
        if extra:
            raise ConfigError(f"unknown keys in [{key}]: {sorted(extra)}")


def _load_config(preset: str | None, path: str | None) -> dict:
    config: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {', '.join(PRESETS)}")
        text = resources.files("wetbench").joinpath(f"presets/{preset}.toml").read_text()
        config = tomllib.loads(text)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                loaded = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for key, value in loaded.items():
            if isinstance(value, dict) and isinstance(config.get(key), dict):
                config[key] = {**config[key], **value}
            else:
                config[key] = value
    if not config:
        raise ConfigError("either --preset or --config is required")
    _validate_config(config)
    return config


def _config_hash(config: dict, seed: int) -> str:
    payload = json.dumps({"config": config, "seed": seed}, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _build_array(section: dict) -> tuple[ArrayConfig, object]:
    """Build the ArrayConfig plus the azimuth policy ('random' or a number)."""
    m = int(section.get("m", 8))
    model_name = section.get("correlation", "exponential")
    coeff = float(section.get("coefficient", 0.3))
    if model_name == "exponential":
        model = Exponential(coeff)
    elif model_name == "uniform":
        model = Uniform(coeff)
    else:
        raise ConfigError(f"correlation={model_name!r} must be exponential or uniform")
    phi_raw = section.get("phi", "random")
    policy = RandomPhi() if phi_raw == "random" else FixedPhi(float(phi_raw))
    kwargs = {}
    if "phi0" in section:
        kwargs["phi0"] = float(section["phi0"])
    array = ArrayConfig(
        M=m,
        kappa=float(section.get("kappa", 5.0)),
        phi=0.0 if phi_raw == "random" else float(phi_raw),
        correlation=model,
        **kwargs,
    )
    return array, policy


def _scheme_config(name: str, beta: float, array: ArrayConfig) -> SchemeConfig:
    if name not in _SCHEME_NAMES:
        raise ConfigError(f"scheme {name!r} must be one of {_SCHEME_NAMES}")
    M = array.M
    if name == "aa-ss-maxe":
        return SchemeConfig(Scheme.AA_SS, beta, max_energy_shift(M))
    if name == "aa-ss-minvar":
        return SchemeConfig(Scheme.AA_SS, beta, min_var_shift(M))
    shift = aa_is_shift(M, r_sum(build_correlation(array.correlation, M)))
    scheme = Scheme.AA_IS if name == "aa-is" else Scheme.SA
    return SchemeConfig(scheme, beta, shift)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[list], meta: dict) -> None:
    lines = [f"# {k}={v}" for k, v in meta.items()]
    lines.append(",".join(header))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def cmd_curves(config: dict, seed: int, threads: int, out: Path) -> list[Path]:
    sweep = config.get("sweep", {})
    parameter = sweep.get("parameter")
    values = sweep.get("values", [])
    if parameter not in ("beta_dbm", "tau", "kappa", "m"):
        raise ConfigError(f"sweep parameter {parameter!r} must be beta_dbm, tau, kappa or m")
    if not values:
        raise ConfigError("sweep values must be a non-empty list")
    run_sec = config.get("run", {})
    samples = int(run_sec.get("samples", 100000))
    beta_dbm = float(run_sec.get("beta_dbm", 2.0))
    schemes = run_sec.get("schemes", list(_SCHEME_NAMES))
    array, policy = _build_array(config.get("array", {}))

    rows = []
    for value in values:
        arr, beta = array, dbm_to_mw(beta_dbm)
        if parameter == "beta_dbm":
            beta = dbm_to_mw(float(value))
        elif parameter == "tau":
            arr = replace(array, correlation=Exponential(float(value)))
        elif parameter == "kappa":
            arr = replace(array, kappa=float(value))
        else:
            arr = replace(array, M=int(value))
        for name in schemes:
            spec = ExperimentSpec(arr, _scheme_config(name, beta, arr), TABLE2_CURVE, samples, seed, policy)
            stats = run(spec, threads=threads)
            rows.append(
                [value, name, stats.harvested_mean, stats.harvested_variance, stats.outage_prob]
            )
    path = out / "curves.csv"
    _write_csv(
        path,
        [parameter, "scheme", "harvested_mean_mw", "harvested_variance", "outage_prob"],
        rows,
        {"tool": f"wetbench {__version__}", "config_hash": _config_hash(config, seed), "seed": seed},
    )
    return [path]


def cmd_distributions(config: dict, seed: int, threads: int, out: Path) -> list[Path]:
    run_sec = config.get("run", {})
    samples = int(run_sec.get("samples", 200000))
    beta = dbm_to_mw(float(run_sec.get("beta_dbm", 2.0)))
    bins = int(run_sec.get("bins", 240))
    lo = float(run_sec.get("lo_mw", 0.0))
    schemes = run_sec.get("schemes", list(_SCHEME_NAMES))
    array, policy = _build_array(config.get("array", {}))
    if isinstance(policy, RandomPhi):
        raise ConfigError("distributions requires a fixed azimuth phi in [array]")
    hi = float(run_sec.get("hi_mw", 6.0 * beta))

    rows = []
    for name in schemes:
        scheme = _scheme_config(name, beta, array)
        spec = ExperimentSpec(array, scheme, TABLE2_CURVE, samples, seed, policy)
        stats = run(spec, threads=threads, bins=bins, rf_range=(lo, hi))
        hist = stats.rf_histogram
        centers = (hist.edges[:-1] + hist.edges[1:]) / 2.0
        inputs = PhaseFunctionInputs(array.M, scheme.shift, array.phi, array.kappa,
                                     r_sum(build_correlation(array.correlation, array.M)))
        if name.startswith("aa-ss"):
            dist = dist_aa_ss(beta, inputs)
        elif name == "aa-is":
            dist = dist_aa_is(beta, inputs)
        else:
            dist = None
        cdf = dist.cdf(centers) if dist is not None else [math.nan] * bins
        pdf = dist.pdf(centers) if dist is not None else [math.nan] * bins
        for i in range(bins):
            rows.append([centers[i], name, hist.mass[i], float(cdf[i]), float(pdf[i])])
    path = out / "distributions.csv"
    _write_csv(
        path,
        ["rf_mw", "scheme", "empirical_mass", "analytic_cdf", "analytic_pdf"],
        rows,
        {"tool": f"wetbench {__version__}", "config_hash": _config_hash(config, seed), "seed": seed},
    )
    return [path]


def cmd_optimize(config: dict, seed: int, threads: int, out: Path) -> list[Path]:
    sec = config.get("optimize", {})
    try:
        objective = Objective(sec.get("objective", "max-f-avg"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    M = int(sec.get("m", 8))
    result = search_phase(
        objective,
        M,
        restarts=int(sec.get("restarts", 16)),
        grid=int(sec.get("grid", 720)),
        seed=seed,
    )
    rows = [[t, float(result.shift.psi[t])] for t in range(M)]
    path = out / "optimize.csv"
    _write_csv(
        path,
        ["antenna", "psi_rad"],
        rows,
        {
            "tool": f"wetbench {__version__}",
            "config_hash": _config_hash(config, seed),
            "seed": seed,
            "objective": objective.value,
            "value": repr(result.value),
            "evaluations": result.evaluations,
        },
    )
    return [path]


def cmd_validate(config: dict, seed: int, threads: int, out: Path) -> list[Path]:
    sec = config.get("validate", {})
    M = int(sec.get("m", 4))
    trials = int(sec.get("trials", 100))
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    samples = int(sec.get("samples", 200000))
    psi_policy = sec.get("psi", "zero")
    p1 = sec.get("p1", "analytic")
    kappas = [float(k) for k in sec.get("kappas", [0.0, 1.0, 5.0])]
    phis = [float(p) for p in sec.get("phis", [0.0, 3 * math.pi / 4])]
    if psi_policy == "zero":
        psi = PhaseShift.zero(M)
    elif psi_policy == "random":
        raw = stream(seed, 1_000_000).uniform(0.0, 2.0 * math.pi, M)
        raw[0] = 0.0
        psi = PhaseShift(raw)
    else:
        raise ConfigError(f"psi={psi_policy!r} must be zero or random")

    rows = []
    for kappa in kappas:
        for phi in phis:
            res = validate_theorem2(
                M, kappa, phi, psi,
                trials=trials, samples=samples,
                beta=float(sec.get("beta", 1.0)),
                bins=int(sec.get("bins", 240)),
                lo=float(sec.get("lo", 0.0)), hi=float(sec.get("hi", 6.0)),
                p1=p1, seed=seed,
            )
            rows.append([kappa, phi, res.mean_analytic, res.mean_simulated])
    d_all = [r[2] if r[2] is not None else r[3] for r in rows]
    path = out / "validate.csv"
    _write_csv(
        path,
        ["kappa", "phi", "mean_db_analytic", "mean_db_simulated"],
        [[r[0], r[1], "" if r[2] is None else repr(r[2]), "" if r[3] is None else repr(r[3])] for r in rows],
        {
            "tool": f"wetbench {__version__}",
            "config_hash": _config_hash(config, seed),
            "seed": seed,
            "max_mean_db": repr(max(d_all)),
            "mean_mean_db": repr(sum(d_all) / len(d_all)),
        },
    )
    print(f"validate: max mean d_B = {max(d_all):.6f}, mean = {sum(d_all) / len(d_all):.6f}")
    return [path]


def _scenario_setup(name: str, devices: int):
    if name == "A":
        return scenario_a(devices), None
    if name == "B":
        return scenario_b(devices), scenario_b_plan()
    if name == "C":
        return scenario_c(devices), scenario_c_plan()
    raise ConfigError(f"scenario name {name!r} must be A, B or C")


def cmd_scenario(config: dict, seed: int, threads: int, out: Path) -> list[Path]:
    sec = config.get("scenario", {})
    name = sec.get("name", "A")
    samples = int(sec.get("samples", 20000))
    devices = int(sec.get("devices", 80))
    array, _ = _build_array(config.get("array", {}))
    deployment, special = _scenario_setup(name, devices)

    plans = {
        "sa": single_scheme_plan(array.M, Scheme.SA),
        "aa-is": single_scheme_plan(array.M, Scheme.AA_IS),
        "aa-ss-minvar": single_scheme_plan(array.M, Scheme.AA_SS, min_var_shift(array.M)),
        "aa-ss-maxe": single_scheme_plan(array.M, Scheme.AA_SS, max_energy_shift(array.M)),
    }
    if special is not None:
        plans[f"plan-{name}"] = special

    rows, summary = [], []
    for plan_name, plan in plans.items():
        res = evaluate_plan(deployment, plan, array, TABLE2_CURVE, samples, seed, threads)
        for i, (d, az) in enumerate(res.devices):
            rows.append([plan_name, i, float(d), float(az), float(res.energies[i])])
        summary.append([plan_name, res.min_energy, mw_to_dbm(res.min_energy)])
    meta = {
        "tool": f"wetbench {__version__}",
        "config_hash": _config_hash(config, seed),
        "seed": seed,
        "scenario": name,
    }
    devices_path = out / f"scenario_{name}_devices.csv"
    _write_csv(devices_path, ["plan", "device", "distance_m", "azimuth_rad", "mean_harvested_mw"], rows, meta)
    summary_path = out / f"scenario_{name}_summary.csv"
    _write_csv(summary_path, ["plan", "min_energy_mw", "min_energy_dbm"], summary, meta)
    for plan_name, e_mw, e_dbm in summary:
        print(f"scenario {name}: {plan_name} min = {e_mw:.6f} mW ({e_dbm:.3f} dBm)")
    return [devices_path, summary_path]


_COMMANDS = {
    "curves": cmd_curves,
    "distributions": cmd_distributions,
    "optimize": cmd_optimize,
    "validate": cmd_validate,
    "scenario": cmd_scenario,
}


def _env_default(name: str, cast, fallback):
    raw = os.environ.get(f"WETBENCH_{name}")
    return fallback if raw is None else cast(raw)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wetbench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"wetbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=_env_default("CONFIG", str, None))
        p.add_argument("--preset", default=_env_default("PRESET", str, None))
        p.add_argument("--seed", type=int, default=_env_default("SEED", int, 0))
        p.add_argument("--threads", type=int, default=_env_default("THREADS", int, 1))
        p.add_argument("--out", default=_env_default("OUT", str, "out"))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = _load_config(args.preset, args.config)
        if config["kind"] != args.command:
            raise ConfigError(
                f"config kind={config['kind']!r} does not match subcommand {args.command!r}"
            )
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        paths = _COMMANDS[args.command](config, args.seed, args.threads, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergence, BudgetExceeded, Infeasible) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except WetbenchError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
