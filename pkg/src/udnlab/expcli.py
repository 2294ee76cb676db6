"""Experiment runner: validated YAML configs in, reproducible CSV out.

Subcommands:

* ``run``      execute an experiment config and persist results
* ``validate`` check a config without executing it
* ``describe`` print the schema and defaults of an experiment

Every experiment requires an explicit ``master_seed``; identical configs
produce byte-identical CSV files regardless of ``--workers``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from . import __version__, analytic, coordination, planner
from .channel import ChannelParams
from .errors import ConfigError, UdnlabError
from .montecarlo import SimSpec, estimate_coverage, quantile, simulate_typical_rate
from .pointprocess import Window

EXPERIMENTS = ("coverage", "rate-cdf", "min-tau", "tradeoff", "coord-eval", "coord-savings")

_CHANNEL_FIELDS = {
    # name: (type, default)
    "alpha": (float, 4.0),
    "d0_m": (float, 1.0),
    "fading": (str, "rayleigh"),
    "noise_psd_dbm_hz": (float, -174.0),
    "bandwidth_hz": (float, 10e6),
    "tx_power_dbm": (float, 30.0),
    "theta0_db": (float, -6.0),
    "n_subchannels": (int, 10),
}

# experiment field tables: name -> (type, default); _REQUIRED means no default
_REQUIRED = object()

_COORD_COMMON = {
    "tau_grid": (list, [1.0, 2.0, 5.0, 10.0, 20.0]),
    "n_ues": (int, 50),
    "window_side_m": (float, 1000.0),
    "n_realizations": (int, 100),
    "n_rb": (int, 4),
    "policies": (list, list(coordination.POLICIES)),
}

_SCHEMAS: dict[str, dict] = {
    "coverage": {
        "theta_db_grid": (list, [-10.0, -6.0, 0.0, 6.0, 10.0]),
        "lambda_an": (float, 100.0),
        "n_trials": (int, 100_000),
    },
    "rate-cdf": {
        "lambda_an": (float, _REQUIRED),
        "lambda_ue": (float, _REQUIRED),
        "engine": (str, "montecarlo"),
        "n_trials": (int, 100_000),
    },
    "min-tau": {
        "r0_grid": (list, _REQUIRED),
        "engine": (str, "semianalytic"),
        "tau_bracket": (list, [1e-3, 100.0]),
        "tolerance": (float, 0.01),
        "n_trials": (int, 10_000),
    },
    "tradeoff": {
        "base_lambda_an": (float, 5.0),
        "base_lambda_ue": (float, 100.0),
        "densification_factor": (float, 100.0),
        "x_grid": (list, [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]),
        "engine": (str, "semianalytic"),
        "n_trials": (int, 10_000),
    },
    "coord-eval": dict(_COORD_COMMON),
    "coord-savings": dict(_COORD_COMMON, target_rates=(list, [0.1, 0.5, 1.0])),
}

# what each experiment computes, for `describe`
_PURPOSE = {
    "coverage": "Monte Carlo P(SIR >= theta) of the typical user versus the "
                "closed-form 1/(1 + rho) law (interference-limited, all "
                "interferers active).",
    "rate-cdf": "CDF of the typical-user rate at one (lambda_AN, lambda_UE) "
                "point, by simulation or the semi-analytic model.",
    "min-tau": "Minimum densification ratio delivering each target median "
               "rate; scales linearly for small targets and exponentially "
               "for large ones.",
    "tradeoff": "How a densification budget splits between serving more "
                "users and raising per-user rate, with the area capacity "
                "of each split.",
    "coord-eval": "Mean guaranteed (minimum) UE rate versus densification "
                  "ratio for the uncoordinated baseline and both "
                  "coordination policies.",
    "coord-savings": "Relative densification savings of the coordination "
                     "policies over the baseline at given guaranteed-rate "
                     "targets.",
}

_CSV_SCHEMAS = {
    "coverage": ("coverage.csv", ["theta_db", "prob", "stderr"]),
    "rate_cdf": ("rate_cdf.csv", ["rate_bps_hz", "cdf"]),
    "min_tau": ("min_tau.csv", ["r0", "tau_min"]),
    "tradeoff": ("tradeoff.csv", ["x", "rate_ratio", "area_capacity"]),
    "coord": ("coord.csv", ["tau", "policy", "mean_min_rate", "stderr"]),
    "savings": ("savings.csv", ["target_rate", "policy", "savings_pct"]),
}

# the coordination scenario keeps links below the threshold out of service
# like everything else, but its default threshold is 0 dB (the finite-area
# study leaves it open; see README for the sensitivity discussion)
_COORD_THETA0_DEFAULT = 0.0


def _coerce(name: str, value, typ, violations: list):
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            violations.append(f"{name}: expected a number, got {value!r}")
            return None
        return float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            violations.append(f"{name}: expected an integer, got {value!r}")
            return None
        return int(value)
    if typ is str:
        if not isinstance(value, str):
            violations.append(f"{name}: expected a string, got {value!r}")
            return None
        return value
    if typ is list:
        if not isinstance(value, list) or len(value) == 0:
            violations.append(f"{name}: expected a nonempty list, got {value!r}")
            return None
        return list(value)
    raise AssertionError(typ)


def _parse_section(section: dict, schema: dict, prefix: str, violations: list) -> dict:
    out = {}
    for key in section:
        if key not in schema:
            violations.append(f"{prefix}{key}: unknown field")
    for key, (typ, default) in schema.items():
        if key in section:
            val = _coerce(f"{prefix}{key}", section[key], typ, violations)
            if val is not None:
                out[key] = val
        elif default is _REQUIRED:
            violations.append(f"{prefix}{key}: required field is missing")
        else:
            out[key] = default
    return out


def parse_config(raw: dict):
    """Validate a raw config mapping; returns (experiment, fields, channel)
    or raises :class:`ConfigError` listing every violation."""
    violations: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a mapping"])
    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            [f"experiment: must be one of {', '.join(EXPERIMENTS)}; got {experiment!r}"]
        )

    top_known = {"experiment", "channel", "master_seed", "output_dir"}
    schema = _SCHEMAS[experiment]
    for key in raw:
        if key not in top_known and key not in schema:
            violations.append(f"{key}: unknown field")

    if "master_seed" not in raw:
        violations.append("master_seed: required field is missing (no wall-clock seeding)")
        seed = None
    else:
        seed = _coerce("master_seed", raw["master_seed"], int, violations)

    chan_raw = raw.get("channel", {})
    if not isinstance(chan_raw, dict):
        violations.append("channel: expected a mapping")
        chan_raw = {}
    chan_fields = _parse_section(chan_raw, _CHANNEL_FIELDS, "channel.", violations)
    if experiment.startswith("coord") and "theta0_db" not in chan_raw:
        chan_fields["theta0_db"] = _COORD_THETA0_DEFAULT

    fields = _parse_section({k: v for k, v in raw.items() if k in schema},
                            schema, "", violations)
    fields["master_seed"] = seed
    fields["output_dir"] = raw.get("output_dir", "results")

    params = None
    if not violations:
        try:
            params = ChannelParams(**chan_fields)
        except UdnlabError as exc:
            violations.append(f"channel: {exc}")
        else:
            violations.extend(_cross_checks(experiment, fields, params))
    if violations:
        raise ConfigError(violations)
    return experiment, fields, params


def _cross_checks(experiment: str, f: dict, params: ChannelParams) -> list[str]:
    out = []
    if experiment == "coverage":
        if not params.is_interference_limited:
            out.append("channel.noise_psd_dbm_hz: coverage runs are "
                       "interference-limited; set to -inf (use .inf in YAML with a minus)")
        if params.n_subchannels != 1:
            out.append("channel.n_subchannels: coverage runs require 1")
    if experiment == "min-tau":
        lo, hi = f["tau_bracket"][0], f["tau_bracket"][-1]
        if not (0 < lo < hi):
            out.append("tau_bracket: must be an ascending positive pair")
    if experiment == "tradeoff":
        if any(x <= 0 for x in f["x_grid"]) or any(
            b <= a for a, b in zip(f["x_grid"], f["x_grid"][1:])
        ):
            out.append("x_grid: must be positive and strictly ascending")
    if experiment.startswith("coord"):
        bad = [p for p in f["policies"] if p not in coordination.POLICIES]
        if bad:
            out.append(f"policies: unknown entries {bad}")
        if experiment == "coord-savings" and coordination.POLICY_BASELINE not in f["policies"]:
            out.append("policies: coord-savings needs the baseline for reference")
    return out


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, name: str, rows) -> None:
    fname, header = _CSV_SCHEMAS[name]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    (path / fname).write_text("\n".join(lines) + "\n")


def _run_experiment(experiment: str, f: dict, params: ChannelParams, workers: int):
    """Execute one experiment; returns {table_name: (rows, provenance)}."""
    seed = f["master_seed"]
    if experiment == "coverage":
        spec = SimSpec(lambda_an=f["lambda_an"], lambda_ue=0.0, params=params,
                       n_trials=f["n_trials"], master_seed=seed)
        rows = []
        for theta_db in f["theta_db_grid"]:
            est = estimate_coverage(spec, float(theta_db), n_workers=workers)
            rows.append((float(theta_db), est.probability, est.stderr))
        return {"coverage": (rows, {"engine": "montecarlo", "n_trials": f["n_trials"]})}

    if experiment == "rate-cdf":
        tau = f["lambda_an"] / f["lambda_ue"]
        if f["engine"] == "semianalytic":
            cdf = analytic.rate_cdf_semianalytic(tau, params)
            prov = {"engine": "semianalytic"}
        else:
            spec = SimSpec(lambda_an=f["lambda_an"], lambda_ue=f["lambda_ue"],
                           params=params, n_trials=f["n_trials"], master_seed=seed)
            cdf = simulate_typical_rate(spec, n_workers=workers)
            prov = {"engine": "montecarlo", "n_trials": f["n_trials"]}
        return {"rate_cdf": (cdf.to_rows(), prov)}

    if experiment == "min-tau":
        rows = []
        for r0 in f["r0_grid"]:
            query = planner.PlannerQuery(
                target_median_rate=float(r0), engine=f["engine"], params=params,
                tau_bracket=(f["tau_bracket"][0], f["tau_bracket"][-1]),
                tolerance=f["tolerance"], n_trials=f["n_trials"],
                master_seed=seed, n_workers=workers)
            rows.append((float(r0), planner.min_tau(query)))
        return {"min_tau": (rows, {"engine": f["engine"], "n_trials": f["n_trials"]})}

    if experiment == "tradeoff":
        query = planner.PlannerQuery(
            target_median_rate=1.0, engine=f["engine"], params=params,
            n_trials=f["n_trials"], master_seed=seed, n_workers=workers)
        curve = planner.tradeoff_curve(
            (f["base_lambda_an"], f["base_lambda_ue"]),
            f["densification_factor"], f["x_grid"], query)
        capacity, _best = planner.area_capacity(curve)
        rows = [(float(x), float(y), float(c))
                for x, y, c in zip(curve.x, curve.y, capacity)]
        return {"tradeoff": (rows, {"engine": f["engine"], "n_trials": f["n_trials"]})}

    # coord-eval / coord-savings
    window = Window.square((0.0, 0.0), f["window_side_m"])
    curves = coordination.guaranteed_rate_curves(
        f["tau_grid"], f["n_ues"], window, params, f["n_realizations"],
        seed, policies=tuple(f["policies"]), n_rb=f["n_rb"], n_workers=workers)
    coord_rows = []
    for pol in f["policies"]:
        c = curves[pol]
        for tau, m, e in zip(c.tau, c.mean_min_rate, c.stderr):
            coord_rows.append((float(tau), pol, float(m), float(e)))
    prov = {"engine": "montecarlo", "n_realizations": f["n_realizations"]}
    tables = {"coord": (coord_rows, prov)}
    if experiment == "coord-savings":
        savings = coordination.densification_savings(f["target_rates"], curves)
        tables["savings"] = (savings, prov)
    return tables


def run(config_path: str, workers: int = 1, output_override: str | None = None,
        seed_override: int | None = None) -> Path:
    """Run a config and persist result.json plus CSV tables; returns the
    output directory."""
    raw = _load_yaml(config_path)
    if seed_override is not None:
        raw["master_seed"] = int(seed_override)
    experiment, fields, params = parse_config(raw)
    if output_override is not None:
        fields["output_dir"] = output_override

    t0 = time.perf_counter()
    tables = _run_experiment(experiment, fields, params, int(workers))
    wall = time.perf_counter() - t0

    stamp = time.strftime("%Y%m%dT%H%M%S")  # metadata only, never a seed
    out_dir = Path(fields["output_dir"]) / experiment / f"{stamp}-{fields['master_seed']}"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, (rows, _prov) in tables.items():
        _write_csv(out_dir, name, rows)

    record = {
        "artifact_version": __version__,
        "experiment": experiment,
        "config": {**{k: v for k, v in raw.items()}},
        "resolved": {k: v for k, v in fields.items()},
        "channel": asdict(params),
        "tables": {
            name: {"file": _CSV_SCHEMAS[name][0], "rows": len(rows), **prov}
            for name, (rows, prov) in tables.items()
        },
        "wall_time_s": wall,
        "workers": int(workers),  # excluded from the determinism contract
    }
    (out_dir / "result.json").write_text(json.dumps(record, indent=2, default=_json_default) + "\n")
    return out_dir


def _json_default(x):
    if isinstance(x, float) and math.isinf(x):
        return "-inf" if x < 0 else "inf"
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x)}")


def _load_yaml(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config: {exc}"]) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"config is not valid YAML: {exc}"]) from exc
    if raw is None:
        raise ConfigError(["config file is empty"])
    return raw


def validate(config_path: str) -> list[str]:
    """Return a list of violations (empty when the config is valid)."""
    try:
        parse_config(_load_yaml(config_path))
    except ConfigError as exc:
        return exc.violations
    return []


def describe(experiment: str) -> str:
    if experiment not in EXPERIMENTS:
        raise UdnlabError(
            f"unknown experiment {experiment!r}; valid names: {', '.join(EXPERIMENTS)}"
        )
    lines = [f"experiment: {experiment}", "", _PURPOSE[experiment], "",
             "fields (name: type = default; 'required' when no default):"]
    schema = _SCHEMAS[experiment]
    for key, (typ, default) in sorted(schema.items()):
        d = "required" if default is _REQUIRED else f"default {default}"
        lines.append(f"  {key}: {typ.__name__} ({d})")
    lines.append("  master_seed: int (required)")
    lines.append("  output_dir: str (default 'results')")
    lines.append("")
    lines.append("channel section (defaults):")
    for key, (typ, default) in _CHANNEL_FIELDS.items():
        if experiment.startswith("coord") and key == "theta0_db":
            default = _COORD_THETA0_DEFAULT
        lines.append(f"  channel.{key}: {typ.__name__} (default {default})")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="udnlab",
        description="Seeded experiments for ultra-dense network densification studies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("--config", required=True, help="path to YAML config")
    p_run.add_argument("--workers", type=int, default=1, help="worker processes")
    p_run.add_argument("--output", default=None, help="override output_dir")
    p_run.add_argument("--seed", type=int, default=None, help="override master_seed")

    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("--config", required=True)

    p_desc = sub.add_parser("describe", help="print an experiment's schema")
    p_desc.add_argument("experiment")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            out_dir = run(args.config, workers=args.workers,
                          output_override=args.output, seed_override=args.seed)
            print(out_dir)
            return 0
        if args.command == "validate":
            violations = validate(args.config)
            if violations:
                for v in violations:
                    print(f"violation: {v}", file=sys.stderr)
                return 2
            print("ok")
            return 0
        print(describe(args.experiment))
        return 0
    except ConfigError as exc:
        for v in exc.violations:
            print(f"violation: {v}", file=sys.stderr)
        return 2
    except UdnlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
