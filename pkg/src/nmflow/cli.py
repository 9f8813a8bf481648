"""Command-line front end: rate, trajectory, measure, sweep, divisibility.

Configuration is a flat key=value text file with units carried in the key
names (horizon_over_lambda, step_times_a, ...); unknown keys are errors.
Command-line flags mirror the config fields, take the model's reduced time
unit (1/lambda, 1/A, 1/gamma0), and win over the file. All commands are
deterministic given the config, including seeds; outputs are CSV (17
significant digits) or JSON with a schema_version field.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import models
from .dynamics import constant_generator, divisibility_report
from .exceptions import ConfigError, NumericalError
from .measure import (
    MeasureSettings,
    canonical_pairs,
    make_time_grid,
    n_from_trajectory,
    search_pairs,
    sweep,
    trajectory,
    trajectory_from_values,
)
from .states import DensityMatrix, StatePair, bloch_from_qubit, load_state, qubit_from_bloch

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "NMFLOW_OUTPUT_DIR"

COMMON_KEYS = {"model", "output", "format", "seed", "n_pairs", "sigma_threshold"}
MODEL_KEYS = {
    "jc": {
        "gamma0_over_lambda",
        "delta_over_lambda",
        "horizon_over_lambda",
        "step_over_lambda",
        "delta_over_lambda_min",
        "delta_over_lambda_max",
        "delta_points",
        "clamp_rate",
    },
    "spinbath": {
        "n_spins",
        "pair_a",
        "pair_b_re",
        "pair_b_im",
        "horizon_times_a",
        "step_times_a",
    },
    "semigroup": {"horizon_times_gamma0", "step_times_gamma0"},
    "custom-file": {"generator_file", "horizon", "step"},
}
PAIR_KEYS = {"pair", "pair_bloch", "pair_files"}
DIVISIBILITY_KEYS = {"grid_points", "cp_tol"}

DEFAULTS = {
    "model": "jc",
    "format": "csv",
    "seed": "0",
    "n_pairs": "1000",
    "gamma0_over_lambda": "0.01",
    "delta_over_lambda": "0",
    "horizon_over_lambda": "60",
    "step_over_lambda": "1e-3",
    "delta_over_lambda_min": "0",
    "delta_over_lambda_max": "10",
    "delta_points": "11",
    "clamp_rate": "false",
    "n_spins": "20",
    "pair_a": "0",
    "pair_b_re": "1",
    "pair_b_im": "0",
    "horizon_times_a": "4.9",
    "step_times_a": "5e-4",
    "horizon_times_gamma0": "5",
    "step_times_gamma0": "1e-3",
    "horizon": "1",
    "step": "1e-3",
    "pair": "z",
    "grid_points": "20",
    "cp_tol": "1e-7",
}

# Time/step keys per model, in the model's reduced units (lambda = A = 1).
UNIT_KEYS = {
    "jc": ("horizon_over_lambda", "step_over_lambda"),
    "spinbath": ("horizon_times_a", "step_times_a"),
    "semigroup": ("horizon_times_gamma0", "step_times_gamma0"),
    "custom-file": ("horizon", "step"),
}
TIME_COLUMN = {
    "jc": "t_lambda",
    "spinbath": "t_times_a",
    "semigroup": "t_times_gamma0",
    "custom-file": "t",
}


def parse_config_file(path):
    """Flat key=value config; '#' starts a comment; duplicate keys are errors."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


@dataclass
class RunConfig:
    """Resolved configuration for one command."""

    model: str
    horizon: float
    step: float
    n_pairs: int
    seed: int
    output: str
    format: str
    threshold: Optional[float] = None
    raw: dict = field(default_factory=dict)
    provided: set = field(default_factory=set)

    def get(self, key):
        return self.raw[key]

    def get_float(self, key):
        return _to_float(key, self.raw[key])

    def get_int(self, key):
        return _to_int(key, self.raw[key])

    def get_bool(self, key):
        value = self.raw[key].lower()
        if value in ("true", "1", "yes"):
            return True
        if value in ("false", "0", "no"):
            return False
        raise ConfigError(f"key {key}: expected a boolean, got {self.raw[key]!r}")


def _to_float(key, value):
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"key {key}: expected a number, got {value!r}")


def _to_int(key, value):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"key {key}: expected an integer, got {value!r}")


def resolve_config(args, command):
    raw = dict(DEFAULTS)
    file_cfg = parse_config_file(args.config) if args.config else {}
    model = args.model or file_cfg.get("model") or raw["model"]
    if model not in MODEL_KEYS:
        raise ConfigError(
            f"unknown model {model!r}; expected one of {sorted(MODEL_KEYS)}"
        )
    allowed = COMMON_KEYS | MODEL_KEYS[model] | PAIR_KEYS | DIVISIBILITY_KEYS
    for key in file_cfg:
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r} for model {model!r}")
    raw.update(file_cfg)
    raw["model"] = model

    horizon_key, step_key = UNIT_KEYS[model]
    # Flags win over the config file.
    flag_map = {
        "horizon": horizon_key,
        "step": step_key,
        "seed": "seed",
        "n_pairs": "n_pairs",
        "output": "output",
        "format": "format",
        "sigma_threshold": "sigma_threshold",
        "delta": "delta_over_lambda",
        "gamma0": "gamma0_over_lambda",
        "n_spins": "n_spins",
        "pair": "pair",
        "pair_bloch": "pair_bloch",
        "pair_files": "pair_files",
        "pair_a": "pair_a",
        "pair_b_re": "pair_b_re",
        "pair_b_im": "pair_b_im",
        "delta_min": "delta_over_lambda_min",
        "delta_max": "delta_over_lambda_max",
        "delta_points": "delta_points",
        "clamp_rate": "clamp_rate",
        "grid_points": "grid_points",
        "cp_tol": "cp_tol",
        "generator_file": "generator_file",
    }
    provided = set(file_cfg)
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            raw[key] = str(value)
            provided.add(key)

    if "output" not in raw:
        raise ConfigError("no output path given (key 'output' or flag --output)")
    output = raw["output"]
    out_dir = os.environ.get(OUTPUT_DIR_ENV)
    if out_dir:
        output = os.path.join(out_dir, os.path.basename(output))
    fmt = raw["format"]
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}; expected csv or json")

    cfg = RunConfig(
        model=model,
        horizon=_to_float(horizon_key, raw[horizon_key]),
        step=_to_float(step_key, raw[step_key]),
        n_pairs=_to_int("n_pairs", raw["n_pairs"]),
        seed=_to_int("seed", raw["seed"]),
        output=output,
        format=fmt,
        threshold=(
            _to_float("sigma_threshold", raw["sigma_threshold"])
            if "sigma_threshold" in raw
            else None
        ),
        raw=raw,
        provided=provided,
    )
    if cfg.horizon <= 0 or cfg.step <= 0:
        raise ConfigError("horizon and step must be positive")
    if cfg.n_pairs < 1:
        raise ConfigError("n_pairs must be >= 1")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")
    return cfg


def load_custom_generator(path):
    """Constant generator from a JSON file.

    Schema: {"dim": d, "hamiltonian": {"re": [[..]], "im": [[..]]},
    "channels": [{"operator": {"re": .., "im": ..}, "rate": r}, ...]}.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read generator file {path}: {exc}")

    def matrix(node, what):
        try:
            return np.asarray(node["re"], dtype=float) + 1j * np.asarray(
                node["im"], dtype=float
            )
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"{path}: malformed {what} matrix")

    try:
        ham = matrix(data["hamiltonian"], "hamiltonian")
        channels = [
            (matrix(ch["operator"], "channel operator"), float(ch["rate"]))
            for ch in data["channels"]
        ]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: missing field {exc}")
    gen = constant_generator(ham, channels)
    if "dim" in data and int(data["dim"]) != gen.dim:
        raise ConfigError(f"{path}: declared dim {data['dim']} != matrix dim {gen.dim}")
    return gen


def build_generator(cfg):
    if cfg.model == "jc":
        params = models.JCParams(
            gamma0=cfg.get_float("gamma0_over_lambda"),
            lam=1.0,
            delta=cfg.get_float("delta_over_lambda"),
        )
        return models.jc_generator(params, nonnegative_rate=cfg.get_bool("clamp_rate"))
    if cfg.model == "semigroup":
        return models.semigroup_generator(1.0)
    if cfg.model == "custom-file":
        if "generator_file" not in cfg.raw:
            raise ConfigError("model custom-file needs key generator_file")
        return load_custom_generator(cfg.get("generator_file"))
    raise ConfigError(f"model {cfg.model!r} has no master-equation generator")


def resolve_pair(cfg):
    """Initial pair from a canonical name, Bloch vectors, or state files."""
    if "pair_bloch" in cfg.raw and cfg.raw.get("pair_bloch"):
        spec = cfg.get("pair_bloch")
        halves = spec.split(";")
        if len(halves) != 2:
            raise ConfigError(f"pair_bloch needs 'x,y,z;x,y,z', got {spec!r}")
        states = []
        for half in halves:
            comps = half.split(",")
            if len(comps) != 3:
                raise ConfigError(f"pair_bloch needs 'x,y,z;x,y,z', got {spec!r}")
            try:
                states.append(qubit_from_bloch(*(float(c) for c in comps)))
            except ValueError as exc:
                raise ConfigError(f"pair_bloch: {exc}")
        return StatePair(states[0], states[1], label="bloch")
    if "pair_files" in cfg.raw and cfg.raw.get("pair_files"):
        paths = cfg.get("pair_files").split(";")
        if len(paths) != 2:
            raise ConfigError("pair_files needs two ';'-separated paths")
        try:
            rho1, rho2 = (load_state(p.strip()) for p in paths)
        except ValueError as exc:
            raise ConfigError(str(exc))
        return StatePair(rho1, rho2, label="files")
    name = cfg.get("pair")
    if name == "z":
        return canonical_pairs(2)[0]
    if name == "x":
        return canonical_pairs(2)[1]
    raise ConfigError(f"unknown pair {name!r}; expected z, x, pair_bloch or pair_files")


def spinbath_pair_difference(cfg):
    a = cfg.get_float("pair_a")
    b = complex(cfg.get_float("pair_b_re"), cfg.get_float("pair_b_im"))
    if a * a + abs(b) ** 2 > 1.0 + 1e-12:
        raise ConfigError(f"pair differences a={a}, |b|={abs(b)} exceed valid states")
    return a, b


def format_number(x):
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.17g}" if isinstance(x, float) else str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(x) for x in row])


def write_json(path, payload):
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def read_csv_grid(path):
    """Read back a CSV written by this tool: (header, list of row lists).

    Numeric fields become floats (17 significant digits round-trip binary64
    exactly); other fields stay strings.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for row in reader:
            parsed = []
            for cell in row:
                try:
                    parsed.append(float(cell))
                except ValueError:
                    parsed.append(cell)
            rows.append(parsed)
    return header, rows


def write_table(cfg, header, rows, json_key):
    if cfg.format == "csv":
        write_csv(cfg.output, header, rows)
    else:
        records = [dict(zip(header, row)) for row in rows]
        write_json(cfg.output, {json_key: records})


def cmd_rate(cfg):
    """Columns t, gamma(t); with a detuning range, one block of rows per delta."""
    time_col = TIME_COLUMN[cfg.model]
    times = make_time_grid(cfg.horizon, cfg.step)
    if cfg.model == "jc":
        range_keys = {"delta_over_lambda_min", "delta_over_lambda_max", "delta_points"}
        if cfg.provided & range_keys:
            deltas = np.linspace(
                cfg.get_float("delta_over_lambda_min"),
                cfg.get_float("delta_over_lambda_max"),
                cfg.get_int("delta_points"),
            )
        else:
            deltas = [cfg.get_float("delta_over_lambda")]
        gamma0 = cfg.get_float("gamma0_over_lambda")
        rows = []
        for delta in deltas:
            params = models.JCParams(gamma0=gamma0, lam=1.0, delta=float(delta))
            gammas = models.jc_rate(params, times)
            rows.extend(
                [float(delta), float(t), float(g), ""]
                for t, g in zip(times, gammas)
            )
        write_table(
            cfg, ["delta_over_lambda", time_col, "gamma_over_lambda", "flag"], rows, "rate"
        )
        return 0
    if cfg.model == "spinbath":
        params = models.SpinBathParams(coupling_a=1.0, n_spins=cfg.get_int("n_spins"))
        rows = []
        for t in times:
            if models.spinbath_pole_distance(params, t) <= models.POLE_TOL:
                rows.append([float(t), float("nan"), "pole"])
            else:
                rows.append([float(t), float(models.spinbath_rate(params, t)), ""])
        write_table(cfg, [time_col, "gamma_over_a", "flag"], rows, "rate")
        return 0
    if cfg.model == "semigroup":
        rows = [[float(t), 1.0, ""] for t in times]
        write_table(cfg, [time_col, "gamma_over_gamma0", "flag"], rows, "rate")
        return 0
    raise ConfigError(f"model {cfg.model!r} does not support an analytic rate")


def _spinbath_trajectory(cfg):
    params = models.SpinBathParams(coupling_a=1.0, n_spins=cfg.get_int("n_spins"))
    a, b = spinbath_pair_difference(cfg)
    times = make_time_grid(cfg.horizon, cfg.step)
    d_values = models.spinbath_trace_distance(params, a, b, times)
    return trajectory_from_values(times, d_values)


def cmd_trajectory(cfg):
    """Columns t, D, sigma for one initial pair."""
    if cfg.model == "spinbath":
        traj = _spinbath_trajectory(cfg)
    else:
        gen = build_generator(cfg)
        pair = resolve_pair(cfg)
        traj = trajectory(gen, pair, cfg.horizon, cfg.step)
    time_col = TIME_COLUMN[cfg.model]
    rows = [
        [float(t), float(d), float(s)]
        for t, d, s in zip(traj.times, traj.d_values, traj.sigma_values)
    ]
    write_table(cfg, [time_col, "trace_distance", "sigma"], rows, "trajectory")
    return 0


def _pair_report(pair):
    if pair.rho1.dim == 2:
        return {
            "label": pair.label,
            "rho1_bloch": list(bloch_from_qubit(pair.rho1)),
            "rho2_bloch": list(bloch_from_qubit(pair.rho2)),
        }
    return {"label": pair.label, "dim": pair.rho1.dim}


def _measure_payload(result, extra):
    payload = {
        "n_value": result.n_value,
        "horizon": result.horizon,
        "intervals": [
            {"a": iv.a, "b": iv.b, "contribution": iv.contribution}
            for iv in result.intervals
        ],
        "best_pair": _pair_report(result.best_pair),
        "samples_evaluated": result.samples_evaluated,
        "seed": result.seed,
        "diverging": result.diverging,
    }
    payload.update(extra)
    return payload


def cmd_measure(cfg):
    """Structured report: truncated measure value, intervals, best pair."""
    if cfg.model == "spinbath":
        traj = _spinbath_trajectory(cfg)
        a, b = spinbath_pair_difference(cfg)
        # Representative pair whose entrywise difference is [[a, b], [b~, -a]].
        half_diff = 0.5 * np.array([[a, b], [np.conj(b), -a]], dtype=complex)
        rho1 = DensityMatrix(0.5 * np.eye(2, dtype=complex) + half_diff)
        rho2 = DensityMatrix(0.5 * np.eye(2, dtype=complex) - half_diff)
        pair = StatePair(rho1, rho2, label=f"spinbath a={a} b={b}")
        result = n_from_trajectory(traj, pair, threshold=cfg.threshold)
        result.seed = cfg.seed
        payload = _measure_payload(result, {"model": cfg.model})
    else:
        gen = build_generator(cfg)
        search = search_pairs(
            gen, cfg.n_pairs, cfg.horizon, cfg.step, threshold=cfg.threshold, seed=cfg.seed
        )
        payload = _measure_payload(
            search.best,
            {
                "model": cfg.model,
                "n_canonical_pair": search.n_canonical,
                "n_sampled_max": search.n_sampled_max,
                "failures": search.failures,
            },
        )
    if cfg.format == "csv":
        header = ["a", "b", "contribution"]
        rows = [[iv["a"], iv["b"], iv["contribution"]] for iv in payload["intervals"]]
        rows.append(["n_value", payload["n_value"], ""])
        write_csv(cfg.output, header, rows)
    else:
        write_json(cfg.output, payload)
    return 0


def cmd_sweep(cfg):
    """Columns delta, N_sampled_max, N_canonical_pair across a detuning grid."""
    if cfg.model != "jc":
        raise ConfigError("sweep is defined for the jc model only")
    deltas = np.linspace(
        cfg.get_float("delta_over_lambda_min"),
        cfg.get_float("delta_over_lambda_max"),
        cfg.get_int("delta_points"),
    )
    gamma0 = cfg.get_float("gamma0_over_lambda")
    clamp = cfg.get_bool("clamp_rate")
    family = lambda delta: models.jc_generator(
        models.JCParams(gamma0=gamma0, lam=1.0, delta=float(delta)),
        nonnegative_rate=clamp,
    )
    settings = MeasureSettings(
        horizon=cfg.horizon,
        step=cfg.step,
        n_pairs=cfg.n_pairs,
        threshold=cfg.threshold,
        seed=cfg.seed,
    )
    records = sweep(family, deltas, settings)
    rows = [
        [
            rec.parameter,
            rec.n_sampled_max,
            rec.n_canonical,
            rec.n_value,
            rec.best_pair_label or "",
            rec.error or "",
        ]
        for rec in records
    ]
    write_table(
        cfg,
        [
            "delta_over_lambda",
            "n_sampled_max",
            "n_canonical_pair",
            "n_value",
            "best_pair",
            "error",
        ],
        rows,
        "sweep",
    )
    if all(rec.error for rec in records):
        raise NumericalError("every sweep point failed; first: " + records[0].error)
    return 0


def cmd_divisibility(cfg):
    """Per-interval CP verdicts with least Choi eigenvalues."""
    gen = build_generator(cfg)
    n_intervals = cfg.get_int("grid_points")
    if n_intervals < 1:
        raise ConfigError("grid_points must be >= 1")
    grid = np.linspace(0.0, cfg.horizon, n_intervals + 1)
    report = divisibility_report(
        gen, grid, tol=cfg.get_float("cp_tol"), h=cfg.step
    )
    rows = [
        [v.t_start, v.t_end, "true" if v.is_cp else "false", v.least_choi_eigenvalue]
        for v in report.intervals
    ]
    if cfg.format == "csv":
        write_csv(
            cfg.output, ["t_start", "t_end", "is_cp", "least_choi_eigenvalue"], rows
        )
    else:
        write_json(
            cfg.output,
            {
                "divisible": report.divisible,
                "intervals": [
                    {
                        "t_start": v.t_start,
                        "t_end": v.t_end,
                        "is_cp": v.is_cp,
                        "least_choi_eigenvalue": v.least_choi_eigenvalue,
                    }
                    for v in report.intervals
                ],
            },
        )
    return 0


COMMANDS = {
    "rate": cmd_rate,
    "trajectory": cmd_trajectory,
    "measure": cmd_measure,
    "sweep": cmd_sweep,
    "divisibility": cmd_divisibility,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nmflow",
        description="Open-system dynamics and the trace-distance non-Markovianity measure",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--model", choices=sorted(MODEL_KEYS))
        p.add_argument("--output", help="output file path")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--seed", type=int)
        p.add_argument("--n-pairs", dest="n_pairs", type=int)
        p.add_argument("--horizon", type=float, help="in the model's reduced time unit")
        p.add_argument("--step", type=float, help="in the model's reduced time unit")
        p.add_argument("--sigma-threshold", dest="sigma_threshold", type=float)
        p.add_argument("--delta", type=float, help="jc detuning in units of lambda")
        p.add_argument("--gamma0", type=float, help="jc coupling in units of lambda")
        p.add_argument("--clamp-rate", dest="clamp_rate", action="store_const",
                       const="true", help="clamp the jc rate at zero")
        p.add_argument("--n-spins", dest="n_spins", type=int)
        p.add_argument("--pair", choices=["z", "x"])
        p.add_argument("--pair-bloch", dest="pair_bloch", help="'x,y,z;x,y,z'")
        p.add_argument("--pair-files", dest="pair_files", help="'file1;file2'")
        p.add_argument("--pair-a", dest="pair_a", type=float)
        p.add_argument("--pair-b-re", dest="pair_b_re", type=float)
        p.add_argument("--pair-b-im", dest="pair_b_im", type=float)
        p.add_argument("--delta-min", dest="delta_min", type=float)
        p.add_argument("--delta-max", dest="delta_max", type=float)
        p.add_argument("--delta-points", dest="delta_points", type=int)
        p.add_argument("--grid-points", dest="grid_points", type=int)
        p.add_argument("--cp-tol", dest="cp_tol", type=float)
        p.add_argument("--generator-file", dest="generator_file")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args, args.command)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ValueError) as exc:
        print(f"nmflow: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"nmflow: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
