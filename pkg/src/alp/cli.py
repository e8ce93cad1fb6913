"""Command-line front end.

Commands:

* ``synth``    - generate a synthetic dataset with planted POIs
* ``evaluate`` - print the metric table for a static configuration
* ``protect``  - write protected traces for a static configuration
* ``optimize`` - offline scenario: tune one configuration per user
* ``online``   - online scenario: tune per daily batch (or run a static
                 baseline when ``--param`` is given)

Flags can also come from a flat ``key = value`` config file (``--config``);
explicit flags win. ``--seed`` falls back to the ``ALP_SEED`` environment
variable, then to 42. Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .errors import AlpError
from .geo import CellGrid, Dataset
from .io import load_dataset, write_dataset_csv, write_json, write_rows_csv
from .lppm import LppmConfig, apply_lppm, mechanism_names
from .metrics import PoiClusteringParams, default_robust_k, evaluate_robust, make_evaluator
from .optimizer import AnnealingSchedule, parse_objectives
from .pipeline import Report, RunConfig, run_offline, run_online
from .rng import RandomStream
from .synth import SynthSpec, generate_synthetic_dataset

COMMANDS = ("synth", "evaluate", "protect", "optimize", "online")


class UsageError(Exception):
    """Bad flag combination detected after parsing; exits with code 2."""


@dataclass
class CliInvocation:
    command: str
    flags: dict
    config_file: str | None = None


def _parse_param_items(items) -> dict:
    assignment = {}
    for item in items:
        for part in str(item).split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise ValueError(f"bad --param {part!r}: want name=value")
            name, value = part.split("=", 1)
            assignment[name.strip()] = float(value)
    return assignment


def _add_common(p: argparse.ArgumentParser, *, needs_input: bool):
    p.add_argument("--config", metavar="FILE", help="flat key=value config file; flags win")
    p.add_argument("--seed", type=int, help="random seed (default: ALP_SEED or 42)")
    if needs_input:
        p.add_argument("--input", metavar="CSV", help="input dataset (user,timestamp,lat,lon)")


def _add_metric_flags(p: argparse.ArgumentParser):
    p.add_argument("--cell-size", type=float, help="area-coverage cell edge in meters (default 250)")
    p.add_argument("--poi-diameter", type=float, help="max POI cluster diameter in meters (default 200)")
    p.add_argument("--poi-stay-minutes", type=float, help="min POI stay time in minutes (default 15)")
    p.add_argument("--match-threshold", type=float, help="POI match threshold in meters (default 100)")
    p.add_argument("--robust-k", type=int, help="median-of-k evaluations (default 3, 1 if deterministic)")


def _add_optimizer_flags(p: argparse.ArgumentParser):
    p.add_argument("--objectives", help="comma list of min|max:<evaluator>[:scale=<v>]")
    p.add_argument("--t0", type=float, help="initial temperature (default 1)")
    p.add_argument("--t-min", type=float, help="final temperature (default 1e-5)")
    p.add_argument("--cooling", type=float, help="cooling rate in (0,1) (default 0.9)")
    # default=None so an unset flag can still be supplied by the config file
    p.add_argument("--final-state", action="store_true", default=None,
                   help="protect with the final annealing state instead of the best-seen one")
    p.add_argument("--workers", type=int, help="max parallel workers (default: machine parallelism)")
    p.add_argument("--out-dir", help="directory for report files (default .)")
    p.add_argument("--name", help="base name for report files (default <command>_<lppm>)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alp",
        description="Obfuscate mobility traces and tune protection mechanisms against privacy/utility objectives.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("synth", help="generate a synthetic dataset with planted POIs")
    _add_common(p, needs_input=False)
    p.add_argument("--users", type=int, help="number of users (default 1)")
    p.add_argument("--days", type=int, help="number of days (default 1)")
    p.add_argument("--pois", type=int, help="POIs per user (default 2)")
    p.add_argument("--dwell-minutes", type=float, help="minimum dwell duration (default 30)")
    p.add_argument("--speed", type=float, help="transit speed in m/s (default 10)")
    p.add_argument("--sample-period", type=float, help="sampling period in seconds (default 30)")
    p.add_argument("--trip", action="store_true", default=None,
                   help="end each day after the itinerary instead of dwelling until midnight")
    p.add_argument("--out", help="output CSV path (default synthetic.csv)")
    p.add_argument("--truth-out", help="optional JSON path for planted POI locations")

    p = sub.add_parser("evaluate", help="print metrics for a static configuration")
    _add_common(p, needs_input=True)
    p.add_argument("--lppm", help=f"mechanism name ({'|'.join(mechanism_names())})")
    p.add_argument("--param", action="append", default=None, metavar="NAME=VALUE",
                   help="parameter assignment; repeatable")
    _add_metric_flags(p)

    p = sub.add_parser("protect", help="write protected traces for a static configuration")
    _add_common(p, needs_input=True)
    p.add_argument("--lppm", help=f"mechanism name ({'|'.join(mechanism_names())})")
    p.add_argument("--param", action="append", default=None, metavar="NAME=VALUE")
    p.add_argument("--out", help="output CSV path (default <input-stem>_protected.csv)")

    p = sub.add_parser("optimize", help="offline scenario: tune one configuration per user")
    _add_common(p, needs_input=True)
    p.add_argument("--lppm", help=f"mechanism name ({'|'.join(mechanism_names())})")
    _add_metric_flags(p)
    _add_optimizer_flags(p)

    p = sub.add_parser("online", help="online scenario: tune per daily batch")
    _add_common(p, needs_input=True)
    p.add_argument("--lppm", help=f"mechanism name ({'|'.join(mechanism_names())})")
    p.add_argument("--param", action="append", default=None, metavar="NAME=VALUE",
                   help="fix the assignment instead of tuning (static baseline)")
    _add_metric_flags(p)
    _add_optimizer_flags(p)

    return parser


def _read_config_file(path: str) -> dict:
    values: dict = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise AlpError(f"{path}:{line_no}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def parse_args(argv) -> CliInvocation:
    parser = build_parser()
    namespace = parser.parse_args(argv)
    flags = {k: v for k, v in vars(namespace).items() if k != "command" and v is not None}

    config_file = flags.pop("config", None)
    if config_file:
        try:
            file_values = _read_config_file(config_file)
        except (OSError, AlpError) as exc:
            parser.error(str(exc))
        for key, raw in file_values.items():
            if key in flags:
                continue  # explicit flags win
            if key == "param":
                flags[key] = [raw]
            elif key in ("seed", "users", "days", "pois", "robust_k", "workers"):
                flags[key] = int(raw)
            elif key in ("cell_size", "poi_diameter", "poi_stay_minutes", "match_threshold",
                         "dwell_minutes", "speed", "sample_period", "t0", "t_min", "cooling"):
                flags[key] = float(raw)
            elif key in ("trip", "final_state"):
                flags[key] = raw.lower() in ("1", "true", "yes", "on")
            else:
                flags[key] = raw

    if "seed" not in flags:
        env_seed = os.environ.get("ALP_SEED")
        flags["seed"] = int(env_seed) if env_seed else 42

    return CliInvocation(namespace.command, flags, config_file)


def _require(inv: CliInvocation, *keys):
    missing = [k for k in keys if not inv.flags.get(k)]
    if missing:
        raise UsageError(f"{inv.command}: missing required flag(s): " +
                         ", ".join("--" + k.replace("_", "-") for k in missing))


def _schedule_from(flags: dict) -> AnnealingSchedule:
    return AnnealingSchedule(
        t0=flags.get("t0", 1.0),
        t_min=flags.get("t_min", 1e-5),
        delta_t=flags.get("cooling", 0.9),
    )


def _poi_params_from(flags: dict) -> PoiClusteringParams:
    return PoiClusteringParams(
        max_diameter_m=flags.get("poi_diameter", 200.0),
        min_stay_ms=int(flags.get("poi_stay_minutes", 15.0) * 60_000),
        match_threshold_m=flags.get("match_threshold", 100.0),
    )


def _static_config(inv: CliInvocation) -> LppmConfig:
    _require(inv, "lppm", "param")
    return LppmConfig(inv.flags["lppm"], _parse_param_items(inv.flags["param"]))


def _run_config(inv: CliInvocation, mode: str) -> RunConfig:
    flags = inv.flags
    objectives = tuple(parse_objectives(flags["objectives"])) if "objectives" in flags else None
    static = None
    if mode != "offline" and flags.get("param"):
        static = _parse_param_items(flags["param"])
        mode = "static-baseline"
    return RunConfig(
        lppm_name=flags["lppm"],
        mode=mode,
        static_assignment=static,
        objectives=objectives,
        schedule=_schedule_from(flags),
        poi_params=_poi_params_from(flags),
        cell_size_m=flags.get("cell_size", 250.0),
        seed=flags["seed"],
        robust_k=flags.get("robust_k"),
        use_best=not flags.get("final_state", False),
        workers=flags.get("workers") or os.cpu_count(),
    )


def _write_report(report: Report, inv: CliInvocation, default_name: str):
    out_dir = Path(inv.flags.get("out_dir", "."))
    name = inv.flags.get("name", default_name)
    rows_path = write_rows_csv(report.rows, out_dir / f"{name}.csv")
    write_json(report.summary_payload(rows_file=f"{name}.csv"), out_dir / f"{name}.json")
    write_dataset_csv(report.protected, out_dir / f"{name}_protected.csv")
    print(f"wrote {rows_path}, {name}.json, {name}_protected.csv in {out_dir}")


def _cmd_synth(inv: CliInvocation) -> int:
    flags = inv.flags
    spec = SynthSpec(
        users=flags.get("users", 1),
        days=flags.get("days", 1),
        pois_per_user=flags.get("pois", 2),
        dwell_minutes=flags.get("dwell_minutes", 30.0),
        speed_mps=flags.get("speed", 10.0),
        sample_period_s=flags.get("sample_period", 30.0),
        seed=flags["seed"],
        pad_to_day_end=not flags.get("trip", False),
    )
    synthetic = generate_synthetic_dataset(spec)
    out = Path(flags.get("out", "synthetic.csv"))
    write_dataset_csv(synthetic.dataset, out)
    if flags.get("truth_out"):
        payload = {
            user: [[p.lat, p.lon] for p in points]
            for user, points in synthetic.true_pois.items()
        }
        write_json(payload, flags["truth_out"])
    print(f"wrote {synthetic.dataset.total_records()} records for "
          f"{len(synthetic.dataset.users())} user(s) to {out}")
    return 0


def _cmd_evaluate(inv: CliInvocation) -> int:
    _require(inv, "input")
    config = _static_config(inv)
    dataset = load_dataset(inv.flags["input"])
    poi_params = _poi_params_from(inv.flags)
    grid = CellGrid(inv.flags.get("cell_size", 250.0), dataset.mean_latitude())
    k = inv.flags.get("robust_k", default_robust_k(config.lppm_name))
    root = RandomStream(inv.flags["seed"])

    print(f"{'user':<12} {'pois':>8} {'distortion_m':>14} {'coverage':>10}")
    for user, trace in dataset.merged_by_user().items():
        values = {}
        for metric in ("pois", "distortion", "coverage"):
            evaluator = make_evaluator(metric, poi_params=poi_params, cell_grid=grid)
            values[metric] = evaluate_robust(evaluator, trace, config, k,
                                             root.child(user, metric))
        print(f"{user:<12} {values['pois']:>8.4f} {values['distortion']:>14.2f} "
              f"{values['coverage']:>10.4f}")
    return 0


def _cmd_protect(inv: CliInvocation) -> int:
    _require(inv, "input")
    config = _static_config(inv)
    dataset = load_dataset(inv.flags["input"])
    root = RandomStream(inv.flags["seed"])
    protected = Dataset(tuple(
        apply_lppm(config, trace, root.child("protect", user))
        for user, trace in dataset.merged_by_user().items()
    ))
    out = inv.flags.get("out")
    if not out:
        stem = Path(inv.flags["input"]).stem
        out = Path(inv.flags["input"]).with_name(f"{stem}_protected.csv")
    write_dataset_csv(protected, out)
    print(f"wrote {protected.total_records()} protected records to {out}")
    return 0


def _cmd_optimize(inv: CliInvocation) -> int:
    _require(inv, "input", "lppm")
    dataset = load_dataset(inv.flags["input"])
    config = _run_config(inv, "offline")
    report = run_offline(dataset, config)
    _write_report(report, inv, f"optimize_{config.lppm_name}")
    return 0


def _cmd_online(inv: CliInvocation) -> int:
    _require(inv, "input", "lppm")
    dataset = load_dataset(inv.flags["input"])
    config = _run_config(inv, "online")
    report = run_online(dataset, config)
    _write_report(report, inv, f"online_{config.lppm_name}")
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "evaluate": _cmd_evaluate,
    "protect": _cmd_protect,
    "optimize": _cmd_optimize,
    "online": _cmd_online,
}


def run(invocation: CliInvocation) -> int:
    """Execute a parsed invocation; returns the process exit code."""
    try:
        return _HANDLERS[invocation.command](invocation)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (AlpError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    invocation = parse_args(argv if argv is not None else sys.argv[1:])
    return run(invocation)


if __name__ == "__main__":
    sys.exit(main())
