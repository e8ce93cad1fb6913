"""Run orchestration: offline per-user tuning, online per-day tuning, reports.

The offline scenario tunes one configuration per user on their concatenated
trace. The online scenario splits each user's records into UTC daily
batches and tunes (or, for static baselines, fixes) a configuration per
batch. Both produce a :class:`Report` of per-unit rows plus CDF summaries,
and both are deterministic functions of (dataset, config) regardless of
worker count: every work item derives its randomness from (seed, user, day).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from typing import Sequence

from .errors import ConfigurationError
from .geo import CellGrid, Dataset, Trace, utc_day
from .lppm import LppmConfig, apply_lppm, default_domains, get_mechanism_class, make_mechanism
from .metrics import EVALUATOR_NAMES, PoiClusteringParams, default_robust_k, make_evaluator
from .optimizer import AnnealingSchedule, ObjectiveCost, anneal, default_objectives
from .rng import RandomStream

MODES = ("offline", "online", "static-baseline")


@dataclass(frozen=True)
class Batch:
    """One user's records within one UTC calendar day."""

    user: str
    day: date
    trace: Trace


def split_daily_batches(trace: Trace) -> list:
    """Partition a trace by UTC day (half-open: midnight starts the new day)."""
    batches = []
    current_day = None
    bucket: list = []
    for record in trace:
        day = utc_day(record.time_ms)
        if day != current_day:
            if bucket:
                batches.append(Batch(trace.user, current_day, Trace(trace.user, tuple(bucket))))
            current_day = day
            bucket = []
        bucket.append(record)
    if bucket:
        batches.append(Batch(trace.user, current_day, Trace(trace.user, tuple(bucket))))
    return batches


def cdf_points(values) -> list:
    """Empirical CDF as (value, fraction of inputs <= value) over unique values."""
    values = sorted(values)
    n = len(values)
    if n == 0:
        return []
    points = []
    for i, v in enumerate(values):
        if i + 1 == n or values[i + 1] != v:
            points.append((v, (i + 1) / n))
    return points


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs besides the dataset itself."""

    lppm_name: str
    mode: str = "offline"
    domains: tuple | None = None
    static_assignment: dict | None = None
    objectives: tuple | None = None
    schedule: AnnealingSchedule = field(default_factory=AnnealingSchedule)
    poi_params: PoiClusteringParams = field(default_factory=PoiClusteringParams)
    cell_size_m: float = 250.0
    seed: int = 42
    robust_k: int | None = None
    use_best: bool = True
    workers: int | None = None

    def __post_init__(self):
        get_mechanism_class(self.lppm_name)
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "static-baseline":
            if self.static_assignment is None:
                raise ConfigurationError("static-baseline mode requires a full parameter assignment")
            make_mechanism(LppmConfig(self.lppm_name, self.static_assignment))
        elif self.static_assignment is not None:
            raise ConfigurationError(f"{self.mode} mode searches domains; drop the static assignment")

    def resolved_domains(self) -> list:
        return list(self.domains) if self.domains is not None else default_domains(self.lppm_name)

    def resolved_objectives(self) -> list:
        return list(self.objectives) if self.objectives is not None else default_objectives(self.lppm_name)

    def resolved_robust_k(self) -> int:
        return self.robust_k if self.robust_k is not None else default_robust_k(self.lppm_name)

    def describe(self) -> dict:
        """JSON-ready snapshot recorded in every report."""
        return {
            "lppm": self.lppm_name,
            "mode": self.mode,
            "domains": [
                {"name": d.name, "spacing": d.spacing,
                 "min": d.values[0], "max": d.values[-1], "count": len(d)}
                for d in (self.resolved_domains() if self.mode != "static-baseline" else [])
            ],
            "static_assignment": self.static_assignment,
            "objectives": [
                {"evaluator": o.evaluator_name, "direction": "min" if o.minimise else "max",
                 "scale": o.scale}
                for o in self.resolved_objectives()
            ],
            "schedule": {"t0": self.schedule.t0, "t_min": self.schedule.t_min,
                         "delta_t": self.schedule.delta_t},
            "poi_params": {"max_diameter_m": self.poi_params.max_diameter_m,
                           "min_stay_ms": self.poi_params.min_stay_ms,
                           "match_threshold_m": self.poi_params.match_threshold_m},
            "cell_size_m": self.cell_size_m,
            "seed": self.seed,
            "robust_k": self.resolved_robust_k(),
            "use_best": self.use_best,
        }


@dataclass(frozen=True)
class ReportRow:
    """Outcome for one protected unit (a user, or a user-day batch)."""

    user: str
    day: date | None
    config: LppmConfig
    metrics: dict
    cost: float


@dataclass(frozen=True)
class Report:
    """Per-unit rows, summary CDF series, and the protected dataset."""

    rows: tuple
    run_config: dict
    cdf: dict
    param_cdf: dict
    per_user_param_range: dict
    protected: Dataset

    def summary_payload(self, rows_file: str = "") -> dict:
        return {
            "run_config": self.run_config,
            "rows_file": rows_file,
            "cdf": {name: [[v, f] for v, f in series] for name, series in self.cdf.items()},
            "param_cdf": {name: [[v, f] for v, f in series] for name, series in self.param_cdf.items()},
            "per_user_param_range": self.per_user_param_range,
        }


def _summaries(rows: Sequence[ReportRow]):
    cdf = {
        name: cdf_points([row.metrics[name] for row in rows])
        for name in EVALUATOR_NAMES
    }
    param_names = sorted({name for row in rows for name in row.config.assignment})
    param_cdf = {
        name: cdf_points([row.config.assignment[name] for row in rows
                          if name in row.config.assignment])
        for name in param_names
    }
    ranges: dict = {}
    for name in param_names:
        per_user: dict = {}
        for row in rows:
            if name in row.config.assignment:
                per_user.setdefault(row.user, []).append(row.config.assignment[name])
        ranges[name] = {user: max(vs) - min(vs) for user, vs in sorted(per_user.items())}
    return cdf, param_cdf, ranges


def _evaluate_all(raw: Trace, protected: Trace, poi_params: PoiClusteringParams,
                  grid: CellGrid) -> dict:
    return {
        name: make_evaluator(name, poi_params=poi_params, cell_grid=grid)(raw, protected)
        for name in EVALUATOR_NAMES
    }


def _process_unit(unit_key, raw: Trace, config: RunConfig, grid: CellGrid):
    """Tune (or fix) a configuration for one unit, protect it, measure it."""
    user, day = unit_key
    day_label = day.isoformat() if day is not None else "offline"
    root = RandomStream(config.seed).child(user, day_label)

    objectives = config.resolved_objectives()
    if config.mode == "static-baseline":
        chosen = LppmConfig(config.lppm_name, config.static_assignment)
        cost_fn = ObjectiveCost(objectives, raw, poi_params=config.poi_params,
                                cell_grid=grid, robust_k=config.resolved_robust_k())
        cost = cost_fn(chosen, root.child("cost"))
    else:
        cost_fn = ObjectiveCost(objectives, raw, poi_params=config.poi_params,
                                cell_grid=grid, robust_k=config.resolved_robust_k())
        result = anneal(config.lppm_name, config.resolved_domains(), cost_fn,
                        config.schedule, root.child("anneal"), n_objectives=len(objectives))
        chosen = result.chosen(config.use_best)
        cost = result.best_cost if config.use_best else result.final_cost

    protected = apply_lppm(chosen, raw, root.child("protect"))
    metrics = _evaluate_all(raw, protected, config.poi_params, grid)
    return ReportRow(user, day, chosen, metrics, cost), protected


def _run_units(units, config: RunConfig, grid: CellGrid) -> Report:
    """Fan work items out to threads and reassemble in deterministic order."""
    workers = config.workers or 1

    def work(item):
        key, raw = item
        return key, _process_unit(key, raw, config, grid)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = dict(pool.map(work, units))
    else:
        outcomes = dict(work(item) for item in units)

    keys = sorted(outcomes, key=lambda k: (k[0], k[1].isoformat() if k[1] else ""))
    rows = tuple(outcomes[k][0] for k in keys)
    protected = Dataset(tuple(outcomes[k][1] for k in keys))
    cdf, param_cdf, ranges = _summaries(rows)
    return Report(rows, config.describe(), cdf, param_cdf, ranges, protected)


def run_offline(dataset: Dataset, config: RunConfig) -> Report:
    """One tuned configuration per user, fitted on the concatenated trace."""
    if config.mode != "offline":
        raise ConfigurationError(f"run_offline needs mode='offline', got {config.mode!r}")
    grid = CellGrid(config.cell_size_m, dataset.mean_latitude())
    units = [((user, None), trace) for user, trace in dataset.merged_by_user().items()]
    return _run_units(units, config, grid)


def run_online(dataset: Dataset, config: RunConfig) -> Report:
    """One configuration per non-empty (user, UTC day) batch."""
    if config.mode not in ("online", "static-baseline"):
        raise ConfigurationError(f"run_online needs mode 'online' or 'static-baseline', got {config.mode!r}")
    grid = CellGrid(config.cell_size_m, dataset.mean_latitude())
    units = []
    for user, trace in dataset.merged_by_user().items():
        for batch in split_daily_batches(trace):
            units.append(((batch.user, batch.day), batch.trace))
    return _run_units(units, config, grid)


def run(dataset: Dataset, config: RunConfig) -> Report:
    if config.mode == "offline":
        return run_offline(dataset, config)
    return run_online(dataset, config)
