"""Simulated-annealing search over discrete mechanism parameter domains.

The search minimizes a cost that sums one normalized contribution per
objective: each metric value is clamped to its scale, divided by it, and
either taken as-is (minimize) or flipped to 1 - n (maximize). Worse
neighbours are accepted with a logistic probability that tightens as the
temperature cools geometrically.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import ConfigurationError
from .geo import CellGrid, Trace
from .lppm import LppmConfig, ParameterDomain, apply_lppm, default_domains, get_mechanism_class
from .metrics import PoiClusteringParams, default_robust_k, make_evaluator
from .rng import RandomStream, RngLike, as_generator, as_stream


@dataclass(frozen=True)
class Objective:
    """A metric evaluator plus a direction and a normalization scale."""

    evaluator_name: str
    minimise: bool
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ConfigurationError("objective scale must be positive")


_OBJECTIVE_RE = re.compile(r"^(min|max):([a-z_][a-z0-9_-]*)(?::scale=([0-9.eE+-]+))?$")


def parse_objective(text: str) -> Objective:
    """Parse ``<min|max>:<evaluator>[:scale=<real>]``."""
    m = _OBJECTIVE_RE.match(text.strip())
    if not m:
        raise ConfigurationError(f"bad objective spec {text!r} (want min|max:<evaluator>[:scale=<real>])")
    direction, name, scale = m.groups()
    return Objective(name, direction == "min", float(scale) if scale else 1.0)


def parse_objectives(text: str) -> list:
    return [parse_objective(part) for part in text.split(",") if part.strip()]


def default_objectives(lppm_name: str) -> list:
    """Per-mechanism defaults: hide POIs, then preserve the relevant utility."""
    get_mechanism_class(lppm_name)
    if lppm_name == "promesse":
        return parse_objectives("min:pois,max:coverage")
    return parse_objectives("min:pois,min:distortion:scale=500")


@dataclass(frozen=True)
class AnnealingSchedule:
    """Geometric cooling from t0 down to (but excluding) t_min."""

    t0: float = 1.0
    t_min: float = 1e-5
    delta_t: float = 0.9

    def __post_init__(self):
        if not (self.t0 > 0 and self.t_min > 0 and self.t_min < self.t0):
            raise ConfigurationError("need 0 < t_min < t0")
        if not 0.0 < self.delta_t < 1.0:
            raise ConfigurationError("cooling rate must lie in (0, 1)")

    def temperatures(self):
        t = self.t0
        while t >= self.t_min:
            yield t
            t *= self.delta_t

    @property
    def n_iterations(self) -> int:
        return sum(1 for _ in self.temperatures())


@dataclass(frozen=True)
class AnnealResult:
    """Outcome of one annealing run, keeping both final and best-seen states."""

    best_state: LppmConfig
    best_cost: float
    final_state: LppmConfig
    final_cost: float
    iterations: int
    cost_trace: tuple

    def chosen(self, use_best: bool = True) -> LppmConfig:
        return self.best_state if use_best else self.final_state


def acceptance_probability(c: float, c2: float, t: float, n_objectives: int) -> float:
    """Probability of moving from cost c to cost c2 at temperature t.

    Improvements are always accepted; otherwise a logistic in the cost gap,
    normalized by 0.5 * t * n_objectives so multi-objective costs cool on
    the same schedule.
    """
    if t <= 0:
        raise ValueError("temperature must be positive")
    if n_objectives < 1:
        raise ValueError("need at least one objective")
    if c2 < c:
        return 1.0
    exponent = (c2 - c) / (0.5 * t * n_objectives)
    if exponent > 700.0:  # exp would overflow; the probability is ~0
        return 0.0
    return 1.0 / (1.0 + math.exp(exponent))


def initial_state(lppm_name: str, domains: Sequence[ParameterDomain], rng: RngLike) -> LppmConfig:
    """Independent uniform draw over each domain's indices."""
    if not domains:
        raise ConfigurationError("at least one parameter domain is required")
    gen = as_generator(rng)
    assignment = {d.name: d.values[int(gen.integers(len(d)))] for d in domains}
    return LppmConfig(lppm_name, assignment)


def restrict_by_half(domain: ParameterDomain, current: float) -> list:
    """Candidate values around the current one, spanning half the domain.

    With i the index of the current value and h = max(1, |D| // 4), the
    candidates are the indices [i-h, i+h] clipped to the domain bounds and
    excluding i itself; a singleton domain falls back to the current value.
    """
    i = domain.index_of(current)
    h = max(1, len(domain) // 4)
    lo = max(0, i - h)
    hi = min(len(domain) - 1, i + h)
    candidates = [domain.values[j] for j in range(lo, hi + 1) if j != i]
    return candidates if candidates else [domain.values[i]]


def neighbour(state: LppmConfig, domains: Sequence[ParameterDomain], rng: RngLike) -> LppmConfig:
    """Change exactly one uniformly chosen parameter within its halved window."""
    gen = as_generator(rng)
    domain = domains[int(gen.integers(len(domains)))]
    candidates = restrict_by_half(domain, state.assignment[domain.name])
    assignment = dict(state.assignment)
    assignment[domain.name] = candidates[int(gen.integers(len(candidates)))]
    return LppmConfig(state.lppm_name, assignment)


CostFn = Callable[[LppmConfig, RandomStream], float]


def anneal(lppm_name: str, domains: Sequence[ParameterDomain], cost_fn: CostFn,
           schedule: AnnealingSchedule, rng: RngLike, n_objectives: int = 1) -> AnnealResult:
    """Run the annealing loop and return final plus best-seen states.

    The chain (initial draw, neighbour picks, acceptance uniforms) consumes
    one generator; every cost evaluation gets its own labelled sub-stream,
    so results are independent of how the cost function uses randomness.
    """
    stream = as_stream(rng)
    chain = stream.child("chain").generator()

    state = initial_state(lppm_name, domains, chain)
    cost = cost_fn(state, stream.child("eval", 0))
    best_state, best_cost = state, cost

    trace = []
    iterations = 0
    for t in schedule.temperatures():
        candidate = neighbour(state, domains, chain)
        candidate_cost = cost_fn(candidate, stream.child("eval", iterations + 1))
        if candidate_cost < best_cost:
            best_state, best_cost = candidate, candidate_cost
        if acceptance_probability(cost, candidate_cost, t, n_objectives) >= chain.uniform():
            state, cost = candidate, candidate_cost
        trace.append((t, cost))
        iterations += 1

    return AnnealResult(best_state, best_cost, state, cost, iterations, tuple(trace))


class ObjectiveCost:
    """Cost of a mechanism configuration against one reference trace.

    Binds each objective's evaluator to the raw trace once, then sums the
    normalized contributions; every call re-obfuscates the reference, so
    repeated states are re-evaluated rather than cached.
    """

    def __init__(self, objectives: Sequence[Objective], ref: Trace, *,
                 poi_params: PoiClusteringParams | None = None,
                 cell_grid: CellGrid | None = None, robust_k: int = 1):
        if not objectives:
            raise ConfigurationError("at least one objective is required")
        if robust_k < 1 or robust_k % 2 == 0:
            raise ConfigurationError("robust_k must be an odd integer >= 1")
        self.objectives = tuple(objectives)
        self.ref = ref
        self.robust_k = robust_k
        self._bound = {}
        for o in self.objectives:
            if o.evaluator_name not in self._bound:
                evaluator = make_evaluator(o.evaluator_name, poi_params=poi_params, cell_grid=cell_grid)
                self._bound[o.evaluator_name] = evaluator.bind(ref)

    def __len__(self) -> int:
        return len(self.objectives)

    def __call__(self, state: LppmConfig, rng: RngLike) -> float:
        stream = as_stream(rng)
        total = 0.0
        for o in self.objectives:
            bound = self._bound[o.evaluator_name]
            values = []
            for i in range(self.robust_k):
                protected = apply_lppm(state, self.ref, stream.child(o.evaluator_name, "rep", i))
                values.append(bound(protected))
            values.sort()
            v = values[len(values) // 2]
            n = min(v, o.scale) / o.scale
            total += n if o.minimise else (1.0 - n)
        return total


def cost(state: LppmConfig, objectives: Sequence[Objective], ref: Trace, rng: RngLike, *,
         poi_params: PoiClusteringParams | None = None, cell_grid: CellGrid | None = None,
         robust_k: int | None = None) -> float:
    """One-shot objective cost; see :class:`ObjectiveCost` for the hot path."""
    k = robust_k if robust_k is not None else default_robust_k(state.lppm_name)
    return ObjectiveCost(objectives, ref, poi_params=poi_params, cell_grid=cell_grid, robust_k=k)(state, rng)


class AnnealingTuner:
    """Searches a mechanism's parameter domains to fit declared objectives.

    Estimator-style: construct with the search setup, ``fit`` on a reference
    trace, then read ``best_params_`` / ``best_cost_`` or call ``transform``
    to protect traces with the tuned configuration.
    """

    def __init__(self, lppm_name: str = "geo-i", domains: Sequence[ParameterDomain] | None = None,
                 objectives: Sequence[Objective] | None = None,
                 schedule: AnnealingSchedule | None = None,
                 poi_params: PoiClusteringParams | None = None,
                 cell_grid: CellGrid | None = None,
                 robust_k: int | None = None, use_best: bool = True,
                 random_state: RngLike | None = None):
        self.lppm_name = lppm_name
        self.domains = list(domains) if domains is not None else default_domains(lppm_name)
        self.objectives = list(objectives) if objectives is not None else default_objectives(lppm_name)
        self.schedule = schedule or AnnealingSchedule()
        self.poi_params = poi_params or PoiClusteringParams()
        self.cell_grid = cell_grid or CellGrid()
        self.robust_k = robust_k if robust_k is not None else default_robust_k(lppm_name)
        self.use_best = use_best
        self.random_state = random_state

    def get_params(self) -> dict:
        return {
            "lppm_name": self.lppm_name, "domains": self.domains,
            "objectives": self.objectives, "schedule": self.schedule,
            "poi_params": self.poi_params, "cell_grid": self.cell_grid,
            "robust_k": self.robust_k, "use_best": self.use_best,
            "random_state": self.random_state,
        }

    def fit(self, trace: Trace, rng: RngLike | None = None) -> "AnnealingTuner":
        if rng is None:
            rng = self.random_state if self.random_state is not None else RandomStream(0)
        stream = as_stream(rng)
        cost_fn = ObjectiveCost(self.objectives, trace, poi_params=self.poi_params,
                                cell_grid=self.cell_grid, robust_k=self.robust_k)
        result = anneal(self.lppm_name, self.domains, cost_fn, self.schedule,
                        stream, n_objectives=len(self.objectives))
        self.result_ = result
        self.best_config_ = result.chosen(self.use_best)
        self.best_params_ = dict(self.best_config_.assignment)
        self.best_cost_ = result.best_cost if self.use_best else result.final_cost
        self.n_iter_ = result.iterations
        self.cost_trace_ = result.cost_trace
        return self

    def transform(self, trace: Trace, rng: RngLike | None = None) -> Trace:
        if not hasattr(self, "best_config_"):
            raise RuntimeError("tuner is not fitted; call fit() first")
        if rng is None:
            rng = self.random_state if self.random_state is not None else RandomStream(0)
        return apply_lppm(self.best_config_, trace, as_stream(rng).child("transform"))

    def fit_transform(self, trace: Trace, rng: RngLike | None = None) -> Trace:
        if rng is None:
            rng = self.random_state if self.random_state is not None else RandomStream(0)
        stream = as_stream(rng)
        return self.fit(trace, stream.child("fit")).transform(trace, stream.child("protect"))
