import math

import numpy as np
import pytest

from alp.errors import ConfigurationError
from alp.geo import CellGrid, GeoPoint, from_local_plane
from alp.lppm import LppmConfig, ParameterDomain, default_domains
from alp.metrics import Evaluator, PoiClusteringParams, register_evaluator
from alp.optimizer import (
    AnnealingSchedule,
    AnnealingTuner,
    Objective,
    ObjectiveCost,
    acceptance_probability,
    anneal,
    cost,
    default_objectives,
    initial_state,
    neighbour,
    parse_objective,
    parse_objectives,
    restrict_by_half,
)
from alp.rng import RandomStream

from conftest import make_trace, random_walk_trace

DOMAIN_1_5 = ParameterDomain("a", (1.0, 2.0, 3.0, 4.0, 5.0))
DOMAIN_101 = ParameterDomain("x", tuple(float(v) for v in range(101)))


class _ConstantEvaluator(Evaluator):
    name = "constant"

    def __init__(self, value):
        self.value = value

    def bind(self, raw):
        return lambda protected: self.value


def register_constant(name, value):
    register_evaluator(name, lambda poi_params, cell_grid: _ConstantEvaluator(value))


class TestObjectiveParsing:
    def test_grammar(self):
        objectives = parse_objectives("min:pois,min:distortion:scale=500")
        assert objectives == [Objective("pois", True, 1.0), Objective("distortion", True, 500.0)]

    def test_max_direction(self):
        assert parse_objective("max:coverage") == Objective("coverage", False, 1.0)

    @pytest.mark.parametrize("text", ["pois", "min:", "shrink:pois", "min:pois:scale=x"])
    def test_rejects_bad_specs(self, text):
        with pytest.raises(ConfigurationError):
            parse_objective(text)

    def test_defaults_per_mechanism(self):
        assert default_objectives("geo-i") == parse_objectives("min:pois,min:distortion:scale=500")
        assert default_objectives("promesse") == parse_objectives("min:pois,max:coverage")


class TestCost:
    TRACE = make_trace([(45.0, 5.0), (45.0, 5.01)])
    STATE = LppmConfig("promesse", {"alpha": 100.0})

    def test_minimise_branch(self):
        register_constant("const02", 0.2)
        value = cost(self.STATE, [Objective("const02", True, 1.0)], self.TRACE,
                     RandomStream(0), robust_k=1)
        assert value == pytest.approx(0.2)

    def test_maximise_branch(self):
        register_constant("const075", 0.75)
        value = cost(self.STATE, [Objective("const075", False, 1.0)], self.TRACE,
                     RandomStream(0), robust_k=1)
        assert value == pytest.approx(0.25)

    def test_scale_clamps(self):
        register_constant("const700", 700.0)
        value = cost(self.STATE, [Objective("const700", True, 500.0)], self.TRACE,
                     RandomStream(0), robust_k=1)
        assert value == 1.0

    def test_bounded_by_objective_count(self):
        register_constant("huge", 1e9)
        objectives = [Objective("huge", True, 1.0), Objective("huge", False, 1.0)]
        value = cost(self.STATE, objectives, self.TRACE, RandomStream(0), robust_k=1)
        assert 0.0 <= value <= len(objectives)

    def test_unregistered_evaluator(self):
        with pytest.raises(ConfigurationError):
            cost(self.STATE, [Objective("missing-evaluator", True)], self.TRACE,
                 RandomStream(0), robust_k=1)

    def test_requires_objectives(self):
        with pytest.raises(ConfigurationError):
            ObjectiveCost([], self.TRACE, robust_k=1)


class TestAcceptanceProbability:
    def test_improvement_always_accepted(self):
        assert acceptance_probability(0.5, 0.3, 1.0, 1) == 1.0
        assert acceptance_probability(0.5, 0.3, 1e-5, 3) == 1.0

    def test_equal_costs_give_half(self):
        for t in (1.0, 0.1, 1e-5):
            assert acceptance_probability(0.4, 0.4, t, 2) == 0.5

    def test_tabulated_value(self):
        assert acceptance_probability(0.0, 1.0, 1.0, 2) == \
            pytest.approx(1.0 / (1.0 + math.e), abs=1e-5)

    def test_monotone_in_cost_gap(self):
        probs = [acceptance_probability(0.0, c2, 0.5, 1) for c2 in np.linspace(0, 2, 30)]
        assert all(b <= a for a, b in zip(probs, probs[1:]))

    def test_monotone_in_temperature_for_worse_moves(self):
        probs = [acceptance_probability(0.0, 0.5, t, 1) for t in (1.0, 0.5, 0.1, 0.01, 1e-5)]
        assert all(b <= a for a, b in zip(probs, probs[1:]))
        assert probs[-1] == 0.0  # numerically frozen

    def test_validates_arguments(self):
        with pytest.raises(ValueError):
            acceptance_probability(0, 1, 0.0, 1)
        with pytest.raises(ValueError):
            acceptance_probability(0, 1, 1.0, 0)


class TestInitialState:
    def test_singleton_domains(self):
        domains = [ParameterDomain("a", (3.0,)), ParameterDomain("b", (7.0,))]
        state = initial_state("geo-i", domains, RandomStream(0))
        assert state.assignment == {"a": 3.0, "b": 7.0}

    def test_seeded_regression(self):
        state = initial_state("geo-i", default_domains("geo-i"), RandomStream(123, "init"))
        assert state.assignment["epsilon"] == pytest.approx(0.0022908676527677724, rel=1e-15)

    def test_draws_stay_in_domains(self):
        domains = [DOMAIN_1_5, DOMAIN_101]
        for seed in range(1000):
            state = initial_state("geo-i", domains, RandomStream(seed))
            assert state.assignment["a"] in DOMAIN_1_5.values
            assert state.assignment["x"] in DOMAIN_101.values

    def test_empty_domains_rejected(self):
        with pytest.raises(ConfigurationError):
            initial_state("geo-i", [], RandomStream(0))


class TestRestrictByHalf:
    def test_worked_example(self):
        assert restrict_by_half(DOMAIN_1_5, 2.0) == [1.0, 3.0]

    def test_left_clip(self):
        assert restrict_by_half(DOMAIN_1_5, 1.0) == [2.0]

    def test_singleton_fallback(self):
        assert restrict_by_half(ParameterDomain("a", (7.0,)), 7.0) == [7.0]

    def test_value_must_be_in_domain(self):
        with pytest.raises(ValueError):
            restrict_by_half(DOMAIN_1_5, 2.5)

    def test_window_properties(self, gen):
        h = max(1, len(DOMAIN_101) // 4)
        for _ in range(200):
            current = float(gen.integers(0, 101))
            candidates = restrict_by_half(DOMAIN_101, current)
            assert current not in candidates
            assert 1 <= len(candidates) <= 2 * h
            assert set(candidates) <= set(DOMAIN_101.values)


class TestNeighbour:
    def test_single_parameter_window(self):
        state = LppmConfig("geo-i", {"a": 2.0})
        for seed in range(50):
            nxt = neighbour(state, [DOMAIN_1_5], RandomStream(seed))
            assert nxt.assignment["a"] in (1.0, 3.0)

    def test_singleton_domain_keeps_state(self):
        domain = ParameterDomain("a", (7.0,))
        state = LppmConfig("geo-i", {"a": 7.0})
        assert neighbour(state, [domain], RandomStream(0)) == state

    def test_changes_exactly_one_coordinate(self):
        domains = [DOMAIN_1_5, DOMAIN_101]
        state = LppmConfig("geo-i", {"a": 3.0, "x": 50.0})
        for seed in range(1000):
            nxt = neighbour(state, domains, RandomStream(seed))
            changed = sum(nxt.assignment[k] != state.assignment[k] for k in ("a", "x"))
            assert changed == 1


def surrogate_cost(x_star):
    def cost_fn(state, rng):
        return abs(state.assignment["x"] - x_star) / len(DOMAIN_101)
    return cost_fn


class TestAnneal:
    def test_default_schedule_runs_110_iterations(self):
        schedule = AnnealingSchedule()
        assert schedule.n_iterations == 110
        result = anneal("geo-i", [DOMAIN_101], surrogate_cost(73.0), schedule, RandomStream(1))
        assert result.iterations == 110
        assert len(result.cost_trace) == 110

    def test_singleton_space(self):
        domain = ParameterDomain("x", (4.0,))
        result = anneal("geo-i", [domain], surrogate_cost(4.0), AnnealingSchedule(), RandomStream(0))
        assert result.best_state == result.final_state
        assert result.best_state.assignment == {"x": 4.0}

    def test_best_cost_bounds(self):
        result = anneal("geo-i", [DOMAIN_101], surrogate_cost(30.0),
                        AnnealingSchedule(), RandomStream(5))
        assert result.best_cost <= result.final_cost
        assert result.best_cost <= result.cost_trace[0][1]
        assert result.best_cost <= min(c for _, c in result.cost_trace)

    def test_finds_exact_optimum_in_most_seeded_runs(self):
        # Long-run exact-hit rate is ~0.88 per run on this surrogate; the
        # fixed block below lands 19/20.
        x_star = 73.0
        exhaustive = min(DOMAIN_101.values, key=lambda v: abs(v - x_star))
        assert exhaustive == x_star
        wins = 0
        for seed in range(20):
            result = anneal("geo-i", [DOMAIN_101], surrogate_cost(x_star),
                            AnnealingSchedule(), RandomStream(seed, "surrogate"))
            wins += result.best_state.assignment["x"] == x_star
        assert wins >= 18

    def test_pure_function_of_seed(self):
        a = anneal("geo-i", [DOMAIN_101], surrogate_cost(12.0), AnnealingSchedule(), RandomStream(9))
        b = anneal("geo-i", [DOMAIN_101], surrogate_cost(12.0), AnnealingSchedule(), RandomStream(9))
        assert a == b

    def test_schedule_validation(self):
        with pytest.raises(ConfigurationError):
            AnnealingSchedule(t0=1.0, t_min=2.0)
        with pytest.raises(ConfigurationError):
            AnnealingSchedule(delta_t=1.0)


class TestAnnealingTuner:
    def test_fit_exposes_search_outcome(self, gen):
        trace = random_walk_trace(gen, n=60, step_sd_m=80.0)
        tuner = AnnealingTuner("promesse", cell_grid=CellGrid(250, 45.0), random_state=3)
        tuner.fit(trace)
        assert set(tuner.best_params_) == {"alpha"}
        assert tuner.n_iter_ == 110
        assert tuner.best_cost_ <= 2.0
        protected = tuner.transform(trace)
        assert protected.user == trace.user

    def test_transform_requires_fit(self, gen):
        tuner = AnnealingTuner("promesse")
        with pytest.raises(RuntimeError):
            tuner.transform(random_walk_trace(gen, n=10))

    def test_get_params_round_trip(self):
        tuner = AnnealingTuner("geo-i", robust_k=1)
        params = tuner.get_params()
        assert params["lppm_name"] == "geo-i"
        assert params["robust_k"] == 1
