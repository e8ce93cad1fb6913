"""Points-of-interest extraction and the privacy/utility metric evaluators.

Three evaluators compare a raw trace against its protected counterpart:

* ``pois``       - F-score of POIs re-extracted from the protected trace,
                   matched to true POIs within a distance threshold (privacy,
                   lower is better for the user).
* ``distortion`` - mean distance from each protected location to the nearest
                   raw location, in meters (utility, lower is better).
* ``coverage``   - F-score over the sets of grid cells touched by the raw
                   and protected traces (utility, higher is better).
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError
from .geo import (
    EARTH_RADIUS_M,
    CellGrid,
    GeoPoint,
    Trace,
    from_local_plane,
    haversine_m,
    local_xy,
    sphere_xyz,
)
from .lppm import LppmConfig, apply_lppm, get_mechanism_class
from .rng import RngLike, as_stream

MIN_STAY_MS_DEFAULT = 15 * 60 * 1000


@dataclass(frozen=True)
class PoiClusteringParams:
    """Knobs of the stay-point extractor and the POI matching threshold."""

    max_diameter_m: float = 200.0
    min_stay_ms: int = MIN_STAY_MS_DEFAULT
    match_threshold_m: float = 100.0

    def __post_init__(self):
        if not (self.max_diameter_m > 0 and self.min_stay_ms > 0 and self.match_threshold_m > 0):
            raise ValueError("clustering parameters must be strictly positive")


@dataclass(frozen=True)
class Poi:
    """A stay cluster reduced to its centroid; time span kept for diagnostics."""

    user: str
    centroid: GeoPoint
    start_ms: int
    end_ms: int
    size: int


def extract_pois(trace: Trace, params: PoiClusteringParams) -> list:
    """Greedy forward-scan spatio-temporal clustering.

    A candidate cluster grows with consecutive records while its diameter
    (max pairwise great-circle distance) stays within the limit. When a
    record breaks the diameter, the cluster becomes a POI if its time span
    reaches the minimum stay, and the scan restarts at the breaking record.
    """
    n = len(trace)
    if n == 0:
        return []

    lat, lon = trace.latlon_arrays()
    phi = np.radians(lat)
    lam = np.radians(lon)
    cos_phi = np.cos(phi)
    times = trace.times_ms
    radius2 = 2.0 * EARTH_RADIUS_M
    max_d = params.max_diameter_m

    pois = []

    def close_cluster(start: int, end: int):
        if times[end] - times[start] < params.min_stay_ms:
            return
        origin = trace.records[start].point
        xs, ys = local_xy(origin, lat[start:end + 1], lon[start:end + 1])
        centroid = from_local_plane(origin, (float(np.mean(xs)), float(np.mean(ys))))
        pois.append(Poi(trace.user, centroid, int(times[start]), int(times[end]), end - start + 1))

    start = 0
    for j in range(1, n):
        sl = slice(start, j)
        a = np.sin((phi[j] - phi[sl]) / 2.0) ** 2 + cos_phi[sl] * cos_phi[j] * np.sin((lam[j] - lam[sl]) / 2.0) ** 2
        reach = radius2 * float(np.arcsin(np.sqrt(np.max(np.clip(a, 0.0, 1.0)))))
        if reach > max_d:
            close_cluster(start, j - 1)
            start = j
    close_cluster(start, n - 1)
    return pois


def _match_count(pois_true: Sequence[Poi], pois_obf: Sequence[Poi], threshold_m: float) -> int:
    """Number of obfuscated POIs lying within the threshold of some true POI."""
    lat_t = np.array([p.centroid.lat for p in pois_true])
    lon_t = np.array([p.centroid.lon for p in pois_true])
    matched = 0
    for p in pois_obf:
        d = haversine_m(p.centroid.lat, p.centroid.lon, lat_t, lon_t)
        if bool(np.any(d <= threshold_m)):
            matched += 1
    return matched


def _f_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def poi_retrieval(pois_true: Sequence[Poi], pois_obf: Sequence[Poi], threshold_m: float) -> float:
    """F-score of POIs recovered from the protected trace, in [0, 1].

    Recall counts protected POIs within the threshold of a true POI over the
    number of true POIs (capped at 1 when several protected POIs hit the
    same true one); precision divides the same count by the number of
    protected POIs. Empty sets score 0.
    """
    if not threshold_m > 0:
        raise ValueError("threshold must be positive")
    if not pois_true or not pois_obf:
        return 0.0
    matched = _match_count(pois_true, pois_obf, threshold_m)
    recall = min(1.0, matched / len(pois_true))
    precision = matched / len(pois_obf)
    return _f_score(precision, recall)


def spatial_distortion(raw_points: Sequence[GeoPoint], protected_points: Sequence[GeoPoint]) -> float:
    """Mean distance from each protected location to the closest raw location.

    An empty protected set distorts nothing and scores 0; an empty raw set
    is a caller error.
    """
    if len(raw_points) == 0:
        raise ValueError("raw location set must be non-empty")
    if len(protected_points) == 0:
        return 0.0
    raw_lat = np.array([p.lat for p in raw_points])
    raw_lon = np.array([p.lon for p in raw_points])
    tree = cKDTree(sphere_xyz(raw_lat, raw_lon))
    return _distortion_against(tree, raw_lat, raw_lon,
                               np.array([p.lat for p in protected_points]),
                               np.array([p.lon for p in protected_points]))


def _distortion_against(tree, raw_lat, raw_lon, prot_lat, prot_lon) -> float:
    # Chord length is monotone in arc length, so the chord nearest neighbour
    # is also the great-circle nearest neighbour; report the haversine value.
    _, idx = tree.query(sphere_xyz(prot_lat, prot_lon))
    d = haversine_m(prot_lat, prot_lon, raw_lat[idx], raw_lon[idx])
    return float(np.mean(d))


def area_coverage(raw_points: Sequence[GeoPoint], protected_points: Sequence[GeoPoint],
                  grid: CellGrid) -> float:
    """F-score over grid cells touched by raw vs protected locations, in [0, 1]."""
    cells_raw = grid.cells_of(np.array([p.lat for p in raw_points]),
                              np.array([p.lon for p in raw_points])) if raw_points else set()
    cells_obf = grid.cells_of(np.array([p.lat for p in protected_points]),
                              np.array([p.lon for p in protected_points])) if protected_points else set()
    return _cell_f_score(cells_raw, cells_obf)


def _cell_f_score(cells_raw: set, cells_obf: set) -> float:
    if not cells_raw or not cells_obf:
        return 0.0
    common = len(cells_raw & cells_obf)
    recall = common / len(cells_raw)
    precision = common / len(cells_obf)
    return _f_score(precision, recall)


# ---------------------------------------------------------------------------
# Trace-level evaluators (registry + raw-side caching)
# ---------------------------------------------------------------------------

class Evaluator:
    """Compares a protected trace against its raw counterpart.

    ``bind(raw)`` precomputes whatever depends only on the raw trace and
    returns a fast ``protected -> value`` callable; ``__call__`` is the
    one-shot convenience form.
    """

    name: str

    def bind(self, raw: Trace) -> Callable[[Trace], float]:
        raise NotImplementedError

    def __call__(self, raw: Trace, protected: Trace) -> float:
        return self.bind(raw)(protected)


class PoiRetrievalEvaluator(Evaluator):
    name = "pois"

    def __init__(self, params: PoiClusteringParams):
        self.params = params

    def bind(self, raw: Trace) -> Callable[[Trace], float]:
        pois_raw = extract_pois(raw, self.params)

        def evaluate(protected: Trace) -> float:
            pois_obf = extract_pois(protected, self.params)
            return poi_retrieval(pois_raw, pois_obf, self.params.match_threshold_m)

        return evaluate


class SpatialDistortionEvaluator(Evaluator):
    name = "distortion"

    def bind(self, raw: Trace) -> Callable[[Trace], float]:
        if len(raw) == 0:
            raise ValueError("raw trace must be non-empty")
        raw_lat, raw_lon = raw.latlon_arrays()
        tree = cKDTree(sphere_xyz(raw_lat, raw_lon))

        def evaluate(protected: Trace) -> float:
            if len(protected) == 0:
                return 0.0
            prot_lat, prot_lon = protected.latlon_arrays()
            return _distortion_against(tree, raw_lat, raw_lon, prot_lat, prot_lon)

        return evaluate


class AreaCoverageEvaluator(Evaluator):
    name = "coverage"

    def __init__(self, grid: CellGrid):
        self.grid = grid

    def bind(self, raw: Trace) -> Callable[[Trace], float]:
        raw_lat, raw_lon = raw.latlon_arrays()
        cells_raw = self.grid.cells_of(raw_lat, raw_lon) if len(raw) else set()

        def evaluate(protected: Trace) -> float:
            if len(protected) == 0:
                return 0.0
            prot_lat, prot_lon = protected.latlon_arrays()
            return _cell_f_score(cells_raw, self.grid.cells_of(prot_lat, prot_lon))

        return evaluate


EVALUATOR_NAMES = ("pois", "distortion", "coverage")

_EVALUATOR_FACTORIES = {
    "pois": lambda poi_params, cell_grid: PoiRetrievalEvaluator(poi_params or PoiClusteringParams()),
    "distortion": lambda poi_params, cell_grid: SpatialDistortionEvaluator(),
    "coverage": lambda poi_params, cell_grid: AreaCoverageEvaluator(cell_grid or CellGrid()),
}


def register_evaluator(name: str, factory) -> None:
    """Add an evaluator factory (poi_params, cell_grid) -> Evaluator to the registry."""
    _EVALUATOR_FACTORIES[name] = factory


def make_evaluator(name: str, *, poi_params: PoiClusteringParams | None = None,
                   cell_grid: CellGrid | None = None) -> Evaluator:
    """Look up an evaluator by registry name."""
    try:
        factory = _EVALUATOR_FACTORIES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown evaluator {name!r}; registered: {', '.join(sorted(_EVALUATOR_FACTORIES))}"
        ) from None
    return factory(poi_params, cell_grid)


def default_robust_k(lppm_name: str) -> int:
    """Median-of-3 for stochastic mechanisms, single run for deterministic ones."""
    return 1 if get_mechanism_class(lppm_name).deterministic else 3


def evaluate_robust(evaluator: Evaluator | Callable[[Trace, Trace], float], raw: Trace,
                    config: LppmConfig, k: int, rng: RngLike) -> float:
    """Obfuscate k times with independent sub-streams and return the median value."""
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be an odd integer >= 1")
    stream = as_stream(rng)
    bound = evaluator.bind(raw) if isinstance(evaluator, Evaluator) else None
    values = []
    for i in range(k):
        protected = apply_lppm(config, raw, stream.child("rep", i))
        values.append(bound(protected) if bound is not None else evaluator(raw, protected))
    return float(statistics.median(values))
