import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from alp.geo import GeoPoint, Record, Trace


def make_trace(coords, user="u", t0_ms=0, step_ms=30_000):
    """Trace from (lat, lon) pairs at a fixed sampling period."""
    return Trace(user, tuple(
        Record(user, GeoPoint(lat, lon), t0_ms + i * step_ms)
        for i, (lat, lon) in enumerate(coords)
    ))


def random_walk_trace(gen, n=100, step_sd_m=50.0, base=GeoPoint(45.0, 5.0),
                      user="u", step_ms=30_000):
    """Jittery walk in the local plane around the base point."""
    from alp.geo import latlon_from_local

    xy = np.cumsum(gen.normal(0.0, step_sd_m, size=(n, 2)), axis=0)
    lat, lon = latlon_from_local(base, xy[:, 0], xy[:, 1])
    return Trace(user, tuple(
        Record(user, GeoPoint(float(la), float(lo)), i * step_ms)
        for i, (la, lo) in enumerate(zip(lat, lon))
    ))


@pytest.fixture
def gen():
    return np.random.default_rng(20240101)
