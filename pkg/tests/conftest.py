import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes `oracles` importable

from drivemon.telemetry import SENSOR_CHANNELS, TelemetryStream, uniform_time_axis


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_stream(rng) -> TelemetryStream:
    """32 frames (exactly one window) of random but valid telemetry."""
    n = 32
    values = rng.normal(0.0, 1.0, size=(n, len(SENSOR_CHANNELS)))
    return TelemetryStream(
        t=uniform_time_axis(n),
        sol=np.full(n, 1000, dtype=np.int64),
        values=values,
    )


def make_stream(n: int, seed: int = 0, sol: int = 1000) -> TelemetryStream:
    rng = np.random.default_rng(seed)
    return TelemetryStream(
        t=uniform_time_axis(n),
        sol=np.full(n, sol, dtype=np.int64),
        values=rng.normal(0.0, 1.0, size=(n, len(SENSOR_CHANNELS))),
    )
