"""Speed bands and the congestion cutoff shared across the pipeline."""

from __future__ import annotations

import numpy as np

# Band edges in mph. A cell is "congested" when its speed falls in the red or
# black band, i.e. below CONGESTED_MPH.
GREEN_MIN_MPH = 45.0
YELLOW_MIN_MPH = 30.0
RED_MIN_MPH = 15.0
CONGESTED_MPH = 30.0

FREE_FLOW_MAX_MPH = 75.0

BAND_NAMES = ("green", "yellow", "red", "black")


def band_of(speed_mph):
    """Map speed (scalar or array) to band index: 0 green .. 3 black."""
    s = np.asarray(speed_mph)
    return np.select(
        [s >= GREEN_MIN_MPH, s >= YELLOW_MIN_MPH, s >= RED_MIN_MPH],
        [0, 1, 2],
        default=3,
    )


def is_congested(speed_mph):
    """True where speed sits in the red/black bands."""
    return np.asarray(speed_mph) < CONGESTED_MPH
