"""Neighbour-dependent point shifts and random mass exchange: simulation and checks."""
from .exchange import (
    ExchangeState,
    SharingSpec,
    apply_division_shift,
    apply_exchange_line,
    euler_sum_value,
    iterate_exchange,
    iterate_random_exchange,
    sample_sharing_row,
    step_random_exchange,
)
from .renewal import GapSequence, PointConfiguration, gaps_to_points, points_to_gaps, sample_gaps
from .specfun import DistributionSpec, RngHandle

__version__ = "0.1.0"
