"""Estimation limits for aggregated measurements.

Items (apples, oranges, search phrases) are only ever observed through
basket totals. This package provides the estimators that can be formed
from such totals, the Fisher information and Cramer-Rao bounds of the
Gaussian aggregation models, and a seeded Monte Carlo harness that checks
the closed forms empirically.
"""

from channelstats.errors import ChannelStatsError, ConfigError, NonIdentifiableError
from channelstats.model import GroupSpec, PopulationSpec, RandomSource
from channelstats.design import ChannelDesign
from channelstats.fisher import CRBMatrix, FisherMatrix

__version__ = "0.1.0"

__all__ = [
    "ChannelDesign",
    "ChannelStatsError",
    "ConfigError",
    "CRBMatrix",
    "FisherMatrix",
    "GroupSpec",
    "NonIdentifiableError",
    "PopulationSpec",
    "RandomSource",
]
