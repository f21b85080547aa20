"""Estimators that can be formed from basket totals.

The functions accept numpy arrays wherever a total is expected, so a whole
batch of Monte Carlo replicates can be pushed through in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from channelstats.design import ChannelDesign, exact_determinant, exact_rank
from channelstats.errors import NonIdentifiableError

__all__ = [
    "AggregateReport",
    "MixtureEstimate",
    "mean_from_total",
    "population_variance",
    "two_sigma_interval",
    "paired_variance_estimate",
    "solve_two_group",
    "least_squares_unmix",
    "unmixing_operator",
]


@dataclass(frozen=True)
class AggregateReport:
    """Observed channel totals together with the design that produced them.

    ``totals`` has shape ``(channels,)`` or ``(channels, replicates)``.
    """

    totals: np.ndarray
    design: ChannelDesign

    def __post_init__(self):
        totals = np.asarray(self.totals, dtype=float)
        object.__setattr__(self, "totals", totals)
        if totals.ndim not in (1, 2) or totals.shape[0] != self.design.n_channels:
            raise ValueError(
                f"need one total per channel ({self.design.n_channels}), got shape {totals.shape}")


@dataclass(frozen=True)
class MixtureEstimate:
    """Per-group mean estimates; ``estimates[j]`` belongs to group ``j``."""

    estimates: np.ndarray
    labels: tuple[str, ...] | None = None
    covariance_bound: object | None = None

    def __post_init__(self):
        est = np.asarray(self.estimates, dtype=float)
        object.__setattr__(self, "estimates", est)
        if self.labels is not None and len(self.labels) != est.shape[0]:
            raise ValueError("one label per group required")

    def __getitem__(self, j):
        return self.estimates[j]

    def __len__(self):
        return self.estimates.shape[0]


def mean_from_total(T, n: int):
    """Mean item weight from a single basket total of ``n`` items."""
    if n < 1:
        raise ValueError("basket must contain at least one item")
    return T / n


def population_variance(weights: Sequence[float]) -> float:
    """Mean squared deviation from the sample mean (denominator ``len``)."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise ValueError("population_variance of an empty list")
    # shift by a sample point first so constant input gives exactly 0
    d = w - w[0]
    return float(np.mean((d - d.mean()) ** 2))


def two_sigma_interval(mean: float, variance: float) -> tuple[float, float]:
    """``mean -/+ 2 sd``, the rule-of-thumb range for a new item."""
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    half = 2.0 * math.sqrt(variance)
    return mean - half, mean + half


def paired_variance_estimate(T1, T2, n: int):
    """Unbiased item-variance estimate from two single-group baskets of ``n`` items.

    ``T1 - T2`` is Normal(0, 2 n v), so ``(T1 - T2)**2 / (2 n)`` has mean ``v``.
    Its error does not shrink with ``n``: under normality the estimate is
    ``v`` times a chi-square(1) variable, giving MSE ``2 v**2`` at every ``n``.
    """
    if n < 1:
        raise ValueError("baskets must contain at least one item")
    d = np.subtract(T1, T2)
    out = d * d / (2 * n)
    return float(out) if np.ndim(out) == 0 else out


def _require_nonsingular_2x2(d: ChannelDesign) -> int:
    if d.shape != (2, 2):
        raise ValueError(f"solve_two_group needs a 2x2 design, got {d.shape}")
    det = exact_determinant(d)
    if det == 0:
        raise NonIdentifiableError(
            f"design {d.to_list()} has zero determinant (a1*o2 - a2*o1 = 0); "
            "the group means are not identifiable")
    return det


def solve_two_group(d: ChannelDesign, T1, T2, labels=None) -> MixtureEstimate:
    """Closed-form unmixing of two groups from two channel totals.

    With row ``i`` of ``d`` equal to ``(a_i, o_i)``::

        a_hat = (o2*T1 - o1*T2) / (a1*o2 - a2*o1)
        o_hat = (a1*T2 - a2*T1) / (a1*o2 - a2*o1)
    """
    det = _require_nonsingular_2x2(d)
    (a1, o1), (a2, o2) = d.to_list()
    T1 = np.asarray(T1, dtype=float)
    T2 = np.asarray(T2, dtype=float)
    a_hat = (o2 * T1 - o1 * T2) / det
    o_hat = (-a2 * T1 + a1 * T2) / det
    return MixtureEstimate(np.stack([a_hat, o_hat]), labels)


def _check_full_column_rank(d: ChannelDesign) -> None:
    m, k = d.shape
    if m < k:
        raise NonIdentifiableError(f"{m} channels cannot determine {k} group means")
    if m == k and exact_determinant(d) == 0:
        raise NonIdentifiableError(
            f"design {d.to_list()} has zero determinant; the group means are not identifiable")
    rank = exact_rank(d)
    if rank < k:
        raise NonIdentifiableError(
            f"design {d.to_list()} has rank {rank} < {k}; the group means are not identifiable")
    if np.any(d.row_totals == 0):
        raise ValueError("design has an empty channel (row total 0)")


def unmixing_operator(d: ChannelDesign) -> np.ndarray:
    """Linear map ``A`` with ``estimates = A @ totals`` for the row-weighted fit.

    Rows are weighted by ``1 / n_i`` (``n_i`` the row total), the inverse of
    ``Var(T_i)`` up to the common per-item variance.
    """
    _check_full_column_rank(d)
    M = d.counts.astype(float)
    sw = 1.0 / np.sqrt(d.row_totals.astype(float))
    # A = (M^T W M)^-1 M^T W via the pseudo-inverse of the whitened system
    return np.linalg.pinv(M * sw[:, None]) * sw[None, :]


def least_squares_unmix(d: ChannelDesign, report: AggregateReport, labels=None) -> MixtureEstimate:
    """Weighted least-squares group means for an arbitrary full-rank design.

    Minimises ``sum_i (T_i - sum_j d_ij mu_j)**2 / n_i``. For a square
    nonsingular design this is the exact solution of the linear system.
    """
    if report.design != d:
        raise ValueError("report was produced by a different design")
    _check_full_column_rank(d)
    if d.shape == (2, 2):
        return solve_two_group(d, report.totals[0], report.totals[1], labels)
    if d.n_channels == d.n_groups:
        # exactly determined: a direct solve is more accurate than the pseudo-inverse
        est = np.linalg.solve(d.counts.astype(float), report.totals)
    else:
        sw = 1.0 / np.sqrt(d.row_totals.astype(float))
        M = d.counts.astype(float) * sw[:, None]
        rhs = report.totals * (sw[:, None] if report.totals.ndim == 2 else sw)
        est = np.linalg.lstsq(M, rhs, rcond=None)[0]
    return MixtureEstimate(est, labels)
