"""Fisher information and Cramer-Rao bounds for the Gaussian aggregation models.

Two models are covered:

* Single unknown item variance ``v`` observed through basket totals
  (the mean is treated as known). Information is ``2 / v**2`` whatever the
  basket sizes, so the bound ``v**2 / 2`` never shrinks.
* Unknown group means with a known per-item variance. Channel ``i`` gives
  ``T_i ~ Normal(sum_j M_ij mu_j, sigma_i**2)`` with ``sigma_i**2 = sum_j M_ij v_j``,
  hence ``J = M^T diag(1 / sigma_i**2) M``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from channelstats.design import ChannelDesign
from channelstats.errors import NonIdentifiableError

__all__ = [
    "FisherMatrix",
    "CRBMatrix",
    "normal_central_moment",
    "fisher_variance_param",
    "crb_variance_param",
    "fisher_means",
    "fisher_two_means",
    "crb_two_means",
    "crb_balanced_closed_form",
    "crb_biased_closed_form",
    "efficiency_ratio",
    "MAX_CONDITION",
]

MAX_CONDITION = 1e12
_SYM_TOL = 1e-12
_PSD_TOL = 1e-10


def _default_labels(k: int) -> tuple[str, ...]:
    return tuple(f"mu{j}" for j in range(k))


def _square(entries, labels, what):
    a = np.array(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"{what} must be a nonempty square matrix")
    labels = _default_labels(a.shape[0]) if labels is None else tuple(labels)
    if len(labels) != a.shape[0]:
        raise ValueError(f"{what} needs one label per parameter")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > _SYM_TOL * scale:
        raise ValueError(f"{what} is not symmetric")
    a = 0.5 * (a + a.T)
    a.setflags(write=False)
    return a, labels


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    """Symmetric positive semidefinite information matrix with parameter labels."""

    entries: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        a, labels = _square(self.entries, self.labels, "Fisher matrix")
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.min(np.linalg.eigvalsh(a)) < -_PSD_TOL * scale:
            raise ValueError("Fisher matrix is not positive semidefinite")
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def __mul__(self, c: float) -> "FisherMatrix":
        return FisherMatrix(self.entries * c, self.labels)

    __rmul__ = __mul__

    def __add__(self, other: "FisherMatrix") -> "FisherMatrix":
        return FisherMatrix(self.entries + other.entries, self.labels)


@dataclass(frozen=True, eq=False)
class CRBMatrix:
    """Inverse Fisher information; the diagonal bounds unbiased-estimator variance."""

    entries: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        a, labels = _square(self.entries, self.labels, "CRB matrix")
        if np.any(np.diag(a) <= 0):
            raise ValueError("CRB matrix must have a positive diagonal")
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "labels", labels)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def normal_central_moment(variance: float, order: int) -> float:
    """Central moment of a normal law; only orders 2 and 4 are needed here."""
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    if order == 2:
        return float(variance)
    if order == 4:
        return 3.0 * variance * variance
    raise ValueError(f"unsupported moment order {order} (use 2 or 4)")


def fisher_variance_param(v: float) -> float:
    """Information about the item variance carried by a pair of basket totals.

    The basket sizes cancel out of the calculation, so there is no ``n``
    argument.
    """
    if not v > 0:
        raise ValueError("variance must be positive")
    # (3v^2 + 2v^2 + 3v^2) / (4v^4): two 4th moments and one cross term of 2nd moments
    return 2.0 / (v * v)


def crb_variance_param(v: float) -> float:
    """Lower bound on the MSE of any unbiased item-variance estimator."""
    if not v > 0:
        raise ValueError("variance must be positive")
    return v * v / 2.0


def fisher_means(d: ChannelDesign, variances: Sequence[float], labels=None) -> FisherMatrix:
    """Information about the group means, allowing a different variance per group."""
    variances = np.asarray(variances, dtype=float)
    if variances.shape != (d.n_groups,):
        raise ValueError(f"need {d.n_groups} group variances")
    if np.any(variances < 0):
        raise ValueError("variances must be nonnegative")
    M = d.counts.astype(float)
    row_var = M @ variances
    if np.any(d.row_totals == 0):
        raise ValueError("design has an empty channel (row total 0)")
    if np.any(row_var <= 0):
        raise ValueError("every channel total must have positive variance")
    J = (M.T / row_var) @ M
    return FisherMatrix(J, labels)


def fisher_two_means(d: ChannelDesign, v: float, labels=None) -> FisherMatrix:
    """Information about the group means when every item has variance ``v``.

    ``J = M^T diag(1 / (n_i v)) M`` with ``n_i`` the row totals. With two
    rows of ``n`` items each this is ``(1/(n v)) [[a1^2+a2^2, a1 o1+a2 o2],
    [a1 o1+a2 o2, o1^2+o2^2]]``.
    """
    if not v > 0:
        raise ValueError("variance must be positive")
    return fisher_means(d, np.full(d.n_groups, float(v)), labels)


def crb_two_means(J: FisherMatrix) -> CRBMatrix:
    """Invert an information matrix, refusing ill-conditioned ones."""
    cond = np.linalg.cond(J.entries)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise NonIdentifiableError(
            f"Fisher matrix is singular or nearly so (condition {cond:.3g} > {MAX_CONDITION:g}); "
            "the parameters are not identifiable from this design")
    return CRBMatrix(np.linalg.inv(J.entries), J.labels)


def crb_balanced_closed_form(n: int, v: float, labels=None) -> CRBMatrix:
    """Bound for the coin-flip design at counts ``n/2 +- sqrt(n)`` (unrounded)."""
    if n < 1 or not v > 0:
        raise ValueError("need n >= 1 and v > 0")
    d, o = 1 + 4 / n, -1 + 4 / n
    return CRBMatrix((v / 8) * np.array([[d, o], [o, d]]), labels)


def crb_biased_closed_form(n: int, p: float, v: float, labels=None) -> CRBMatrix:
    """Bound for the biased design with counts ``(np, nq; nq, np)``, ``q = 1 - p``.

    Equals ``v / (n (p - q)**2) * [[p^2 + q^2, -2pq], [-2pq, p^2 + q^2]]`` and
    vanishes like ``1/n`` for every ``p != 1/2``.
    """
    if n < 1 or not v > 0:
        raise ValueError("need n >= 1 and v > 0")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if p == 0.5:
        raise NonIdentifiableError("p = 1/2 gives identical baskets; the means are not identifiable")
    q = 1.0 - p
    c = v / (n * (p - q) ** 2)
    s, x = p * p + q * q, -2 * p * q
    return CRBMatrix(c * np.array([[s, x], [x, s]]), labels)


def efficiency_ratio(empirical_mse, crb) -> np.ndarray:
    """Empirical MSE divided by the bound, per parameter."""
    mse = np.atleast_1d(np.asarray(empirical_mse, dtype=float))
    bound = crb.diagonal if isinstance(crb, CRBMatrix) else np.atleast_1d(np.asarray(crb, dtype=float))
    if mse.shape != bound.shape:
        raise ValueError(f"dimension mismatch: {mse.shape[0]} MSEs vs {bound.shape[0]} bounds")
    return mse / bound
