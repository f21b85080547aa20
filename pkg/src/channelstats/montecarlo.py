"""Seeded Monte Carlo harness for the three experiments.

* kind ``A``: ``n`` items weighed one at a time; estimands are the sample
  mean and the (denominator-``n``) sample variance.
* kind ``B``: two baskets of ``n`` items from one group; estimand is the
  paired-total variance estimate.
* kind ``C``: a channel design over several groups; estimands are the
  unmixed group means (closed form for 2x2 designs, weighted least
  squares otherwise).

Replicate ``i`` of a run draws only from ``RandomSource(seed, offset + i)``.
A sweep gives point ``k`` the offset ``k * replicates``. Because of that
mapping, and because per-replicate results are reduced in index order, a
summary does not depend on how the replicates were scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from channelstats.design import ChannelDesign, DesignRecipe
from channelstats.estimators import (
    AggregateReport,
    least_squares_unmix,
    mean_from_total,
    paired_variance_estimate,
    population_variance,
    solve_two_group,
    unmixing_operator,
)
from channelstats.fisher import CRBMatrix, crb_two_means, crb_variance_param, fisher_means
from channelstats.model import (
    PopulationSpec,
    RandomSource,
    sample_channel_totals,
    sample_items,
)

__all__ = [
    "ExperimentSpec",
    "EstimandSummary",
    "MCSummary",
    "CRBCheck",
    "run_experiment",
    "mse_sweep",
    "crb_comparison",
    "KINDS",
]

KINDS = ("A", "B", "C")


@dataclass(frozen=True)
class ExperimentSpec:
    """What to simulate.

    Kinds A and B use ``n`` (items per basket) and ``group`` (defaults to
    the first group). Kind C uses ``design``, or ``recipe`` when the design
    must be rebuilt per basket size in a sweep.
    """

    kind: str
    population: PopulationSpec
    replicates: int
    master_seed: int
    n: int | None = None
    design: ChannelDesign | None = None
    recipe: DesignRecipe | None = None
    group: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"experiment kind must be one of {KINDS}, got {self.kind!r}")
        if int(self.replicates) < 1:
            raise ValueError("replicates must be >= 1")
        if self.kind in ("A", "B"):
            if self.n is None or int(self.n) < 1:
                raise ValueError(f"kind {self.kind} needs a positive item count n")
            if self.group is not None:
                self.population.group(self.group)
        else:
            if (self.design is None) == (self.recipe is None):
                raise ValueError("kind C needs exactly one of design or recipe")
            if self.design is not None and self.design.n_groups != len(self.population):
                raise ValueError(
                    f"design has {self.design.n_groups} columns but population has "
                    f"{len(self.population)} groups")

    @property
    def target_group(self):
        return self.population.group(self.group) if self.group else self.population.groups[0]

    def resolved_design(self, block: int = 0, n: int | None = None) -> ChannelDesign:
        if self.design is not None:
            if n is not None:
                raise ValueError("a fixed design cannot be resized; use a recipe")
            return self.design
        d = self.recipe.build(self.master_seed, n=n, block=block)
        if d.n_groups != len(self.population):
            raise ValueError(
                f"design has {d.n_groups} columns but population has {len(self.population)} groups")
        return d


@dataclass(frozen=True)
class EstimandSummary:
    name: str
    true_value: float
    mean_estimate: float
    bias: float
    bias_se: float | None
    mse: float
    mse_se: float | None
    theory_mse: float | None = None
    crb: float | None = None

    @property
    def efficiency(self) -> float | None:
        return None if self.crb is None else self.mse / self.crb


@dataclass(frozen=True)
class MCSummary:
    kind: str
    n: int
    replicates: int
    master_seed: int
    estimands: tuple[EstimandSummary, ...]
    design: ChannelDesign | None = field(default=None, compare=False)

    def __getitem__(self, name: str) -> EstimandSummary:
        for e in self.estimands:
            if e.name == name:
                return e
        raise KeyError(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.estimands)


# -- per-replicate simulation (module level so worker processes can import it)

def _simulate_block(kind, payload, seed, start, stop):
    rows = []
    if kind == "A":
        group, n = payload
        for i in range(start, stop):
            w = sample_items(group, n, RandomSource(seed, i))
            rows.append((mean_from_total(w.sum(), n), population_variance(w)))
    elif kind == "B":
        pop, n = payload
        counts = np.array([[n], [n]])
        for i in range(start, stop):
            rows.append(sample_channel_totals(counts, pop, RandomSource(seed, i)))
    else:
        counts, pop = payload
        for i in range(start, stop):
            rows.append(sample_channel_totals(counts, pop, RandomSource(seed, i)))
    return np.array(rows, dtype=float).reshape(stop - start, -1)


def _simulate(kind, payload, seed, offset, replicates, workers):
    if workers <= 1 or replicates < 2 * workers:
        return _simulate_block(kind, payload, seed, offset, offset + replicates)
    edges = np.linspace(offset, offset + replicates, workers + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_simulate_block, kind, payload, seed, int(a), int(b))
                   for a, b in zip(edges[:-1], edges[1:])]
        return np.concatenate([f.result() for f in futures], axis=0)


def _summarize(name, estimates, truth, theory_mse=None, crb=None) -> EstimandSummary:
    err = np.asarray(estimates, dtype=float) - truth
    R = err.size
    sq = err * err
    root = math.sqrt(R)
    return EstimandSummary(
        name=name,
        true_value=float(truth),
        mean_estimate=float(np.mean(estimates)),
        bias=float(np.mean(err)),
        bias_se=float(np.std(err, ddof=1) / root) if R > 1 else None,
        mse=float(np.mean(sq)),
        # from the spread of the squared errors, not a normal-theory shortcut
        mse_se=float(np.std(sq, ddof=1) / root) if R > 1 else None,
        theory_mse=None if theory_mse is None else float(theory_mse),
        crb=None if crb is None else float(crb),
    )


def run_experiment(spec: ExperimentSpec, *, workers: int = 1, offset: int = 0,
                   block: int = 0, n: int | None = None) -> MCSummary:
    """Simulate ``spec.replicates`` replicates and summarise each estimand.

    ``offset`` shifts the replicate substreams, ``block`` selects the design
    substream for random designs and ``n`` overrides the basket size; all
    three are used by :func:`mse_sweep`.
    """
    R = int(spec.replicates)
    seed = int(spec.master_seed)
    if spec.kind == "A":
        n = int(spec.n if n is None else n)
        g = spec.target_group
        obs = _simulate("A", (g, n), seed, offset, R, workers)
        v = g.variance
        rows = (
            _summarize("mean", obs[:, 0], g.mean_weight, v / n, v / n),
            # biased estimator: v(n-1)/n mean, so the unbiased bound does not apply
            _summarize("variance", obs[:, 1], v, v * v * (2 * n - 1) / n**2),
        )
        return MCSummary("A", n, R, seed, rows)

    if spec.kind == "B":
        n = int(spec.n if n is None else n)
        g = spec.target_group
        pop = PopulationSpec((g,))
        obs = _simulate("B", (pop, n), seed, offset, R, workers)
        v = g.variance
        est = paired_variance_estimate(obs[:, 0], obs[:, 1], n)
        crb = crb_variance_param(v) if v > 0 else None
        rows = (_summarize("variance", est, v, 2 * v * v, crb),)
        return MCSummary("B", n, R, seed, rows, ChannelDesign([[n], [n]]))

    design = spec.resolved_design(block=block, n=n)
    pop = spec.population
    # fail on non-identifiable designs before spending time on simulation
    A = unmixing_operator(design)
    obs = _simulate("C", (design.counts, pop), seed, offset, R, workers)
    report = AggregateReport(obs.T, design)
    if design.shape == (2, 2):
        est = solve_two_group(design, obs[:, 0], obs[:, 1]).estimates
    else:
        est = least_squares_unmix(design, report).estimates
    row_var = design.counts @ pop.variances
    theory = np.diag((A * row_var[None, :]) @ A.T)
    try:
        bound = crb_two_means(fisher_means(design, pop.variances)).diagonal
    except ValueError:
        bound = [None] * len(pop)
    rows = tuple(
        _summarize(name, est[j], pop.means[j], theory[j], bound[j])
        for j, name in enumerate(pop.names)
    )
    n_items = spec.recipe.n if n is None and spec.recipe is not None else n
    if n_items is None:
        n_items = int(design.row_totals.max())
    return MCSummary("C", int(n_items), R, seed, rows, design)


def mse_sweep(spec: ExperimentSpec, n_values, *, workers: int = 1) -> list[MCSummary]:
    """One summary per basket size; point ``k`` uses substreams from ``k * R``."""
    n_values = [int(x) for x in n_values]
    if not n_values:
        raise ValueError("n_values must be nonempty")
    if spec.kind == "C" and spec.recipe is None:
        raise ValueError("a kind C sweep needs a design recipe, not a fixed matrix")
    if spec.kind == "C" and spec.recipe.constructor == "explicit":
        raise ValueError("an explicit design matrix cannot be swept over n")
    R = int(spec.replicates)
    return [run_experiment(spec, workers=workers, offset=k * R, block=k, n=n)
            for k, n in enumerate(n_values)]


@dataclass(frozen=True)
class CRBCheck:
    name: str
    mse: float
    bound: float
    ratio: float
    rel_se: float
    passed: bool


def crb_comparison(summary: MCSummary, bound=None) -> list[CRBCheck]:
    """Compare empirical MSE with a Cramer-Rao bound, estimand by estimand.

    ``bound`` may be a :class:`CRBMatrix` (one diagonal entry per estimand),
    a scalar (single-estimand summaries) or a sequence of floats; ``None``
    uses the bounds stored in the summary and skips estimands without one.
    An estimand fails when ``mse < bound * (1 - 3 * mse_se / mse)``.
    """
    if bound is None:
        pairs = [(e, e.crb) for e in summary.estimands if e.crb is not None]
    else:
        if isinstance(bound, CRBMatrix):
            values = list(bound.diagonal)
        else:
            values = list(np.atleast_1d(np.asarray(bound, dtype=float)))
        if len(values) != len(summary.estimands):
            raise ValueError(
                f"dimension mismatch: {len(values)} bounds for {len(summary.estimands)} estimands")
        pairs = list(zip(summary.estimands, values))
    out = []
    for e, b in pairs:
        rel_se = (e.mse_se or 0.0) / e.mse if e.mse > 0 else 0.0
        passed = e.mse >= b * (1.0 - 3.0 * rel_se)
        out.append(CRBCheck(e.name, e.mse, float(b), e.mse / b, rel_se, bool(passed)))
    return out


def with_replicates(spec: ExperimentSpec, replicates: int) -> ExperimentSpec:
    return replace(spec, replicates=replicates)
