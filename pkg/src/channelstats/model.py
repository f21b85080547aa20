"""Gaussian item-weight populations and reproducible sampling.

Every draw goes through a :class:`RandomSource`, which is a numpy
``Generator`` bound to one substream of a master seed. Substream ``i`` of
seed ``s`` is seeded from ``numpy.random.SeedSequence(s, spawn_key=(i,))``,
i.e. it is exactly the ``i``-th child of ``SeedSequence(s).spawn(...)``.
That mapping is the stable contract the Monte Carlo harness relies on for
scheduling-independent results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "GroupSpec",
    "PopulationSpec",
    "RandomSource",
    "sample_weight",
    "sample_items",
    "sample_basket_total",
    "sample_channel_totals",
]

_SEED_LIMIT = 2**64


def _frozen_array(values) -> np.ndarray:
    a = np.array(values, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GroupSpec:
    """One kind of item with Normal(mean_weight, variance) weights (pounds)."""

    name: str
    mean_weight: float
    variance: float

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("group name must be a nonempty string")
        if not math.isfinite(self.mean_weight):
            raise ValueError(f"group {self.name!r}: mean_weight must be finite")
        if not math.isfinite(self.variance) or self.variance < 0:
            raise ValueError(f"group {self.name!r}: variance must be finite and >= 0")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class PopulationSpec:
    """Ordered collection of groups; the order fixes design columns."""

    groups: tuple[GroupSpec, ...]

    def __post_init__(self):
        groups = tuple(self.groups)
        object.__setattr__(self, "groups", groups)
        if not groups:
            raise ValueError("population needs at least one group")
        names = [g.name for g in groups]
        if len(set(names)) != len(names):
            raise ValueError(f"group names must be unique, got {names}")

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> "PopulationSpec":
        return cls(tuple(GroupSpec(r["name"], float(r["mean_weight"]), float(r["variance"]))
                         for r in records))

    def __len__(self):
        return len(self.groups)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(g.name for g in self.groups)

    @cached_property
    def means(self) -> np.ndarray:
        return _frozen_array([g.mean_weight for g in self.groups])

    @cached_property
    def variances(self) -> np.ndarray:
        return _frozen_array([g.variance for g in self.groups])

    def group(self, name: str) -> GroupSpec:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)


@dataclass
class RandomSource:
    """Stateful generator for substream ``substream`` of ``master_seed``.

    Two sources built from the same (seed, substream) pair produce the same
    sequence of draws.
    """

    master_seed: int
    substream: int = 0
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < _SEED_LIMIT:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if int(self.substream) < 0:
            raise ValueError("substream index must be nonnegative")
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.substream),))
        self.generator = np.random.Generator(np.random.PCG64(seq))


def sample_weight(group: GroupSpec, rng: RandomSource) -> float:
    """Draw one item weight. Zero variance returns the mean exactly."""
    return float(rng.generator.normal(group.mean_weight, group.sd))


def sample_items(group: GroupSpec, n: int, rng: RandomSource) -> np.ndarray:
    """Draw ``n`` independent item weights (individual weighings)."""
    return rng.generator.normal(group.mean_weight, group.sd, size=int(n))


def sample_basket_total(counts: Sequence[int], pop: PopulationSpec, rng: RandomSource) -> float:
    """Total weight of a basket holding ``counts[j]`` items of group ``j``.

    The sum of ``c`` iid Normal(mu, v) items is exactly Normal(c*mu, c*v),
    so each group contributes one draw with that law; no approximation is
    involved.
    """
    counts = np.asarray(counts)
    if counts.shape != (len(pop),):
        raise ValueError(f"expected {len(pop)} counts, got shape {counts.shape}")
    return float(sample_channel_totals(counts[None, :], pop, rng)[0])


def sample_channel_totals(counts: np.ndarray, pop: PopulationSpec, rng: RandomSource) -> np.ndarray:
    """Basket totals for every row of a channels x groups count matrix."""
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 2 or counts.shape[1] != len(pop):
        raise ValueError(f"count matrix must have {len(pop)} columns")
    loc = counts * pop.means
    scale = np.sqrt(counts * pop.variances)
    return rng.generator.normal(loc, scale).sum(axis=1)
