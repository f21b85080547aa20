"""Run configuration: a JSON document plus command-line overrides.

Schema (keys not listed are rejected)::

    {
      "kind": "A" | "B" | "C",
      "population": [{"name": str, "mean_weight": float, "variance": float}, ...],
      "design": {"constructor": "balanced", "n": int}
              | {"constructor": "biased" | "coinflip", "n": int, "p": float}
              | {"matrix": [[int, ...], ...]},          # kinds C (and `design` command)
      "n": int,                # items per basket, kinds A and B
      "group": str,            # group used by kinds A and B (default: first)
      "replicates": int,       # default 10000
      "seed": int,             # default 0
      "sweep": [int, ...],     # basket sizes for the `sweep` command
      "estimand": str,         # estimand reported by `sweep` (default: first)
      "format": "csv" | "json",
      "out": str | null,       # default: standard output
      "workers": int           # worker processes for simulation (default 1)
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from channelstats.design import DesignRecipe
from channelstats.errors import ConfigError
from channelstats.model import PopulationSpec
from channelstats.montecarlo import KINDS, ExperimentSpec

__all__ = ["RunConfig", "load_config", "parse_config"]

_KEYS = {"kind", "population", "design", "n", "group", "replicates", "seed", "sweep",
         "estimand", "format", "out", "workers", "description"}
_FORMATS = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    kind: str
    population: PopulationSpec
    recipe: DesignRecipe | None = None
    n: int | None = None
    group: str | None = None
    replicates: int = 10000
    seed: int = 0
    sweep: tuple[int, ...] = ()
    estimand: str | None = None
    format: str = "csv"
    out: str | None = None
    workers: int = 1

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.format not in _FORMATS:
            raise ConfigError(f"format must be one of {_FORMATS}, got {self.format!r}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if any(n < 1 for n in self.sweep):
            raise ConfigError("sweep values must be positive integers")
        if self.group is not None and self.group not in self.population.names:
            raise ConfigError(f"group {self.group!r} is not defined in the population")
        if self.kind == "C" and self.recipe is None:
            raise ConfigError("kind C needs a design")
        if self.kind in ("A", "B") and self.n is None and not self.sweep:
            raise ConfigError(f"kind {self.kind} needs n (items per basket)")

    def experiment(self, n: int | None = None) -> ExperimentSpec:
        """ExperimentSpec for this config; ``n`` overrides the basket size."""
        try:
            if self.kind == "C":
                return ExperimentSpec("C", self.population, self.replicates, self.seed,
                                      recipe=self.recipe)
            return ExperimentSpec(self.kind, self.population, self.replicates, self.seed,
                                  n=n if n is not None else (self.n or self.sweep[0]),
                                  group=self.group)
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def _int(value, key):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return value


def _parse_design(doc, fallback_n) -> DesignRecipe:
    if not isinstance(doc, dict):
        raise ConfigError("design must be an object")
    unknown = set(doc) - {"constructor", "n", "p", "matrix"}
    if unknown:
        raise ConfigError(f"unknown design keys: {sorted(unknown)}")
    constructor = doc.get("constructor", "explicit" if "matrix" in doc else None)
    if constructor is None:
        raise ConfigError("design needs a constructor or a matrix")
    if "matrix" in doc and constructor != "explicit":
        raise ConfigError("design must have exactly one source: a constructor or a matrix")
    try:
        if constructor == "explicit":
            matrix = doc.get("matrix")
            if not isinstance(matrix, list) or not all(isinstance(r, list) for r in matrix):
                raise ConfigError("design matrix must be a list of integer rows")
            rows = tuple(tuple(_int(x, "design matrix entry") for x in r) for r in matrix)
            return DesignRecipe("explicit", matrix=rows)
        n = doc.get("n", fallback_n)
        p = doc.get("p")
        return DesignRecipe(constructor, n=None if n is None else _int(n, "design.n"),
                            p=None if p is None else float(p))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad design: {exc}") from exc


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("kind", "population"):
        if key not in doc:
            raise ConfigError(f"config is missing {key!r}")
    try:
        pop = PopulationSpec.from_records(doc["population"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad population: {exc}") from exc
    n = doc.get("n")
    n = None if n is None else _int(n, "n")
    recipe = _parse_design(doc["design"], n) if "design" in doc else None
    if recipe is not None and recipe.constructor == "explicit":
        width = len(recipe.matrix[0])
        if width != len(pop):
            raise ConfigError(f"design has {width} columns but population has {len(pop)} groups")
    elif recipe is not None and len(pop) != 2:
        raise ConfigError(f"{recipe.constructor} designs need exactly two groups")
    sweep = doc.get("sweep", [])
    if not isinstance(sweep, list):
        raise ConfigError("sweep must be a list of integers")
    cfg = RunConfig(
        kind=doc["kind"],
        population=pop,
        recipe=recipe,
        n=n,
        group=doc.get("group"),
        replicates=_int(doc.get("replicates", 10000), "replicates"),
        seed=_int(doc.get("seed", 0), "seed"),
        sweep=tuple(_int(x, "sweep entry") for x in sweep),
        estimand=doc.get("estimand"),
        format=doc.get("format", "csv"),
        out=doc.get("out"),
        workers=_int(doc.get("workers", 1), "workers"),
    )
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)
