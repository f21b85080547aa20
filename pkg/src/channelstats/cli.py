"""Command-line interface.

    channelstats simulate CONFIG [--seed S] [--replicates R] [--format csv|json] [--out PATH] [--workers W]
    channelstats sweep    CONFIG [...same flags...]
    channelstats crb      CONFIG [--format csv|json] [--out PATH]
    channelstats design   CONFIG [--format csv|json] [--out PATH]

Exit codes: 0 success, 2 usage or configuration error, 3 non-identifiable design.

CSV column orders are fixed (see ``SIMULATE_COLUMNS``, ``SWEEP_COLUMNS``,
``DESIGN_COLUMNS``; ``crb`` writes ``matrix,row,<labels...>``). Floats are
written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from channelstats.config import RunConfig, load_config
from channelstats.design import design_diagnostics
from channelstats.errors import ConfigError, NonIdentifiableError
from channelstats.fisher import (
    FisherMatrix,
    crb_balanced_closed_form,
    crb_biased_closed_form,
    crb_two_means,
    crb_variance_param,
    fisher_means,
    fisher_variance_param,
)
from channelstats.montecarlo import crb_comparison, mse_sweep, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONIDENTIFIABLE = 3

SIMULATE_COLUMNS = ("kind", "estimand", "n", "replicates", "seed", "true_value", "mean_estimate",
                    "bias", "bias_se", "mse", "mse_se", "theory_mse", "crb", "efficiency",
                    "crb_pass")
SWEEP_COLUMNS = ("n", "estimand", "replicates", "mean_estimate", "bias", "bias_se", "mse",
                 "mse_se", "theory_mse", "crb", "efficiency")
DESIGN_COLUMNS = ("channels", "groups", "rank", "determinant", "condition_estimate", "matrix")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _estimand_row(summary, e, passed=None) -> dict:
    return {
        "kind": summary.kind,
        "estimand": e.name,
        "n": summary.n,
        "replicates": summary.replicates,
        "seed": summary.master_seed,
        "true_value": e.true_value,
        "mean_estimate": e.mean_estimate,
        "bias": e.bias,
        "bias_se": e.bias_se,
        "mse": e.mse,
        "mse_se": e.mse_se,
        "theory_mse": e.theory_mse,
        "crb": e.crb,
        "efficiency": e.efficiency,
        "crb_pass": passed,
    }


def cmd_simulate(cfg: RunConfig) -> str:
    """Run one experiment and report bias/MSE per estimand."""
    summary = run_experiment(cfg.experiment(), workers=cfg.workers)
    checks = {c.name: c.passed for c in crb_comparison(summary)}
    rows = [_estimand_row(summary, e, checks.get(e.name)) for e in summary.estimands]
    if cfg.format == "csv":
        return _csv(SIMULATE_COLUMNS, rows)
    doc = {"kind": summary.kind, "n": summary.n, "replicates": summary.replicates,
           "seed": summary.master_seed,
           "design": None if summary.design is None else summary.design.to_list(),
           "estimands": [{c: r[c] for c in SIMULATE_COLUMNS[1:2] + SIMULATE_COLUMNS[5:]}
                         for r in rows]}
    return _json(doc)


def cmd_sweep(cfg: RunConfig) -> str:
    """Repeat the experiment over the configured basket sizes."""
    if not cfg.sweep:
        raise ConfigError("sweep needs a nonempty 'sweep' list in the config")
    try:
        summaries = mse_sweep(cfg.experiment(cfg.sweep[0]), cfg.sweep, workers=cfg.workers)
    except NonIdentifiableError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    name = cfg.estimand or summaries[0].names[0]
    if name not in summaries[0].names:
        raise ConfigError(f"unknown estimand {name!r}; choose from {list(summaries[0].names)}")
    rows = [_estimand_row(s, s[name]) for s in summaries]
    if cfg.format == "csv":
        return _csv(SWEEP_COLUMNS, rows)
    return _json({"kind": cfg.kind, "estimand": name, "seed": cfg.seed,
                  "rows": [{c: r[c] for c in SWEEP_COLUMNS} for r in rows]})


def _crb_matrices(cfg: RunConfig):
    """(labels, J, J^-1, closed form or None) for the configured experiment."""
    pop = cfg.population
    if cfg.kind == "A":
        g = cfg.experiment().target_group
        n = cfg.experiment().n
        if g.variance <= 0:
            raise NonIdentifiableError("zero variance: Fisher information is unbounded")
        J = FisherMatrix([[n / g.variance]], ("mean",))
        return J.labels, J.entries, crb_two_means(J).entries, np.array([[g.variance / n]])
    if cfg.kind == "B":
        g = cfg.experiment().target_group
        if g.variance <= 0:
            raise ConfigError("the variance-parameter bound needs a positive variance")
        v = g.variance
        return (("variance",), np.array([[fisher_variance_param(v)]]),
                np.array([[crb_variance_param(v)]]), np.array([[v * v / 2]]))
    design = cfg.experiment().resolved_design()
    J = fisher_means(design, pop.variances, pop.names)
    crb = crb_two_means(J)
    closed = None
    r = cfg.recipe
    common_v = bool(np.all(pop.variances == pop.variances[0]))
    if common_v and len(pop) == 2:
        v = float(pop.variances[0])
        if r.constructor == "balanced":
            closed = crb_balanced_closed_form(r.n, v).entries
        elif r.constructor == "biased" and r.p != 0.5:
            closed = crb_biased_closed_form(r.n, r.p, v).entries
    return J.labels, J.entries, crb.entries, closed


def cmd_crb(cfg: RunConfig) -> str:
    """Print Fisher information, its inverse and closed-form deltas."""
    labels, J, inv, closed = _crb_matrices(cfg)
    mats = [("fisher", J), ("crb", inv)]
    if closed is not None:
        mats += [("closed_form", closed), ("delta", inv - closed)]
    if cfg.format == "csv":
        columns = ("matrix", "row") + tuple(labels)
        rows = []
        for name, m in mats:
            for i, lab in enumerate(labels):
                row = {"matrix": name, "row": lab}
                row.update({labels[j]: float(m[i, j]) for j in range(len(labels))})
                rows.append(row)
        return _csv(columns, rows)
    doc = {"labels": list(labels)}
    doc.update({name: [[float(x) for x in row] for row in m] for name, m in mats})
    if closed is not None:
        doc["max_abs_delta"] = float(np.max(np.abs(inv - closed)))
    return _json(doc)


def cmd_design(cfg: RunConfig) -> str:
    """Exact rank/determinant and condition estimate of the design."""
    if cfg.recipe is None:
        raise ConfigError("the design command needs a 'design' section")
    design = cfg.experiment().resolved_design() if cfg.kind == "C" else cfg.recipe.build(cfg.seed)
    diag = design_diagnostics(design)
    row = {"channels": design.n_channels, "groups": design.n_groups, **diag.as_dict(),
           "matrix": json.dumps(design.to_list())}
    if cfg.format == "csv":
        return _csv(DESIGN_COLUMNS, [row])
    row["matrix"] = design.to_list()
    if not math.isfinite(row["condition_estimate"]):
        row["condition_estimate"] = "inf"
    return _json({c: row[c] for c in DESIGN_COLUMNS})


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "crb": cmd_crb, "design": cmd_design}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="channelstats",
        description="Estimators, Fisher information and Monte Carlo checks for aggregated measurements.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__ or name)
        p.add_argument("config", help="JSON run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--replicates", type=int)
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--out", help="output file (default: standard output)")
        p.add_argument("--workers", type=int, help="worker processes for simulation")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(
            seed=args.seed, replicates=args.replicates, format=args.format,
            out=args.out, workers=args.workers)
        text = COMMANDS[args.command](cfg)
    except NonIdentifiableError as exc:
        print(f"channelstats: non-identifiable design: {exc}", file=sys.stderr)
        return EXIT_NONIDENTIFIABLE
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"channelstats: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.out:
        try:
            with open(cfg.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"channelstats: cannot write {cfg.out}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
