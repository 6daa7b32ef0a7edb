"""Command-line front end.

    pfmr fit --input crabs --responses CW,FL,RW --covariates CL,BD --G 1-9
    pfmr simulate --replicates 20 --G 1-4 --output-dir sim-out
    pfmr metrics truth.csv labels.tsv --column-a group --column-b label
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from .core import NoModelError, PfmrError
from .em import EmConfig
from .evaluation import adjusted_rand, confusion, rand_index
from .io import (
    ConfigError,
    RunConfig,
    assignments_table,
    confusion_table,
    load_csv,
    ranked_table,
    read_labels,
    read_table,
    write_model,
)
from .selection import SearchSpec, search
from .simulation import SimScenario, replicate_study

log = logging.getLogger("pfmr")

_RUN_FLAGS = {
    "input": "input",
    "responses": "responses",
    "covariates": "covariates",
    "concomitants": "concomitants",
    "label_column": "label_column",
    "families": "families",
    "G": "G_range",
    "structures": "structures",
    "seed": "seed",
    "random_starts": "n_random_starts",
    "epsilon": "epsilon",
    "max_iter": "max_iter",
    "min_component_fraction": "min_component_fraction",
    "jobs": "n_jobs",
    "output_dir": "output_dir",
}


def _add_search_flags(p):
    p.add_argument("--families", help="comma list of eFMR, eFMRC")
    p.add_argument("--G", help="component counts, e.g. 1-9 or 2,3")
    p.add_argument("--structures", help="comma list of structure codes or 'all'")
    p.add_argument("--seed", type=int)
    p.add_argument("--random-starts", type=int)
    p.add_argument("--no-kmeans", action="store_true", help="drop the k-means start")
    p.add_argument("--epsilon", type=float, help="Aitken stopping tolerance")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--min-component-fraction", type=float)
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--output-dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfmr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="select and fit mixtures of regressions on a CSV file")
    p.add_argument("--config", help="JSON run configuration; flags override it")
    p.add_argument("--input", help="CSV path, or 'crabs' for the bundled data")
    p.add_argument("--responses")
    p.add_argument("--covariates")
    p.add_argument("--concomitants", help="defaults to the covariates")
    p.add_argument("--label-column", help="truth labels for ARI and confusion tables")
    _add_search_flags(p)

    p = sub.add_parser("simulate", help="replicate study of the two-component design")
    p.add_argument("--scenario", help="JSON scenario overriding the defaults")
    p.add_argument("--replicates", type=int)
    _add_search_flags(p)

    p = sub.add_parser("metrics", help="ARI, Rand index and confusion of two labelings")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--column-a")
    p.add_argument("--column-b")
    return parser


def _run_config(args) -> RunConfig:
    base = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    updates = {}
    for flag, key in _RUN_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            updates[key] = val
    if getattr(args, "no_kmeans", False):
        updates["use_kmeans_start"] = False
    cfg = replace(base, **updates) if updates else base
    if cfg.input in ("crabs", "@crabs") and not cfg.responses:
        cfg = replace(cfg, responses=("CW", "FL", "RW"), covariates=("CL", "BD"),
                      label_column=cfg.label_column or "group")
    return cfg


def _search_parts(cfg: RunConfig):
    spec = SearchSpec(
        families=cfg.families,
        G_range=cfg.G_range,
        structures=cfg.structures,
        n_random_starts=cfg.n_random_starts,
        use_kmeans_start=cfg.use_kmeans_start,
        seed=cfg.seed,
    )
    em = EmConfig(epsilon=cfg.epsilon, max_iter=cfg.max_iter,
                  min_component_fraction=cfg.min_component_fraction)
    return spec, em


def run(cfg: RunConfig) -> int:
    """Execute a model search and write its artifacts; returns an exit code."""
    data = load_csv(cfg.input, cfg.responses, cfg.covariates, cfg.concomitants or None)
    truth = None
    if cfg.label_column:
        header, rows = read_table(cfg.input)
        if cfg.label_column not in header:
            raise ConfigError(f"label column {cfg.label_column!r} not in input")
        c = header.index(cfg.label_column)
        truth = [r[c].strip() for r in rows]
    log.info("loaded N=%d, d=%d, p=%d, q=%d", data.N, data.d, data.p, data.q)
    if data.N < max(cfg.G_range):
        raise ConfigError(f"N = {data.N} is smaller than the largest G = {max(cfg.G_range)}")
    spec, em = _search_parts(cfg)
    t0 = time.time()
    report = search(data, spec, em, n_jobs=cfg.n_jobs)
    log.info("search finished in %.1fs", time.time() - t0)

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "models.tsv").write_text(ranked_table(report))
    with open(out / "config.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")
    summary = {}
    for fam in spec.families:
        cell = report.best_for(fam)
        if cell is None:
            summary[fam.value] = None
            continue
        res = cell.result
        write_model(out / f"best_{fam.value}.json", res, data)
        (out / f"assignments_{fam.value}.tsv").write_text(assignments_table(res))
        entry = {"structure": cell.structure.value, "G": cell.G, "bic": res.bic,
                 "loglik": res.loglik, "n_params": res.n_params}
        if truth is not None:
            entry["ari"] = adjusted_rand(truth, res.labels)
            cont = confusion(truth, res.labels + 1)
            (out / f"confusion_{fam.value}.tsv").write_text(confusion_table(cont))
        summary[fam.value] = entry
        print(f"{fam.value}: {cell.structure.value} G={cell.G} BIC={res.bic:.2f} "
              f"loglik={res.loglik:.2f} params={res.n_params}"
              + (f" ARI={entry['ari']:.2f}" if "ari" in entry else ""))
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return 0


def simulate(args) -> int:
    scenario = SimScenario()
    if args.scenario:
        with open(args.scenario) as fh:
            scenario = SimScenario.from_dict({**scenario.to_dict(), **json.load(fh)})
    cfg = _run_config(args)
    if args.G is None:
        cfg = replace(cfg, G_range=(1, 2, 3, 4))
    spec, em = _search_parts(cfg)
    n_rep = args.replicates if args.replicates is not None else scenario.replicates

    def progress(i, n, recs):
        log.info("replicate %d/%d: %s", i, n,
                 ", ".join(f"{r.family.value} {r.structure} G={r.G} ARI={r.ari:.2f}"
                           for r in recs))

    study = replicate_study(scenario, spec, em, replicates=n_rep, n_jobs=cfg.n_jobs,
                            progress=progress)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.tsv").write_text(study.table())
    (out / "replicates.tsv").write_text(study.records_table())
    with open(out / "scenario.json", "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=2)
        fh.write("\n")
    sys.stdout.write(study.table())
    return 0


def metrics(args) -> int:
    a = read_labels(args.a, args.column_a)
    b = read_labels(args.b, args.column_b)
    cont = confusion(a, b)
    print(f"ARI\t{adjusted_rand(a, b):.6f}")
    print(f"Rand\t{rand_index(a, b):.6f}")
    print(str(cont))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "fit":
            return run(_run_config(args))
        if args.command == "simulate":
            return simulate(args)
        return metrics(args)
    except NoModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PfmrError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
