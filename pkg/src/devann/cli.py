"""Command line entry point: ``devann {evolve,experiment,plot,dump-brain}``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from devann import brain as br
from devann.cgp import Genotype, random_genotype
from devann.errors import DevannError
from devann.evolution import run_evolution, run_seeds
from devann.harness import ExperimentConfig, read_records, run_experiment, summarize
from devann.plot import render_plot
from devann.tasks import evaluate_individual, grow

log = logging.getLogger("devann")


def _cmd_evolve(args) -> int:
    config = ExperimentConfig.load(args.config)
    arm = config.arm(args.arm)
    evo = config.evolution_config(arm, args.run)
    task_config = config.task_config(arm)
    best = {}

    def keep_best(pop, gen):
        i = pop.best_index()
        best["genotype"] = pop.individuals[i].genotype
        best["fitness"] = pop.individuals[i].fitness
        best["generation"] = gen

    records = run_evolution(evo, task_config, arm=arm.name, run=args.run, on_generation=keep_best)
    for rec in records:
        log.info("gen %d best %.1f mean %.1f", rec.generation, rec.best_total, rec.mean_total)
    fit = best["fitness"]
    print(json.dumps({
        "arm": arm.name, "seed": evo.seed, "generations": best["generation"],
        "cartpole_fitness": fit.cartpole_fitness,
        "classification_fitness": fit.classification_fitness,
        "total": fit.total,
    }, indent=2))
    if args.save_elite:
        Path(args.save_elite).write_text(json.dumps(best["genotype"].to_json()))
    return 0


def _cmd_experiment(args) -> int:
    config = ExperimentConfig.load(args.config)
    if args.workers:
        config = dataclasses.replace(config, workers=args.workers)
    records = run_experiment(config)
    summaries = summarize(records)
    last = max(s.generation for s in summaries)
    for s in summaries:
        if s.generation == last:
            print(f"{s.arm:>12}  gen {last}: mean best {s.mean:8.1f}  stderr {s.stderr:6.1f}  (n={s.runs})")
    if config.out_svg:
        render_plot(summaries, config.out_svg)
    return 0


def _cmd_plot(args) -> int:
    records = read_records(args.inp)
    render_plot(summarize(records), args.out)
    return 0


def _cmd_dump_brain(args) -> int:
    config = ExperimentConfig.load(args.config)
    arm = config.arm(args.arm)
    task_config = config.task_config(arm)
    if args.genome:
        genotype = Genotype.from_json(json.loads(Path(args.genome).read_text()))
    else:
        genotype = random_genotype(config.genome_length, np.random.default_rng(config.seed))
    seeds = run_seeds(config.evolution_config(arm, args.run).seed, args.generation)
    brain = grow(genotype, task_config, np.random.default_rng(seeds.develop))
    net = br.wire(brain)
    dump = brain.to_json()
    dump["connections"] = [
        {"source": int(net.ids[s]), "target": int(net.ids[t]), "weight": w}
        for s, t, w in net.edges()
    ]
    fit = evaluate_individual(genotype, task_config, seeds)
    dump["fitness"] = {"cartpole": fit.cartpole_fitness,
                       "classification": fit.classification_fitness, "total": fit.total}
    Path(args.out).write_text(json.dumps(dump, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="devann", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="single evolutionary run; prints the final FitnessReport")
    p.add_argument("--config", required=True)
    p.add_argument("--arm", help="arm name (default: first arm)")
    p.add_argument("--run", type=int, default=0, help="run index; seed = config seed + run")
    p.add_argument("--save-elite", help="write the final elite genotype JSON here")
    p.set_defaults(func=_cmd_evolve)

    p = sub.add_parser("experiment", help="full arm sweep to CSV (resumable)")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("plot", help="render an experiment CSV as SVG")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("dump-brain", help="develop one brain and dump it as JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--arm")
    p.add_argument("--genome", help="genotype JSON (e.g. an elite checkpoint); default random")
    p.add_argument("--run", type=int, default=0, help="run index whose seeds to use")
    p.add_argument("--generation", type=int, default=0,
                   help="generation whose cartpole starts score the brain")
    p.set_defaults(func=_cmd_dump_brain)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (DevannError, OSError) as exc:
        print(f"devann: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
