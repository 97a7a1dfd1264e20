"""One-elite (1 + lambda) evolution strategy over genotypes."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from devann import cgp
from devann.cgp import Genotype
from devann.errors import ConfigurationError, ContractError
from devann.tasks import EvalSeeds, FitnessReport, TaskConfig, evaluate_individual

log = logging.getLogger(__name__)

# stream tags for np.random.default_rng([seed, tag, ...])
_INIT, _MUTATE, _DEVELOP, _EPISODES = 0, 1, 2, 3


@dataclass(frozen=True)
class EvolutionConfig:
    generations: int = 100
    population_size: int = 10
    mutation_rate: float = cgp.DEFAULT_MUTATION_RATE
    elite_reeval: bool = False
    seed: int = 0
    genome_length: int = cgp.DEFAULT_GENOME_LENGTH
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.generations < 1:
            raise ConfigurationError("generations must be >= 1")
        if self.population_size < 1:
            raise ConfigurationError("population_size must be >= 1")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigurationError("mutation_rate must be in [0, 1]")
        if self.genome_length < 1:
            raise ConfigurationError("genome_length must be >= 1")


@dataclass(frozen=True)
class Individual:
    genotype: Genotype
    fitness: FitnessReport | None = None


@dataclass(frozen=True)
class Population:
    individuals: tuple[Individual, ...]
    elite_index: int = 0

    def __len__(self) -> int:
        return len(self.individuals)

    def best_index(self) -> int:
        """Index of the highest total fitness; ties go to the lowest index."""
        best, best_total = -1, -np.inf
        for i, ind in enumerate(self.individuals):
            if ind.fitness is None:
                raise ContractError(f"individual {i} has not been evaluated")
            if ind.fitness.total > best_total:
                best, best_total = i, ind.fitness.total
        return best


@dataclass(frozen=True)
class RunRecord:
    arm: str
    run: int
    generation: int
    best_total: float
    mean_total: float
    best_cartpole: float
    best_classification: float


def run_seeds(seed: int, generation: int) -> EvalSeeds:
    """Evaluation seeds shared by every individual of one generation.

    Growth randomness is fixed for the whole run so that fitness depends only
    on the genotype and the generation's cartpole starts.
    """
    dev = int(np.random.default_rng([seed, _DEVELOP]).integers(2**63))
    episodes = int(np.random.default_rng([seed, _EPISODES, generation]).integers(2**63))
    return EvalSeeds(dev, episodes)


def initial_population(config: EvolutionConfig) -> Population:
    rng = np.random.default_rng([config.seed, _INIT])
    return Population(tuple(Individual(cgp.random_genotype(config.genome_length, rng))
                            for _ in range(config.population_size)))


def next_generation(pop: Population, config: EvolutionConfig,
                    rng: np.random.Generator) -> Population:
    """Keep the best individual and fill the remaining slots with its mutants.

    Mutants come back unevaluated. The elite keeps its cached fitness unless
    ``config.elite_reeval`` is set.
    """
    best = pop.best_index()
    elite = pop.individuals[best]
    if config.elite_reeval:
        elite = Individual(elite.genotype)
    children = [elite]
    for _ in range(config.population_size - 1):
        children.append(Individual(cgp.mutate_genotype(elite.genotype, config.mutation_rate, rng)))
    return Population(tuple(children), elite_index=0)


def evaluate_population(pop: Population, task_config: TaskConfig, seeds: EvalSeeds,
                        map_fn: Callable = map) -> Population:
    todo = [i for i, ind in enumerate(pop.individuals) if ind.fitness is None]
    reports = list(map_fn(evaluate_individual,
                          [pop.individuals[i].genotype for i in todo],
                          [task_config] * len(todo), [seeds] * len(todo)))
    individuals = list(pop.individuals)
    for i, rep in zip(todo, reports):
        individuals[i] = replace(individuals[i], fitness=rep)
    return replace(pop, individuals=tuple(individuals))


def summarize_population(pop: Population, arm: str, run: int, generation: int) -> RunRecord:
    best = pop.individuals[pop.best_index()].fitness
    totals = [ind.fitness.total for ind in pop.individuals]
    return RunRecord(arm, run, generation, best.total, float(np.mean(totals)),
                     best.cartpole_fitness, best.classification_fitness)


def _checkpoint(config: EvolutionConfig, arm: str, run: int, generation: int,
                genotype: Genotype) -> None:
    directory = Path(config.checkpoint_dir or ".")
    directory.mkdir(parents=True, exist_ok=True)
    name = f"{arm or 'run'}_{run:03d}_gen{generation:04d}.json"
    (directory / name).write_text(json.dumps(genotype.to_json()))


def run_evolution(config: EvolutionConfig, task_config: TaskConfig, arm: str = "",
                  run: int = 0, map_fn: Callable = map,
                  on_generation: Callable[[Population, int], None] | None = None,
                  ) -> list[RunRecord]:
    """Evolve for ``config.generations`` reproduction steps.

    Record ``g`` (1-based) describes the population produced by the g-th
    round of selection + mutation, after evaluation. ``task_config.ad`` holds
    the AD mask; everything random is derived from ``config.seed``.
    """
    pop = evaluate_population(initial_population(config), task_config,
                              run_seeds(config.seed, 0), map_fn)
    mut_rng = np.random.default_rng([config.seed, _MUTATE])
    records = []
    for gen in range(1, config.generations + 1):
        pop = next_generation(pop, config, mut_rng)
        pop = evaluate_population(pop, task_config, run_seeds(config.seed, gen), map_fn)
        rec = summarize_population(pop, arm, run, gen)
        records.append(rec)
        log.debug("%s run %d gen %d best %.1f", arm, run, gen, rec.best_total)
        if on_generation is not None:
            on_generation(pop, gen)
        if config.checkpoint_every and gen % config.checkpoint_every == 0:
            _checkpoint(config, arm, run, gen, pop.individuals[pop.best_index()].genotype)
    return records


def best_individual(records: Iterable[RunRecord]) -> RunRecord:
    return max(records, key=lambda r: r.best_total)
