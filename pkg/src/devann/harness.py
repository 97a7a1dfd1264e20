"""Multi-arm experiment orchestration and the RunRecord CSV format."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from devann import brain as br
from devann import cgp
from devann.errors import ConfigurationError, ContractError, DatasetError
from devann.evolution import EvolutionConfig, RunRecord, run_evolution
from devann.learning import AdConfig
from devann.tasks import CLASSIFICATION, TASK_NAMES, CartpoleParams, TaskConfig, \
    default_dataset_path, load_dataset

log = logging.getLogger(__name__)

CSV_HEADER = ("arm", "run", "generation", "best_total", "mean_total",
              "best_cartpole", "best_classification")
SEED_ENV = "DEVANN_SEED"

DEFAULT_ARMS = (
    {"name": "base", "ad": []},
    {"name": "bias", "ad": ["bias"]},
    {"name": "health", "ad": ["health"]},
    {"name": "position", "ad": ["position"]},
    {"name": "all", "ad": ["bias", "health", "position"]},
)


@dataclass(frozen=True)
class Arm:
    name: str
    ad: tuple[str, ...] = ()
    # per-arm overrides of the shared settings, e.g. {"mutation_rate": 0.1}
    overrides: dict = field(default_factory=dict, hash=False, compare=False)


@dataclass(frozen=True)
class ExperimentConfig:
    arms: tuple[Arm, ...] = tuple(Arm(a["name"], tuple(a["ad"])) for a in DEFAULT_ARMS)
    runs: int = 50
    generations: int = 100
    population_size: int = 10
    mutation_rate: float = cgp.DEFAULT_MUTATION_RATE
    genome_length: int = cgp.DEFAULT_GENOME_LENGTH
    dev_cycles: int = br.DEFAULT_CYCLES
    theta_birth: float = br.DEFAULT_THETA_BIRTH
    theta_death: float = br.DEFAULT_THETA_DEATH
    soma_cap: int = br.DEFAULT_SOMA_CAP
    max_dendrites: int = br.DEFAULT_MAX_DENDRITES
    init_dendrites: int = br.DEFAULT_INIT_DENDRITES
    ad_epochs: int = 5
    structural_updates: bool = True
    elite_reeval: bool = False
    tasks: tuple[str, ...] = TASK_NAMES
    cartpole_max_steps: int = 1000
    eval_episodes: int = 3
    dataset_path: str | None = None
    seed: int = 0
    out_csv: str = "results.csv"
    out_svg: str | None = None
    workers: int | None = None
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if not self.arms:
            raise ConfigurationError("at least one arm is required")
        names = [a.name for a in self.arms]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"arm names must be unique: {names}")
        if self.runs < 1:
            raise ConfigurationError("runs must be >= 1")
        if self.workers is not None and self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    @classmethod
    def from_dict(cls, obj: dict, env: dict | None = None) -> "ExperimentConfig":
        obj = dict(obj)
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        if "arms" in obj:
            arms = []
            for a in obj["arms"]:
                if isinstance(a, str):
                    raise ConfigurationError("arms must be objects with 'name' and 'ad'")
                a = dict(a)
                try:
                    name = a.pop("name")
                except KeyError:
                    raise ConfigurationError("every arm needs a 'name'") from None
                ad = tuple(a.pop("ad", ()))
                bad = set(a) - known
                if bad:
                    raise ConfigurationError(f"arm {name!r}: unknown override keys {sorted(bad)}")
                arms.append(Arm(name, ad, a))
            obj["arms"] = tuple(arms)
        if "tasks" in obj:
            obj["tasks"] = tuple(obj["tasks"])
        env = os.environ if env is None else env
        if env.get(SEED_ENV):
            try:
                obj["seed"] = int(env[SEED_ENV])
            except ValueError:
                raise ConfigurationError(f"{SEED_ENV} must be an integer") from None
        return cls(**obj)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(obj)

    def arm(self, name: str | None = None) -> Arm:
        if name is None:
            return self.arms[0]
        for a in self.arms:
            if a.name == name:
                return a
        raise ConfigurationError(f"no arm named {name!r}")

    def resolved(self, arm: Arm) -> "ExperimentConfig":
        """Shared settings with ``arm``'s overrides applied."""
        if not arm.overrides:
            return self
        return ExperimentConfig(**{**{f.name: getattr(self, f.name) for f in fields(self)},
                                   **arm.overrides})

    def evolution_config(self, arm: Arm, run: int) -> EvolutionConfig:
        c = self.resolved(arm)
        return EvolutionConfig(
            generations=c.generations, population_size=c.population_size,
            mutation_rate=c.mutation_rate, elite_reeval=c.elite_reeval,
            seed=c.seed + run, genome_length=c.genome_length,
            checkpoint_every=c.checkpoint_every, checkpoint_dir=c.checkpoint_dir,
        )

    def task_config(self, arm: Arm, dataset=None) -> TaskConfig:
        c = self.resolved(arm)
        if dataset is None and CLASSIFICATION in c.tasks:
            dataset = load_dataset(c.dataset_path or default_dataset_path())
        return TaskConfig(
            tasks=c.tasks, dataset=dataset,
            ad=AdConfig.from_list(arm.ad, epochs=c.ad_epochs,
                                  structural_updates=c.structural_updates),
            cartpole_max_steps=c.cartpole_max_steps, eval_episodes=c.eval_episodes,
            dev_cycles=c.dev_cycles, theta_birth=c.theta_birth, theta_death=c.theta_death,
            soma_cap=c.soma_cap, max_dendrites=c.max_dendrites,
            init_dendrites=c.init_dendrites, cartpole=CartpoleParams(),
        )


def format_record(rec: RunRecord) -> list[str]:
    return [rec.arm, str(rec.run), str(rec.generation), repr(rec.best_total),
            repr(rec.mean_total), repr(rec.best_cartpole), repr(rec.best_classification)]


def write_records(path, records: Iterable[RunRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rec in records:
            w.writerow(format_record(rec))


def read_records(path) -> list[RunRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if tuple(header) != CSV_HEADER:
            raise ContractError(f"{path}: unexpected header {header}")
        out = []
        for row in reader:
            if len(row) != len(CSV_HEADER):
                continue  # torn final line from an interrupted write
            out.append(RunRecord(row[0], int(row[1]), int(row[2]), *(float(v) for v in row[3:])))
        return out


def _complete_runs(records: list[RunRecord], generations: dict[str, int]) -> set[tuple[str, int]]:
    gens: dict[tuple[str, int], set[int]] = {}
    for r in records:
        gens.setdefault((r.arm, r.run), set()).add(r.generation)
    return {key for key, g in gens.items()
            if key[0] in generations and g == set(range(1, generations[key[0]] + 1))}


def _run_one(job) -> list[RunRecord]:
    config, arm, run, dataset = job
    return run_evolution(config.evolution_config(arm, run), config.task_config(arm, dataset),
                         arm=arm.name, run=run)


def _check_startup(config: ExperimentConfig):
    """Fail before any run starts if inputs or outputs are unusable."""
    datasets = {}
    for arm in config.arms:
        c = config.resolved(arm)
        if CLASSIFICATION in c.tasks:
            path = str(c.dataset_path or default_dataset_path())
            if path not in datasets:
                try:
                    datasets[path] = load_dataset(path)
                except DatasetError as exc:
                    raise ConfigurationError(str(exc)) from exc
    out = Path(config.out_csv)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "a"):
            pass
    except OSError as exc:
        raise ConfigurationError(f"cannot write {out}: {exc}") from exc
    return datasets


def run_experiment(config: ExperimentConfig) -> list[RunRecord]:
    """Run every (arm, run) pair and stream records to ``config.out_csv``.

    Run ``r`` of every arm uses seed ``config.seed + r``. Pairs already complete
    in the output file are kept and skipped; partial ones are discarded and
    rerun. Results are written in (arm, run) order regardless of worker count,
    so the CSV is byte-identical for a fixed config.
    """
    datasets = _check_startup(config)
    out = Path(config.out_csv)
    existing = read_records(out) if out.stat().st_size else []
    generations = {a.name: config.resolved(a).generations for a in config.arms}
    done = _complete_runs(existing, generations)

    jobs, order = [], []
    for arm in config.arms:
        c = config.resolved(arm)
        ds = datasets.get(str(c.dataset_path or default_dataset_path())) \
            if CLASSIFICATION in c.tasks else None
        for run in range(config.runs):
            order.append((arm.name, run))
            if (arm.name, run) not in done:
                jobs.append((config, arm, run, ds))

    kept = {key: [] for key in done}
    for r in existing:
        if (r.arm, r.run) in kept:
            kept[(r.arm, r.run)].append(r)
    # rewrite to drop torn or partial runs, then append new runs as they finish
    write_records(out, [r for key in order if key in kept
                        for r in sorted(kept[key], key=lambda r: r.generation)])
    log.info("%d runs to do, %d already complete", len(jobs), len(done))

    results: dict[tuple[str, int], list[RunRecord]] = dict(kept)
    with open(out, "a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for recs in _map_jobs(jobs, config.workers):
            key = (recs[0].arm, recs[0].run)
            results[key] = recs
            for rec in recs:
                writer.writerow(format_record(rec))
            fh.flush()
            log.info("finished %s run %d: best %.1f", key[0], key[1], recs[-1].best_total)
    return [r for key in order for r in results[key]]


def _map_jobs(jobs, workers) -> Iterator[list[RunRecord]]:
    workers = workers or os.cpu_count() or 1
    if workers == 1 or len(jobs) <= 1:
        yield from map(_run_one, jobs)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map() yields in submission order, keeping the CSV deterministic
        yield from pool.map(_run_one, jobs)


@dataclass(frozen=True)
class CurveSummary:
    arm: str
    generation: int
    mean: float
    stderr: float
    runs: int


def summarize(records: Iterable[RunRecord]) -> list[CurveSummary]:
    """Mean and standard error of ``best_total`` across runs, per arm and generation.

    A single run has standard error 0.
    """
    groups: dict[tuple[str, int], list[float]] = {}
    arm_order: list[str] = []
    for r in records:
        if r.arm not in arm_order:
            arm_order.append(r.arm)
        groups.setdefault((r.arm, r.generation), []).append(r.best_total)
    if not groups:
        raise ContractError("summarize needs at least one record")
    out = []
    for arm in arm_order:
        for gen in sorted(g for a, g in groups if a == arm):
            vals = np.asarray(groups[(arm, gen)])
            se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            out.append(CurveSummary(arm, gen, float(vals.mean()), se, len(vals)))
    return out


def summary_at(summaries: Iterable[CurveSummary], generation: int) -> dict[str, CurveSummary]:
    return {s.arm: s for s in summaries if s.generation == generation}
