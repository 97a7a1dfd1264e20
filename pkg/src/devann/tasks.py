"""Benchmark tasks and the full develop -> learn -> score fitness pipeline."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from numba import njit

from devann import brain as br
from devann.brain import Brain, TaskSpec, WiredNetwork
from devann.cgp import Genotype
from devann.errors import ConfigurationError, ContractError, DatasetError
from devann.learning import AdConfig, ad_update, reward_from_accuracy, reward_from_cartpole

CARTPOLE = "cartpole"
CLASSIFICATION = "classification"
TASK_NAMES = (CARTPOLE, CLASSIFICATION)

MAX_TASK_SCORE = 1000.0
LEFT, RIGHT = 0, 1


@dataclass(frozen=True)
class CartpoleParams:
    tau: float = 0.02
    gravity: float = 9.8
    mass_cart: float = 1.0
    mass_pole: float = 0.1
    half_length: float = 0.5
    force: float = 10.0
    x_threshold: float = 2.4
    theta_threshold: float = 12 * 2 * math.pi / 360
    init_noise: float = 0.05
    # input scaling divisors for (x, x_dot, theta, theta_dot)
    velocity_scale: float = 4.0
    angular_velocity_scale: float = 4.0


DEFAULT_CARTPOLE = CartpoleParams()


@njit(cache=True)
def _dynamics(x, x_dot, theta, theta_dot, force, tau, g, m_c, m_p, l):
    total = m_c + m_p
    sin_t = math.sin(theta)
    cos_t = math.cos(theta)
    temp = (force + m_p * l * theta_dot * theta_dot * sin_t) / total
    theta_acc = (g * sin_t - cos_t * temp) / (l * (4.0 / 3.0 - m_p * cos_t * cos_t / total))
    x_acc = temp - m_p * l * theta_acc * cos_t / total
    return (x + tau * x_dot, x_dot + tau * x_acc,
            theta + tau * theta_dot, theta_dot + tau * theta_acc)


@njit(cache=True)
def _run_episode(order, ptr, src, weight, bias, n_somas, in_idx, out_idx, state,
                 max_steps, scales, tau, g, m_c, m_p, l, force, x_thr, th_thr):
    act = np.zeros(n_somas)
    x, x_dot, theta, theta_dot = state[0], state[1], state[2], state[3]
    for step in range(max_steps):
        obs = (x / scales[0], x_dot / scales[1], theta / scales[2], theta_dot / scales[3])
        for k in range(4):
            act[in_idx[k]] = min(1.0, max(-1.0, obs[k]))
        for i in order:
            s = 0.0
            for e in range(ptr[i], ptr[i + 1]):
                s += act[src[e]] * weight[e]
            act[i] = math.tanh(bias[i] + s)
        f = force if act[out_idx] >= 0.0 else -force
        x, x_dot, theta, theta_dot = _dynamics(x, x_dot, theta, theta_dot, f,
                                               tau, g, m_c, m_p, l)
        if abs(x) > x_thr or abs(theta) > th_thr:
            return step
    return max_steps


def cartpole_step(state, action: int, params: CartpoleParams = DEFAULT_CARTPOLE):
    """Advance ``(x, x_dot, theta, theta_dot)`` by one Euler step."""
    p = params
    f = p.force if action == RIGHT else -p.force
    return tuple(float(v) for v in _dynamics(*(float(s) for s in state), f, p.tau, p.gravity,
                                             p.mass_cart, p.mass_pole, p.half_length))


def cartpole_terminal(state, params: CartpoleParams = DEFAULT_CARTPOLE) -> bool:
    return abs(state[0]) > params.x_threshold or abs(state[2]) > params.theta_threshold


def run_cartpole_episode(network: WiredNetwork, max_steps: int, rng: np.random.Generator,
                         params: CartpoleParams = DEFAULT_CARTPOLE, task=CARTPOLE) -> int:
    """Steps survived before termination, capped at ``max_steps``."""
    t = network.task_index(task)
    in_idx, out_idx = network.task_inputs[t], network.task_outputs[t]
    if len(in_idx) != 4 or len(out_idx) != 1:
        raise ContractError("cartpole needs a 4-input, 1-output binding")
    state = rng.uniform(-params.init_noise, params.init_noise, size=4)
    if max_steps <= 0:
        return 0
    scales = np.array([params.x_threshold, params.velocity_scale,
                       params.theta_threshold, params.angular_velocity_scale])
    return int(_run_episode(network.order, network.ptr, network.src, network.weight,
                            network.bias, network.size, in_idx, int(out_idx[0]), state,
                            int(max_steps), scales, params.tau, params.gravity,
                            params.mass_cart, params.mass_pole, params.half_length,
                            params.force, params.x_threshold, params.theta_threshold))


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray  # normalized to [-1, 1]
    labels: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return len(self.labels)

    def majority_score(self) -> float:
        ones = int(self.labels.sum())
        return MAX_TASK_SCORE * max(ones, len(self) - ones) / len(self)


def normalize(raw: np.ndarray):
    """Per-column min-max map onto [-1, 1]; constant columns map to 0."""
    raw = np.asarray(raw, dtype=float)
    lower, upper = raw.min(axis=0), raw.max(axis=0)
    span = upper - lower
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, 2.0 * (raw - lower) / safe - 1.0, 0.0)
    return np.clip(scaled, -1.0, 1.0), lower, upper


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_dataset(path) -> Dataset:
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    rows, labels, width = [], [], None
    with handle:
        for lineno, fields in enumerate(csv.reader(handle), start=1):
            fields = [f.strip() for f in fields]
            if not fields or fields == [""]:
                continue
            if lineno == 1 and not all(_is_number(f) for f in fields):
                continue  # header
            if len(fields) < 2 or not all(_is_number(f) for f in fields):
                raise DatasetError(f"{path}:{lineno}: malformed line {','.join(fields)!r}")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise DatasetError(f"{path}:{lineno}: expected {width} fields, got {len(fields)}")
            label = float(fields[-1])
            if label not in (0.0, 1.0):
                raise DatasetError(f"{path}:{lineno}: label {fields[-1]!r} not in {{0, 1}}")
            rows.append([float(f) for f in fields[:-1]])
            labels.append(int(label))
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    features, lower, upper = normalize(np.array(rows))
    return Dataset(features, np.array(labels, dtype=np.int64), lower, upper)


def default_dataset_path() -> Path:
    return Path(str(resources.files("devann") / "data" / "banknote_surrogate.csv"))


def evaluate_classification(network: WiredNetwork, dataset: Dataset,
                            task=CLASSIFICATION) -> tuple[int, int]:
    out = br.forward(network, task, dataset.features)[:, 0]
    predicted = (out >= 0.0).astype(np.int64)
    return int((predicted == dataset.labels).sum()), len(dataset)


@dataclass(frozen=True)
class FitnessReport:
    cartpole_fitness: float = 0.0
    classification_fitness: float = 0.0

    @property
    def total(self) -> float:
        return self.cartpole_fitness + self.classification_fitness


@dataclass(frozen=True)
class TaskConfig:
    """Everything needed to turn a genotype into a FitnessReport."""

    tasks: tuple[str, ...] = TASK_NAMES
    dataset: Dataset | None = None
    ad: AdConfig = field(default_factory=AdConfig)
    cartpole_max_steps: int = 1000
    eval_episodes: int = 3
    dev_cycles: int = br.DEFAULT_CYCLES
    theta_birth: float = br.DEFAULT_THETA_BIRTH
    theta_death: float = br.DEFAULT_THETA_DEATH
    soma_cap: int = br.DEFAULT_SOMA_CAP
    max_dendrites: int = br.DEFAULT_MAX_DENDRITES
    init_dendrites: int = br.DEFAULT_INIT_DENDRITES
    cartpole: CartpoleParams = DEFAULT_CARTPOLE

    def __post_init__(self):
        if not self.tasks or any(t not in TASK_NAMES for t in self.tasks):
            raise ConfigurationError(f"tasks must be a non-empty subset of {TASK_NAMES}")
        if len(set(self.tasks)) != len(self.tasks):
            raise ConfigurationError("duplicate task names")
        if CLASSIFICATION in self.tasks and self.dataset is None:
            raise ConfigurationError("classification task needs a dataset")
        if self.eval_episodes < 1:
            raise ConfigurationError("eval_episodes must be >= 1")
        if self.cartpole_max_steps < 0 or self.dev_cycles < 0:
            raise ConfigurationError("cartpole_max_steps and dev_cycles must be >= 0")
        br.check_thetas(self.theta_birth, self.theta_death)

    def task_specs(self) -> list[TaskSpec]:
        specs = []
        for name in self.tasks:
            n_in = 4 if name == CARTPOLE else self.dataset.num_features
            specs.append(TaskSpec(name, n_in, 1))
        return specs

    @property
    def max_total(self) -> float:
        return MAX_TASK_SCORE * len(self.tasks)


@dataclass(frozen=True)
class EvalSeeds:
    """``develop`` drives growth randomness; ``episodes`` picks cartpole starts."""

    develop: int
    episodes: int


def grow(genotype: Genotype, config: TaskConfig, rng: np.random.Generator) -> Brain:
    brain = br.init_brain(config.task_specs(), rng, config.init_dendrites,
                          config.soma_cap, config.max_dendrites)
    return br.develop(brain, genotype, config.dev_cycles, rng,
                      config.theta_birth, config.theta_death)


def evaluate_individual(genotype: Genotype, config: TaskConfig, seeds: EvalSeeds) -> FitnessReport:
    """Develop a brain, let it learn for ``config.ad.epochs`` epochs, then score it.

    Each epoch runs one cartpole episode and one full classification pass, each
    followed by an AD update with the matching reward. With an empty AD mask the
    episodes still run but nothing changes.
    """
    rng = np.random.default_rng(seeds.develop)
    brain = grow(genotype, config, rng)
    net = br.wire(brain)
    ad = config.ad
    has_cp, has_cls = CARTPOLE in config.tasks, CLASSIFICATION in config.tasks

    def learn(brain, net, reward):
        updated = ad_update(brain, genotype, ad, reward, rng,
                            config.theta_birth, config.theta_death)
        return (brain, net) if updated is brain else (updated, br.wire(updated))

    for epoch in range(ad.epochs):
        if has_cp:
            ep_rng = np.random.default_rng([seeds.episodes, 0, epoch])
            steps = run_cartpole_episode(net, config.cartpole_max_steps, ep_rng, config.cartpole)
            brain, net = learn(brain, net, reward_from_cartpole(steps, config.cartpole_max_steps))
        if has_cls:
            correct, total = evaluate_classification(net, config.dataset)
            brain, net = learn(brain, net, reward_from_accuracy(correct, total))

    cp_fit = cls_fit = 0.0
    if has_cp:
        steps = [run_cartpole_episode(net, config.cartpole_max_steps,
                                      np.random.default_rng([seeds.episodes, 1, k]),
                                      config.cartpole)
                 for k in range(config.eval_episodes)]
        if config.cartpole_max_steps > 0:
            cp_fit = MAX_TASK_SCORE * float(np.mean(steps)) / config.cartpole_max_steps
    if has_cls:
        correct, total = evaluate_classification(net, config.dataset)
        cls_fit = MAX_TASK_SCORE * correct / total
    return FitnessReport(cp_fit, cls_fit)
