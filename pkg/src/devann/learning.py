"""Activity dependence (AD): reward-driven soma updates during task performance.

During learning the soma program runs with the reward channel set and the
phase flag raised. Its outputs replace only the soma parameters named in the
AD mask; every other parameter, all dendrites and all input somas are left
alone.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from devann import cgp
from devann.brain import (
    DEFAULT_THETA_BIRTH, DEFAULT_THETA_DEATH, HIDDEN, INPUT, Brain,
    birth_death_inplace, check_thetas, soma_program_inputs,
)
from devann.cgp import Genotype
from devann.errors import ConfigurationError, ContractError

AD_PARAMETERS = ("bias", "health", "position")
DEFAULT_AD_EPOCHS = 5


@dataclass(frozen=True)
class AdConfig:
    mask: frozenset[str] = frozenset()
    epochs: int = DEFAULT_AD_EPOCHS
    structural_updates: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mask", frozenset(self.mask))
        unknown = self.mask - set(AD_PARAMETERS)
        if unknown:
            raise ConfigurationError(f"unknown AD parameters {sorted(unknown)}; "
                                     f"choose from {AD_PARAMETERS}")
        if self.epochs < 0:
            raise ConfigurationError("AD epochs must be >= 0")

    @classmethod
    def from_list(cls, names: Iterable[str], **kwargs) -> "AdConfig":
        return cls(frozenset(names), **kwargs)

    @property
    def enabled(self) -> bool:
        return bool(self.mask)

    def to_list(self) -> list[str]:
        return [p for p in AD_PARAMETERS if p in self.mask]


@dataclass(frozen=True)
class RewardSignal:
    value: float

    def __post_init__(self):
        if not -1.0 <= self.value <= 1.0:
            raise ContractError(f"reward {self.value} outside [-1, 1]")


def reward_from_cartpole(steps: int, max_steps: int) -> RewardSignal:
    if max_steps <= 0:
        # nothing to survive; treat as a full-length episode
        return RewardSignal(1.0)
    if not 0 <= steps <= max_steps:
        raise ContractError(f"steps {steps} outside [0, {max_steps}]")
    return RewardSignal(2.0 * steps / max_steps - 1.0)


def reward_from_accuracy(correct: int, total: int) -> RewardSignal:
    if total <= 0:
        raise ContractError("accuracy reward needs total > 0")
    if not 0 <= correct <= total:
        raise ContractError(f"correct {correct} outside [0, {total}]")
    return RewardSignal(2.0 * correct / total - 1.0)


def ad_update(brain: Brain, genotype: Genotype, config: AdConfig, reward: RewardSignal,
              rng: np.random.Generator,
              theta_birth: float = DEFAULT_THETA_BIRTH,
              theta_death: float = DEFAULT_THETA_DEATH) -> Brain:
    """Apply one AD step and return the updated brain (the input is not modified)."""
    if not config.mask:
        return brain
    check_thetas(theta_birth, theta_death)
    new = brain.copy()
    somas = [s for s in new.somas if s.kind != INPUT]
    if not somas:
        return new
    rows = soma_program_inputs(somas, reward=reward.value, phase=1.0)
    out = np.clip(cgp.execute_batch(cgp.decode(genotype.soma_genome), rows), -1.0, 1.0)
    mask = config.mask
    for s, (x, y, h, b) in zip(somas, out.tolist()):
        if "position" in mask and s.kind == HIDDEN:
            s.x, s.y = x, y
        if "health" in mask:
            s.health = h
        if "bias" in mask:
            s.bias = b
    if "health" in mask and config.structural_updates:
        new = birth_death_inplace(new, theta_birth, theta_death, rng)
    return new
