"""Cartesian Genetic Programming for the soma and dendrite growth rules.

A genome is a single row of ``genome_length`` two-input nodes with unrestricted
levels-back. Node ``i`` may read any program input or any node ``j < i``;
source indices ``0 .. num_inputs-1`` address the inputs and
``num_inputs + j`` addresses node ``j``. Every primitive maps ``[-1, 1]^2``
into ``[-1, 1]``.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from devann.errors import ConfigurationError, ContractError

DEFAULT_GENOME_LENGTH = 64
DEFAULT_MUTATION_RATE = 0.05
DIV_EPSILON = 1e-6

ADD, SUB, MULT, DIV, ABS, NEG, MIN, MAX, STEP, TANH, CONST_ONE, CONST_ZERO = range(12)

FUNCTION_NAMES = (
    "add", "sub", "mult", "div", "abs", "neg",
    "min", "max", "step", "tanh", "one", "zero",
)
NUM_FUNCTIONS = len(FUNCTION_NAMES)


def clamp(v):
    return np.minimum(1.0, np.maximum(-1.0, v))


def apply_function(fid: int, a, b):
    """Evaluate primitive ``fid`` on scalars or equally shaped arrays."""
    if fid == ADD:
        return clamp(a + b)
    if fid == SUB:
        return clamp(a - b)
    if fid == MULT:
        return clamp(a * b)
    if fid == DIV:
        small = np.abs(b) < DIV_EPSILON
        safe_b = np.where(small, 1.0, b)
        return np.where(small, a, clamp(a / safe_b))
    if fid == ABS:
        return np.abs(a)
    if fid == NEG:
        return -a
    if fid == MIN:
        return np.minimum(a, b)
    if fid == MAX:
        return np.maximum(a, b)
    if fid == STEP:
        return np.where(a > 0, 1.0, -1.0)
    if fid == TANH:
        return np.tanh(a)
    if fid == CONST_ONE:
        return np.ones_like(a)
    if fid == CONST_ZERO:
        return np.zeros_like(a)
    raise ContractError(f"unknown function id {fid}")


class NodeGene(NamedTuple):
    function_id: int
    in_a: int
    in_b: int


@dataclass(frozen=True)
class CgpGenome:
    num_inputs: int
    num_outputs: int
    nodes: tuple[NodeGene, ...]
    output_genes: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.nodes)

    def validate(self) -> None:
        """Raise :class:`ContractError` unless every gene is in its legal range."""
        if self.num_inputs < 1 or self.num_outputs < 1 or not self.nodes:
            raise ContractError("genome needs at least one input, output and node")
        for i, node in enumerate(self.nodes):
            if not 0 <= node.function_id < NUM_FUNCTIONS:
                raise ContractError(f"node {i}: function id {node.function_id} out of range")
            limit = self.num_inputs + i
            if not (0 <= node.in_a < limit and 0 <= node.in_b < limit):
                raise ContractError(f"node {i}: connection outside [0, {limit})")
        if len(self.output_genes) != self.num_outputs:
            raise ContractError("output gene count does not match num_outputs")
        limit = self.num_inputs + len(self.nodes)
        for g in self.output_genes:
            if not 0 <= g < limit:
                raise ContractError(f"output gene {g} outside [0, {limit})")

    def to_json(self) -> dict:
        return {
            "inputs": self.num_inputs,
            "outputs": self.num_outputs,
            "nodes": [list(n) for n in self.nodes],
            "output_genes": list(self.output_genes),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CgpGenome":
        genome = cls(
            num_inputs=int(obj["inputs"]),
            num_outputs=int(obj["outputs"]),
            nodes=tuple(NodeGene(*(int(v) for v in n)) for n in obj["nodes"]),
            output_genes=tuple(int(g) for g in obj["output_genes"]),
        )
        genome.validate()
        return genome


@dataclass(frozen=True)
class Genotype:
    """The pair of growth programs carried by one individual."""

    soma_genome: CgpGenome
    dendrite_genome: CgpGenome

    def to_json(self) -> dict:
        return {"soma": self.soma_genome.to_json(), "dendrite": self.dendrite_genome.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "Genotype":
        return cls(CgpGenome.from_json(obj["soma"]), CgpGenome.from_json(obj["dendrite"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@dataclass(frozen=True)
class ActiveProgram:
    num_inputs: int
    num_outputs: int
    # (position, gene) in ascending position, i.e. topological order
    active: tuple[tuple[int, NodeGene], ...]
    output_genes: tuple[int, ...]

    @property
    def active_positions(self) -> tuple[int, ...]:
        return tuple(pos for pos, _ in self.active)


def _check_arity(num_inputs: int, num_outputs: int, genome_length: int) -> None:
    if num_inputs < 1 or num_outputs < 1:
        raise ConfigurationError("program arities must be >= 1")
    if genome_length < 1:
        raise ConfigurationError("genome_length must be >= 1")


def random_genome(num_inputs: int, num_outputs: int, genome_length: int,
                  rng: np.random.Generator) -> CgpGenome:
    _check_arity(num_inputs, num_outputs, genome_length)
    nodes = []
    for i in range(genome_length):
        fid, a, b = (int(v) for v in rng.integers(0, [NUM_FUNCTIONS, num_inputs + i, num_inputs + i]))
        nodes.append(NodeGene(fid, a, b))
    outputs = rng.integers(0, num_inputs + genome_length, size=num_outputs)
    return CgpGenome(num_inputs, num_outputs, tuple(nodes), tuple(int(g) for g in outputs))


def random_genotype(genome_length: int, rng: np.random.Generator) -> Genotype:
    from devann.brain import DENDRITE_PROGRAM_INPUTS, DENDRITE_PROGRAM_OUTPUTS
    from devann.brain import SOMA_PROGRAM_INPUTS, SOMA_PROGRAM_OUTPUTS

    return Genotype(
        random_genome(SOMA_PROGRAM_INPUTS, SOMA_PROGRAM_OUTPUTS, genome_length, rng),
        random_genome(DENDRITE_PROGRAM_INPUTS, DENDRITE_PROGRAM_OUTPUTS, genome_length, rng),
    )


def _uses_b(fid: int) -> bool:
    return fid in (ADD, SUB, MULT, DIV, MIN, MAX)


def _uses_a(fid: int) -> bool:
    return fid not in (CONST_ONE, CONST_ZERO)


@functools.lru_cache(maxsize=4096)
def decode(genome: CgpGenome) -> ActiveProgram:
    """Return the nodes reachable from the outputs, in topological order.

    Connections that the node's function ignores do not make their source
    active (unary functions ignore ``in_b``, constants ignore both).
    """
    n_in = genome.num_inputs
    needed = [False] * genome.length
    for g in genome.output_genes:
        if g >= n_in:
            needed[g - n_in] = True
    for i in range(genome.length - 1, -1, -1):
        if not needed[i]:
            continue
        node = genome.nodes[i]
        if _uses_a(node.function_id) and node.in_a >= n_in:
            needed[node.in_a - n_in] = True
        if _uses_b(node.function_id) and node.in_b >= n_in:
            needed[node.in_b - n_in] = True
    active = tuple((i, genome.nodes[i]) for i in range(genome.length) if needed[i])
    return ActiveProgram(n_in, genome.num_outputs, active, genome.output_genes)


def execute_batch(program: ActiveProgram, inputs: np.ndarray) -> np.ndarray:
    """Run ``program`` on every row of ``inputs`` (shape ``(n, num_inputs)``)."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != program.num_inputs:
        raise ContractError(
            f"expected inputs of shape (n, {program.num_inputs}), got {inputs.shape}")
    n_in = program.num_inputs
    values: dict[int, np.ndarray] = {i: inputs[:, i] for i in range(n_in)}
    for pos, node in program.active:
        fid = node.function_id
        if fid == CONST_ONE:
            values[n_in + pos] = np.ones(len(inputs))
        elif fid == CONST_ZERO:
            values[n_in + pos] = np.zeros(len(inputs))
        else:
            values[n_in + pos] = apply_function(fid, values[node.in_a], values.get(node.in_b))
    return np.stack([values[g] for g in program.output_genes], axis=1)


def execute(program: ActiveProgram, inputs: Sequence[float]) -> list[float]:
    if len(inputs) != program.num_inputs:
        raise ContractError(f"expected {program.num_inputs} inputs, got {len(inputs)}")
    return [float(v) for v in execute_batch(program, np.asarray(inputs, dtype=float)[None, :])[0]]


def mutate(genome: CgpGenome, rate: float, rng: np.random.Generator) -> CgpGenome:
    """Point mutation: every gene is resampled from its legal range with probability ``rate``."""
    if not 0.0 <= rate <= 1.0:
        raise ConfigurationError(f"mutation rate {rate} not in [0, 1]")
    n_in, length = genome.num_inputs, genome.length
    hits = rng.random((length, 3)) < rate
    out_hits = rng.random(genome.num_outputs) < rate
    nodes = list(genome.nodes)
    for i in np.flatnonzero(hits.any(axis=1)):
        fid, a, b = nodes[i]
        if hits[i, 0]:
            fid = int(rng.integers(NUM_FUNCTIONS))
        if hits[i, 1]:
            a = int(rng.integers(n_in + i))
        if hits[i, 2]:
            b = int(rng.integers(n_in + i))
        nodes[i] = NodeGene(fid, a, b)
    outputs = list(genome.output_genes)
    for k in np.flatnonzero(out_hits):
        outputs[k] = int(rng.integers(n_in + length))
    return CgpGenome(n_in, genome.num_outputs, tuple(nodes), tuple(outputs))


def mutate_genotype(genotype: Genotype, rate: float, rng: np.random.Generator) -> Genotype:
    return Genotype(mutate(genotype.soma_genome, rate, rng),
                    mutate(genotype.dendrite_genome, rate, rng))
