import numpy as np
import pytest

from devann import brain as br
from devann import tasks
from devann.cgp import CONST_ONE, NEG, CgpGenome, Genotype, NodeGene

CARTPOLE_AND_CLASSIFICATION = [br.TaskSpec("cartpole", 4, 1), br.TaskSpec("classification", 4, 1)]


def soma_genome(outputs, nodes=(NodeGene(CONST_ONE, 0, 0),)):
    return CgpGenome(8, 4, tuple(nodes), tuple(outputs))


def dendrite_genome(outputs, nodes=(NodeGene(CONST_ONE, 0, 0),)):
    return CgpGenome(8, 4, tuple(nodes), tuple(outputs))


def identity_genotype() -> Genotype:
    """Both programs copy their parameter inputs straight to the outputs."""
    return Genotype(soma_genome((0, 1, 2, 3)), dendrite_genome((2, 3, 4, 5)))


def const_health_genotype(value_node_outputs) -> Genotype:
    """Soma program whose outputs are given explicitly over [x, y, h, b, ..., 1, -1]."""
    nodes = (NodeGene(CONST_ONE, 0, 0), NodeGene(NEG, 8, 8))
    return Genotype(soma_genome(value_node_outputs, nodes), dendrite_genome((2, 3, 4, 5)))


ONE, MINUS_ONE = 8, 9  # source indices of the constant nodes in const_health_genotype


def random_brain(rng: np.random.Generator, n_hidden=None, specs=None) -> br.Brain:
    """A structurally valid brain with arbitrary hidden somas and dendrites."""
    specs = specs or CARTPOLE_AND_CLASSIFICATION
    brain = br.init_brain(specs, rng, init_dendrites_per_output=int(rng.integers(0, 9)))
    n_hidden = int(rng.integers(0, 33)) if n_hidden is None else n_hidden
    for _ in range(n_hidden):
        x, y, h, b = rng.uniform(-1, 1, 4)
        dendrites = [br.Dendrite(*rng.uniform(-1, 1, 4)) for _ in range(int(rng.integers(0, 9)))]
        brain.somas.append(br.Soma(brain.next_id, br.HIDDEN, x, y, h, b, dendrites))
        brain.next_id += 1
    for s in brain.by_kind(br.OUTPUT):
        s.bias = float(rng.uniform(-1, 1))
    return brain


@pytest.fixture(scope="session")
def dataset():
    return tasks.load_dataset(tasks.default_dataset_path())
