"""The 2-D developmental network: somas, dendrites, growth and wiring.

Somas live in ``[-1, 1]^2``. Input somas sit on the left edge (x = -1), output
somas on the right edge (x = 1), hidden somas anywhere. Each non-input soma
owns dendrites whose positions are absolute coordinates. After development a
dendrite is wired to the Euclidean-nearest soma strictly to its left, which
makes the phenotype a feed-forward DAG ordered by x.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from devann import cgp
from devann.cgp import Genotype
from devann.errors import ConfigurationError, ContractError

INPUT, HIDDEN, OUTPUT = "input", "hidden", "output"

# soma program: x, y, health, bias, mean dendrite weight, mean dendrite health, reward, phase
SOMA_PROGRAM_INPUTS = 8
SOMA_PROGRAM_OUTPUTS = 4
# dendrite program: mother x, mother y, x, y, weight, health, reward, phase
DENDRITE_PROGRAM_INPUTS = 8
DENDRITE_PROGRAM_OUTPUTS = 4

DEFAULT_CYCLES = 10
DEFAULT_THETA_BIRTH = 0.8
DEFAULT_THETA_DEATH = 0.2
DEFAULT_SOMA_CAP = 32
DEFAULT_MAX_DENDRITES = 8
DEFAULT_INIT_DENDRITES = 4
INITIAL_HEALTH = 0.5
JITTER = 0.1


def _clip(v: float) -> float:
    return -1.0 if v < -1.0 else 1.0 if v > 1.0 else v


@dataclass(slots=True)
class Dendrite:
    x: float
    y: float
    weight: float
    health: float


@dataclass(slots=True)
class Soma:
    id: int
    kind: str
    x: float
    y: float
    health: float = INITIAL_HEALTH
    bias: float = 0.0
    dendrites: list[Dendrite] = field(default_factory=list)

    def copy(self) -> "Soma":
        return Soma(self.id, self.kind, self.x, self.y, self.health, self.bias,
                    [Dendrite(d.x, d.y, d.weight, d.health) for d in self.dendrites])


@dataclass(frozen=True)
class TaskSpec:
    name: str
    num_inputs: int
    num_outputs: int


@dataclass(frozen=True)
class TaskBinding:
    name: str
    input_ids: tuple[int, ...]
    output_ids: tuple[int, ...]


@dataclass
class Brain:
    somas: list[Soma]
    task_bindings: tuple[TaskBinding, ...]
    soma_cap: int = DEFAULT_SOMA_CAP
    max_dendrites: int = DEFAULT_MAX_DENDRITES
    next_id: int = 0

    def copy(self) -> "Brain":
        return Brain([s.copy() for s in self.somas], self.task_bindings,
                     self.soma_cap, self.max_dendrites, self.next_id)

    @property
    def hidden_count(self) -> int:
        return sum(1 for s in self.somas if s.kind == HIDDEN)

    def by_kind(self, kind: str) -> list[Soma]:
        return [s for s in self.somas if s.kind == kind]

    def task_index(self, task) -> int:
        if isinstance(task, int):
            return task
        for i, b in enumerate(self.task_bindings):
            if b.name == task:
                return i
        raise ContractError(f"unknown task {task!r}")

    def to_json(self) -> dict:
        return {
            "somas": [
                {"id": s.id, "kind": s.kind, "x": s.x, "y": s.y,
                 "health": s.health, "bias": s.bias}
                for s in self.somas
            ],
            "dendrites": [
                {"mother": s.id, "x": d.x, "y": d.y, "weight": d.weight, "health": d.health}
                for s in self.somas for d in s.dendrites
            ],
            "tasks": [
                {"name": b.name, "inputs": list(b.input_ids), "outputs": list(b.output_ids)}
                for b in self.task_bindings
            ],
        }


def _spread(n: int) -> np.ndarray:
    return np.zeros(1) if n == 1 else np.linspace(-1.0, 1.0, n)


def init_brain(task_specs: Sequence[TaskSpec], rng: np.random.Generator,
               init_dendrites_per_output: int = DEFAULT_INIT_DENDRITES,
               soma_cap: int = DEFAULT_SOMA_CAP,
               max_dendrites: int = DEFAULT_MAX_DENDRITES) -> Brain:
    n_in = sum(t.num_inputs for t in task_specs)
    n_out = sum(t.num_outputs for t in task_specs)
    if n_in == 0:
        raise ConfigurationError("brain needs at least one input soma")
    if n_out == 0:
        raise ConfigurationError("brain needs at least one output soma")
    if not 0 <= init_dendrites_per_output <= max_dendrites:
        raise ConfigurationError("init_dendrites_per_output must be in [0, max_dendrites]")
    if soma_cap < 0:
        raise ConfigurationError("soma_cap must be >= 0")

    in_y, out_y = _spread(n_in), _spread(n_out)
    somas: list[Soma] = [Soma(i, INPUT, -1.0, float(in_y[i])) for i in range(n_in)]
    outputs = [Soma(n_in + k, OUTPUT, 1.0, float(out_y[k])) for k in range(n_out)]
    for s in outputs:
        for _ in range(init_dendrites_per_output):
            x, y, w = rng.uniform(-1.0, 1.0, size=3)
            s.dendrites.append(Dendrite(float(x), float(y), float(w), INITIAL_HEALTH))
    somas.extend(outputs)

    bindings, i_next, o_next = [], 0, n_in
    for t in task_specs:
        bindings.append(TaskBinding(t.name, tuple(range(i_next, i_next + t.num_inputs)),
                                    tuple(range(o_next, o_next + t.num_outputs))))
        i_next += t.num_inputs
        o_next += t.num_outputs
    return Brain(somas, tuple(bindings), soma_cap, max_dendrites, n_in + n_out)


def soma_program_inputs(somas: Sequence[Soma], reward: float = 0.0, phase: float = 0.0) -> np.ndarray:
    rows = np.empty((len(somas), SOMA_PROGRAM_INPUTS))
    for r, s in enumerate(somas):
        if s.dendrites:
            mw = sum(d.weight for d in s.dendrites) / len(s.dendrites)
            mh = sum(d.health for d in s.dendrites) / len(s.dendrites)
        else:
            mw = mh = 0.0
        rows[r] = (s.x, s.y, s.health, s.bias, mw, mh, reward, phase)
    return rows


def development_step(brain: Brain, genotype: Genotype, rng: np.random.Generator,
                     theta_birth: float = DEFAULT_THETA_BIRTH,
                     theta_death: float = DEFAULT_THETA_DEATH) -> Brain:
    """One synchronous growth cycle followed by birth/death.

    Every program reads the pre-step snapshot; results are applied afterwards.
    """
    new = brain.copy()
    movers = [s for s in new.somas if s.kind != INPUT]
    if movers:
        out = cgp.execute_batch(cgp.decode(genotype.soma_genome), soma_program_inputs(movers))
        out = np.clip(out, -1.0, 1.0)
        for s, (x, y, h, b) in zip(movers, out.tolist()):
            if s.kind == HIDDEN:
                s.x, s.y = x, y
            s.health, s.bias = h, b

    # dendrites read the mother's pre-step position
    old_pos = {s.id: (s.x, s.y) for s in brain.somas}
    owned = [(s, d) for s in new.somas for d in s.dendrites]
    if owned:
        rows = np.empty((len(owned), DENDRITE_PROGRAM_INPUTS))
        for r, (s, d) in enumerate(owned):
            mx, my = old_pos[s.id]
            rows[r] = (mx, my, d.x, d.y, d.weight, d.health, 0.0, 0.0)
        out = cgp.execute_batch(cgp.decode(genotype.dendrite_genome), rows)
        out = np.clip(out, -1.0, 1.0)
        for (_, d), (x, y, w, h) in zip(owned, out.tolist()):
            d.x, d.y, d.weight, d.health = x, y, w, h
    return birth_death_inplace(new, theta_birth, theta_death, rng)


def apply_birth_death(brain: Brain, theta_birth: float, theta_death: float,
                      rng: np.random.Generator) -> Brain:
    """Health-threshold structural rules.

    Order: hidden somas below ``theta_death`` die, then dendrites die or
    replicate, then every pre-existing non-input soma above ``theta_birth``
    spawns one hidden child while the hidden count is under ``soma_cap``.
    """
    check_thetas(theta_birth, theta_death)
    return birth_death_inplace(brain.copy(), theta_birth, theta_death, rng)


def check_thetas(theta_birth: float, theta_death: float) -> None:
    if not -1.0 <= theta_death < theta_birth <= 1.0:
        raise ConfigurationError("need -1 <= theta_death < theta_birth <= 1")


def _jittered_copies(dendrites: Sequence[Dendrite], rng: np.random.Generator) -> list[Dendrite]:
    if not dendrites:
        return []
    shift = rng.uniform(-JITTER, JITTER, size=(len(dendrites), 2)).tolist()
    return [Dendrite(_clip(d.x + sx), _clip(d.y + sy), d.weight, d.health)
            for d, (sx, sy) in zip(dendrites, shift)]


def birth_death_inplace(brain: Brain, theta_birth: float, theta_death: float,
                        rng: np.random.Generator) -> Brain:
    """:func:`apply_birth_death` without the defensive copy."""
    brain.somas = [s for s in brain.somas
                   if not (s.kind == HIDDEN and s.health < theta_death)]

    for s in brain.somas:
        if not s.dendrites:
            continue
        kept = [d for d in s.dendrites if d.health >= theta_death]
        parents = []
        for d in kept:
            if d.health > theta_birth and len(kept) + len(parents) < brain.max_dendrites:
                d.health = INITIAL_HEALTH
                parents.append(d)
        s.dendrites = kept + _jittered_copies(parents, rng)

    hidden = brain.hidden_count
    children = []
    for s in brain.somas:
        if s.kind == INPUT or s.health <= theta_birth or hidden >= brain.soma_cap:
            continue
        dx, dy = rng.uniform(-JITTER, JITTER, size=2).tolist()
        child = Soma(brain.next_id, HIDDEN, _clip(s.x + dx), _clip(s.y + dy),
                     INITIAL_HEALTH, s.bias, _jittered_copies(s.dendrites, rng))
        brain.next_id += 1
        s.health = INITIAL_HEALTH
        children.append(child)
        hidden += 1
    brain.somas.extend(children)
    return brain


def develop(brain: Brain, genotype: Genotype, cycles: int, rng: np.random.Generator,
            theta_birth: float = DEFAULT_THETA_BIRTH,
            theta_death: float = DEFAULT_THETA_DEATH) -> Brain:
    if cycles < 0:
        raise ConfigurationError("cycles must be >= 0")
    check_thetas(theta_birth, theta_death)
    if cycles == 0:
        return brain.copy()
    for _ in range(cycles):
        brain = development_step(brain, genotype, rng, theta_birth, theta_death)
    return brain


@dataclass(frozen=True)
class WiredNetwork:
    """Feed-forward phenotype in index space.

    ``order`` lists the non-input somas by ascending (x, id); each soma ``i``
    reads ``src[ptr[i]:ptr[i+1]]`` weighted by ``weight[ptr[i]:ptr[i+1]]``.
    """

    ids: np.ndarray
    kinds: tuple[str, ...]
    xs: np.ndarray
    bias: np.ndarray
    order: np.ndarray
    ptr: np.ndarray
    src: np.ndarray
    weight: np.ndarray
    task_inputs: tuple[np.ndarray, ...]
    task_outputs: tuple[np.ndarray, ...]
    task_names: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.ids)

    def task_index(self, task) -> int:
        if isinstance(task, (int, np.integer)):
            return int(task)
        try:
            return self.task_names.index(task)
        except ValueError:
            raise ContractError(f"unknown task {task!r}") from None

    def edges(self):
        """Yield ``(source_index, target_index, weight)`` for every connection."""
        for t in range(self.size):
            for k in range(self.ptr[t], self.ptr[t + 1]):
                yield int(self.src[k]), t, float(self.weight[k])


def _nearest_left(dx: np.ndarray, dy: np.ndarray, src_x: np.ndarray, src_y: np.ndarray,
                  src_id: np.ndarray) -> np.ndarray:
    """For each dendrite, the index of the nearest soma strictly to its left (-1 if none).

    Distance ties go to the smaller y, then the smaller id.
    """
    left = src_x[None, :] < dx[:, None]
    dist = np.hypot(src_x[None, :] - dx[:, None], src_y[None, :] - dy[:, None])
    dist = np.where(left, dist, np.inf)
    choice = dist.argmin(axis=1)
    best = dist[np.arange(len(dx)), choice]
    choice[np.isinf(best)] = -1
    tied = (dist == best[:, None]) & left
    for r in np.flatnonzero(tied.sum(axis=1) > 1):
        cands = np.flatnonzero(tied[r])
        choice[r] = min(cands, key=lambda i: (src_y[i], src_id[i]))
    return choice


def wire(brain: Brain) -> WiredNetwork:
    somas = brain.somas
    n = len(somas)
    ids = np.array([s.id for s in somas], dtype=np.int64)
    xs = np.array([s.x for s in somas])
    ys = np.array([s.y for s in somas])
    # output somas never act as sources
    source_x = np.where([s.kind == OUTPUT for s in somas], np.inf, xs)

    owner, dx, dy, dw = [], [], [], []
    for i, s in enumerate(somas):
        if s.kind == INPUT:
            continue
        for d in s.dendrites:
            # dendrites level with or right of their mother are pruned
            if d.x < s.x:
                owner.append(i)
                dx.append(d.x)
                dy.append(d.y)
                dw.append(d.weight)
    owner = np.array(owner, dtype=np.int64)
    if len(owner):
        source = _nearest_left(np.array(dx), np.array(dy), source_x, ys, ids)
    else:
        source = np.zeros(0, dtype=np.int64)
    keep = source >= 0
    owner, source, dw = owner[keep], source[keep], np.array(dw, dtype=float)[keep]
    ptr = np.zeros(n + 1, dtype=np.int64)
    ptr[1:] = np.cumsum(np.bincount(owner, minlength=n))

    index = {s.id: i for i, s in enumerate(somas)}
    non_input = [i for i, s in enumerate(somas) if s.kind != INPUT]
    order = np.array(sorted(non_input, key=lambda i: (xs[i], ids[i])), dtype=np.int64)
    return WiredNetwork(
        ids=ids,
        kinds=tuple(s.kind for s in somas),
        xs=xs,
        bias=np.array([s.bias for s in somas]),
        order=order,
        ptr=ptr,
        src=source,
        weight=dw,
        task_inputs=tuple(np.array([index[i] for i in b.input_ids], dtype=np.int64)
                          for b in brain.task_bindings),
        task_outputs=tuple(np.array([index[i] for i in b.output_ids], dtype=np.int64)
                           for b in brain.task_bindings),
        task_names=tuple(b.name for b in brain.task_bindings),
    )


def forward(network: WiredNetwork, task, inputs: np.ndarray) -> np.ndarray:
    """Masked batch evaluation: rows of ``inputs`` feed only ``task``'s input somas.

    Input somas missing from ``network`` (e.g. pruned by tracing) are skipped.
    """
    t = network.task_index(task)
    inputs = np.asarray(inputs, dtype=float)
    bound = network.task_inputs[t]
    if inputs.ndim != 2 or inputs.shape[1] != len(bound):
        raise ContractError(f"task {network.task_names[t]!r} expects {len(bound)} inputs, "
                            f"got shape {inputs.shape}")
    act = np.zeros((inputs.shape[0], network.size))
    present = bound >= 0
    act[:, bound[present]] = inputs[:, present]
    ptr, src, w, bias = network.ptr, network.src, network.weight, network.bias
    for i in network.order:
        lo, hi = ptr[i], ptr[i + 1]
        if lo == hi:
            act[:, i] = np.tanh(bias[i])
        else:
            act[:, i] = np.tanh(bias[i] + act[:, src[lo:hi]] @ w[lo:hi])
    return act[:, network.task_outputs[t]]


def evaluate(network: WiredNetwork, task, task_inputs: Sequence[float]) -> list[float]:
    values = np.asarray(task_inputs, dtype=float)
    t = network.task_index(task)
    if values.ndim != 1 or len(values) != len(network.task_inputs[t]):
        raise ContractError(f"task {network.task_names[t]!r} expects "
                            f"{len(network.task_inputs[t])} inputs, got {len(values)}")
    return forward(network, t, values[None, :])[0].tolist()


def trace_subnetwork(network: WiredNetwork, task) -> WiredNetwork:
    """Ancestor closure of ``task``'s output somas (reference path for tests)."""
    t = network.task_index(task)
    keep = set(int(i) for i in network.task_outputs[t])
    stack = list(keep)
    while stack:
        i = stack.pop()
        for k in range(network.ptr[i], network.ptr[i + 1]):
            j = int(network.src[k])
            if j not in keep:
                keep.add(j)
                stack.append(j)
    old = sorted(keep)
    remap = {o: n for n, o in enumerate(old)}
    ptr = [0]
    src, weight = [], []
    for o in old:
        for k in range(network.ptr[o], network.ptr[o + 1]):
            src.append(remap[int(network.src[k])])
            weight.append(network.weight[k])
        ptr.append(len(src))

    def _map(arr):
        return np.array([remap.get(int(i), -1) for i in arr], dtype=np.int64)

    return WiredNetwork(
        ids=network.ids[old],
        kinds=tuple(network.kinds[o] for o in old),
        xs=network.xs[old],
        bias=network.bias[old],
        order=np.array([remap[int(i)] for i in network.order if int(i) in keep], dtype=np.int64),
        ptr=np.array(ptr, dtype=np.int64),
        src=np.array(src, dtype=np.int64),
        weight=np.array(weight, dtype=float),
        task_inputs=(_map(network.task_inputs[t]),),
        task_outputs=(_map(network.task_outputs[t]),),
        task_names=(network.task_names[t],),
    )
