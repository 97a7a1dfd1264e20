import json
import math

import numpy as np
import pytest

from devann import brain as br
from devann import cgp
from devann.errors import ConfigurationError, ContractError

from conftest import (CARTPOLE_AND_CLASSIFICATION, MINUS_ONE, const_health_genotype,
                      identity_genotype, random_brain)


def fields_of(brain):
    return json.dumps(brain.to_json(), sort_keys=True)


def brain_with(somas, tasks=None):
    tasks = tasks or (br.TaskBinding("t", tuple(s.id for s in somas if s.kind == br.INPUT),
                                     tuple(s.id for s in somas if s.kind == br.OUTPUT)),)
    return br.Brain(list(somas), tasks, next_id=max(s.id for s in somas) + 1)


# ---- init_brain -------------------------------------------------------------

def test_init_two_tasks():
    b = br.init_brain(CARTPOLE_AND_CLASSIFICATION, np.random.default_rng(0))
    inputs, outputs = b.by_kind(br.INPUT), b.by_kind(br.OUTPUT)
    assert len(inputs) == 8 and all(s.x == -1.0 for s in inputs)
    assert len(outputs) == 2 and all(s.x == 1.0 for s in outputs)
    assert b.hidden_count == 0
    assert sum(len(s.dendrites) for s in b.somas) == 8
    assert all(d.health == 0.5 for s in outputs for d in s.dendrites)
    assert all(s.health == 0.5 for s in b.somas)
    ys = [s.y for s in inputs]
    assert np.allclose(np.diff(ys), ys[1] - ys[0])
    assert b.task_bindings[0].input_ids == (0, 1, 2, 3)
    assert b.task_bindings[1].output_ids == (9,)


def test_init_minimal():
    b = br.init_brain([br.TaskSpec("t", 1, 1)], np.random.default_rng(0), 1)
    assert len(b.somas) == 2 and len(b.somas[1].dendrites) == 1


def test_init_deterministic():
    a = br.init_brain(CARTPOLE_AND_CLASSIFICATION, np.random.default_rng(4))
    b = br.init_brain(CARTPOLE_AND_CLASSIFICATION, np.random.default_rng(4))
    assert fields_of(a) == fields_of(b)


def test_init_without_inputs_fails():
    with pytest.raises(ConfigurationError):
        br.init_brain([br.TaskSpec("t", 0, 1)], np.random.default_rng(0))


# ---- development ------------------------------------------------------------

def test_identity_step_leaves_brain_unchanged():
    b = random_brain(np.random.default_rng(1), n_hidden=5)
    for s in b.somas:
        s.health = 0.5
        for d in s.dendrites:
            d.health = 0.5
    after = br.development_step(b, identity_genotype(), np.random.default_rng(0))
    assert fields_of(after) == fields_of(b)


def test_health_minus_one_kills_all_hidden():
    b = random_brain(np.random.default_rng(2), n_hidden=10)
    g = const_health_genotype((0, 1, MINUS_ONE, 3))
    after = br.development_step(b, g, np.random.default_rng(0))
    assert after.hidden_count == 0
    assert len(after.by_kind(br.OUTPUT)) == 2 and len(after.by_kind(br.INPUT)) == 8


def test_development_step_deterministic_and_pure():
    rng = np.random.default_rng(3)
    b = random_brain(rng, n_hidden=8)
    g = cgp.random_genotype(64, rng)
    before = fields_of(b)
    a1 = br.development_step(b, g, np.random.default_rng(9))
    a2 = br.development_step(b, g, np.random.default_rng(9))
    assert fields_of(a1) == fields_of(a2)
    assert fields_of(b) == before


def test_output_somas_keep_position_during_development():
    rng = np.random.default_rng(5)
    for _ in range(30):
        b = br.init_brain(CARTPOLE_AND_CLASSIFICATION, rng)
        pos = [(s.x, s.y) for s in b.by_kind(br.OUTPUT)]
        b = br.develop(b, cgp.random_genotype(64, rng), 10, rng)
        assert [(s.x, s.y) for s in b.by_kind(br.OUTPUT)] == pos


def test_input_somas_never_change():
    rng = np.random.default_rng(6)
    for _ in range(30):
        b = br.init_brain(CARTPOLE_AND_CLASSIFICATION, rng)
        snap = [br.Soma.copy(s) for s in b.by_kind(br.INPUT)]
        b = br.develop(b, cgp.random_genotype(64, rng), 10, rng)
        assert b.by_kind(br.INPUT) == snap


def test_develop_zero_cycles():
    b = random_brain(np.random.default_rng(7))
    assert fields_of(br.develop(b, identity_genotype(), 0, np.random.default_rng(0))) == fields_of(b)


def test_develop_identity_ten_cycles():
    b = br.init_brain(CARTPOLE_AND_CLASSIFICATION, np.random.default_rng(8))
    after = br.develop(b, identity_genotype(), 10, np.random.default_rng(0))
    assert fields_of(after) == fields_of(b)


def test_develop_deterministic():
    rng = np.random.default_rng(10)
    g = cgp.random_genotype(64, rng)
    b = br.init_brain(CARTPOLE_AND_CLASSIFICATION, rng)
    runs = [fields_of(br.develop(b, g, 10, np.random.default_rng(77))) for _ in range(2)]
    assert runs[0] == runs[1]


def test_bounds_and_caps_under_long_development():
    rng = np.random.default_rng(11)
    for _ in range(40):
        g = cgp.random_genotype(64, rng)
        b = br.init_brain(CARTPOLE_AND_CLASSIFICATION, rng, soma_cap=12, max_dendrites=5)
        for _ in range(25):
            b = br.development_step(b, g, rng)
            assert b.hidden_count <= 12
            assert len(b.by_kind(br.INPUT)) == 8 and len(b.by_kind(br.OUTPUT)) == 2
            ids = [s.id for s in b.somas]
            assert len(ids) == len(set(ids))
            for s in b.somas:
                assert all(-1 <= v <= 1 for v in (s.x, s.y, s.health, s.bias))
                assert len(s.dendrites) <= 5
                for d in s.dendrites:
                    assert all(-1 <= v <= 1 for v in (d.x, d.y, d.weight, d.health))


# ---- birth / death -----------------------------------------------------------

def _simple_brain(hidden_health=0.5, output_health=0.5, n_hidden=1, cap=32):
    somas = [br.Soma(0, br.INPUT, -1.0, 0.0),
             br.Soma(1, br.OUTPUT, 1.0, 0.0, output_health, 0.2,
                     [br.Dendrite(0.0, 0.1, 0.5, 0.5), br.Dendrite(0.3, -0.2, -0.4, 0.5)])]
    for k in range(n_hidden):
        somas.append(br.Soma(2 + k, br.HIDDEN, 0.0, 0.0, hidden_health))
    b = brain_with(somas)
    b.soma_cap = cap
    return b


def test_low_health_hidden_soma_removed():
    b = br.apply_birth_death(_simple_brain(hidden_health=0.1), 0.8, 0.2, np.random.default_rng(0))
    assert b.hidden_count == 0


def test_high_health_output_spawns_child():
    b = br.apply_birth_death(_simple_brain(output_health=0.9, n_hidden=0), 0.8, 0.2,
                             np.random.default_rng(0))
    assert b.hidden_count == 1
    out = b.by_kind(br.OUTPUT)[0]
    child = b.by_kind(br.HIDDEN)[0]
    assert out.health == 0.5 and child.health == 0.5
    assert child.bias == out.bias
    assert abs(child.x - 1.0) <= 0.1 and abs(child.y) <= 0.1
    assert len(child.dendrites) == 2
    for d, pd in zip(child.dendrites, out.dendrites):
        assert abs(d.x - pd.x) <= 0.1 and abs(d.y - pd.y) <= 0.1 and d.weight == pd.weight


def test_no_birth_at_cap():
    b = _simple_brain(hidden_health=0.95, n_hidden=3, cap=3)
    after = br.apply_birth_death(b, 0.8, 0.2, np.random.default_rng(0))
    assert after.hidden_count == 3


def test_dendrite_death_and_replication():
    b = _simple_brain()
    out = b.by_kind(br.OUTPUT)[0]
    out.dendrites[0].health = 0.1
    out.dendrites[1].health = 0.9
    after = br.apply_birth_death(b, 0.8, 0.2, np.random.default_rng(0))
    ds = after.by_kind(br.OUTPUT)[0].dendrites
    assert len(ds) == 2
    assert all(d.health == 0.5 for d in ds)
    assert abs(ds[1].x - ds[0].x) <= 0.1 and ds[1].weight == ds[0].weight


def test_dendrite_replication_respects_max():
    b = _simple_brain()
    b.max_dendrites = 2
    for d in b.by_kind(br.OUTPUT)[0].dendrites:
        d.health = 0.9
    after = br.apply_birth_death(b, 0.8, 0.2, np.random.default_rng(0))
    assert len(after.by_kind(br.OUTPUT)[0].dendrites) == 2


def test_input_and_output_somas_never_die():
    b = _simple_brain(output_health=-1.0)
    b.somas[0].health = -1.0
    after = br.apply_birth_death(b, 0.8, 0.2, np.random.default_rng(0))
    assert len(after.by_kind(br.OUTPUT)) == 1 and len(after.by_kind(br.INPUT)) == 1


def test_bad_thresholds():
    with pytest.raises(ConfigurationError):
        br.apply_birth_death(_simple_brain(), 0.2, 0.8, np.random.default_rng(0))


# ---- wiring -------------------------------------------------------------------

def test_wire_nearest_left():
    somas = [
        br.Soma(0, br.INPUT, -1.0, 0.0),
        br.Soma(1, br.HIDDEN, 0.4, 0.5),
        br.Soma(2, br.HIDDEN, 0.45, 0.9),
        br.Soma(3, br.HIDDEN, 0.6, 0.5),
        br.Soma(4, br.OUTPUT, 1.0, 0.0, dendrites=[br.Dendrite(0.5, 0.5, 1.0, 0.5)]),
    ]
    net = br.wire(brain_with(somas))
    edges = list(net.edges())
    assert edges == [(1, 4, 1.0)]
    # hand check of the two candidate distances
    assert math.hypot(0.1, 0.0) == pytest.approx(0.1)
    assert math.hypot(0.05, 0.4) == pytest.approx(0.403, abs=1e-3)


def test_dendrite_level_with_mother_is_pruned():
    somas = [br.Soma(0, br.INPUT, -1.0, 0.0),
             br.Soma(1, br.HIDDEN, 0.2, 0.0, dendrites=[br.Dendrite(0.2, 0.0, 1.0, 0.5)]),
             br.Soma(2, br.OUTPUT, 1.0, 0.0)]
    assert list(br.wire(brain_with(somas)).edges()) == []


def test_dendrite_with_no_left_candidate_is_pruned():
    somas = [br.Soma(0, br.INPUT, -1.0, 0.0),
             br.Soma(1, br.OUTPUT, 1.0, 0.0, dendrites=[br.Dendrite(-1.0, 0.0, 1.0, 0.5)])]
    assert list(br.wire(brain_with(somas)).edges()) == []


def test_wire_tie_breaks_on_y_then_id():
    somas = [br.Soma(0, br.INPUT, -1.0, 0.2),
             br.Soma(1, br.INPUT, -1.0, -0.2),
             br.Soma(2, br.OUTPUT, 1.0, 0.0, dendrites=[br.Dendrite(0.0, 0.0, 1.0, 0.5)])]
    assert [e[0] for e in br.wire(brain_with(somas)).edges()] == [1]
    somas = [br.Soma(5, br.HIDDEN, 0.0, 0.3),
             br.Soma(3, br.HIDDEN, 0.0, 0.3),
             br.Soma(0, br.INPUT, -1.0, 0.0),
             br.Soma(9, br.OUTPUT, 1.0, 0.0, dendrites=[br.Dendrite(0.5, 0.3, 1.0, 0.5)])]
    net = br.wire(brain_with(somas))
    assert [int(net.ids[e[0]]) for e in net.edges()] == [3]


def test_wiring_is_acyclic_on_fuzzed_brains():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        net = br.wire(random_brain(rng))
        for s, t, _ in net.edges():
            assert net.xs[s] < net.xs[t]
            assert net.kinds[s] != br.OUTPUT
        pos = {int(i): k for k, i in enumerate(net.order)}
        for s, t, _ in net.edges():
            if net.kinds[s] != br.INPUT:
                assert pos[s] < pos[t]


# ---- evaluation ---------------------------------------------------------------

def test_output_without_dendrites_emits_tanh_bias():
    somas = [br.Soma(0, br.INPUT, -1.0, 0.0), br.Soma(1, br.OUTPUT, 1.0, 0.0, bias=0.0)]
    assert br.evaluate(br.wire(brain_with(somas)), 0, [0.7]) == [0.0]


def test_single_dendrite_to_input():
    somas = [br.Soma(0, br.INPUT, -1.0, 0.0),
             br.Soma(1, br.OUTPUT, 1.0, 0.0, bias=0.0, dendrites=[br.Dendrite(0.0, 0.0, 1.0, 0.5)])]
    out = br.evaluate(br.wire(brain_with(somas)), 0, [0.5])
    assert out[0] == pytest.approx(math.tanh(0.5), abs=1e-15)
    assert out[0] == pytest.approx(0.4621, abs=1e-4)


def test_masking_other_task_sees_zero_inputs():
    rng = np.random.default_rng(13)
    for _ in range(50):
        net = br.wire(random_brain(rng))
        x = rng.uniform(-1, 1, 4)
        # driving task 0 leaves task 1's output where all-zero task-1 inputs put it
        full = br.forward(net, 0, x[None, :])
        assert full.shape == (1, 1)
        act_b = br.evaluate(net, 1, [0.0] * 4)
        # recompute with an explicit activation table where only task 0 inputs are set
        act = np.zeros(net.size)
        act[net.task_inputs[0]] = x
        for i in net.order:
            lo, hi = net.ptr[i], net.ptr[i + 1]
            act[i] = np.tanh(net.bias[i] + act[net.src[lo:hi]] @ net.weight[lo:hi])
        assert act[net.task_outputs[0]].tolist() == full[0].tolist()
        uses_task0 = any(s in set(net.task_inputs[0].tolist())
                         for s, *_ in br.trace_subnetwork(net, 1).edges())
        if not uses_task0:
            assert act[net.task_outputs[1]].tolist() == act_b


def test_evaluate_arity_mismatch():
    net = br.wire(random_brain(np.random.default_rng(0)))
    with pytest.raises(ContractError):
        br.evaluate(net, 0, [0.1, 0.2])


def test_trace_direct_ancestry():
    somas = [br.Soma(0, br.INPUT, -1.0, -0.5), br.Soma(1, br.INPUT, -1.0, 0.5),
             br.Soma(2, br.INPUT, -1.0, 0.9),
             br.Soma(3, br.OUTPUT, 1.0, 0.0, dendrites=[br.Dendrite(0.0, -0.5, 1.0, 0.5),
                                                       br.Dendrite(0.0, 0.5, 1.0, 0.5)]),
             br.Soma(4, br.HIDDEN, 0.0, 0.0)]
    b = brain_with(somas)
    sub = br.trace_subnetwork(br.wire(b), 0)
    assert sorted(sub.ids.tolist()) == [0, 1, 3]


def test_isolated_hidden_soma_excluded_from_traces():
    rng = np.random.default_rng(14)
    b = random_brain(rng, n_hidden=0)
    b.somas.append(br.Soma(b.next_id, br.HIDDEN, 0.99, 0.99))
    net = br.wire(b)
    for t in range(2):
        assert b.next_id not in br.trace_subnetwork(net, t).ids.tolist()


def test_masked_equals_traced_on_developed_brains():
    rng = np.random.default_rng(15)
    checked = 0
    while checked < 100:
        g = cgp.random_genotype(64, rng)
        b = br.develop(br.init_brain(CARTPOLE_AND_CLASSIFICATION, rng), g, 10, rng)
        net = br.wire(b)
        if len(net.src) == 0 and rng.random() < 0.8:
            continue  # keep most samples non-trivial
        checked += 1
        for t in range(2):
            sub = br.trace_subnetwork(net, t)
            xs = rng.uniform(-1, 1, (5, 4))
            assert br.forward(net, t, xs).tolist() == br.forward(sub, 0, xs).tolist()


def test_brain_json_snapshot_schema():
    b = random_brain(np.random.default_rng(16), n_hidden=3)
    obj = json.loads(json.dumps(b.to_json()))
    assert {"id", "kind", "x", "y", "health", "bias"} == set(obj["somas"][0])
    assert {"mother", "x", "y", "weight", "health"} == set(obj["dendrites"][0])
    assert len(obj["dendrites"]) == sum(len(s.dendrites) for s in b.somas)
