import math

import pytest

from plusmesh import engine
from plusmesh.analysis import event_record
from plusmesh.engine import (CheckpointError, ConfigurationError, Event,
                             IntegrityViolation, World, arbitrate, checkpoint,
                             init_world, restore)
from plusmesh.physics import PhysicsParams, Rng
from plusmesh.rules import Machine
from worldlib import build_strand, new_world, quiet_params


def test_init_world_layout():
    w = init_world([2, 2, 2], {2: 12}, rng_seed=5)
    assert len(w.machines) == 15
    seed = w.machines[:3]
    assert [m.type for m in seed] == [2, 2, 2]
    assert all(m.seed_gene and m.seed_phene for m in seed)
    assert seed[0].right == 1 and seed[1].left == 0 and seed[1].right == 2
    assert seed[0].y == seed[1].y == seed[2].y
    assert seed[1].x - seed[0].x == pytest.approx(2.0)
    free = w.machines[3:]
    assert all(m.is_free and not m.seed_gene for m in free)
    # minimum spacing between middles
    pts = [(m.x, m.y) for m in w.machines]
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            assert math.dist(pts[i], pts[j]) >= 0.5 - 1e-12


def test_init_world_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        init_world([2, 2], {})
    with pytest.raises(ConfigurationError):
        init_world([2, 2, 2], {2: -1})
    with pytest.raises(ConfigurationError):
        init_world([2] * 30, {}, params=PhysicsParams(
            container_width=10, container_height=10))


def test_machine_count_is_conserved():
    w = init_world([2, 2, 2], {2: 8}, rng_seed=2)
    for _ in range(500):
        engine.step(w)
        assert len(w.machines) == 11


def test_same_seed_same_trace():
    def trace(seed):
        w = init_world([2, 2, 2], {2: 8}, rng_seed=seed)
        return [event_record(e) for e in engine.run(w, 3000)], checkpoint(w)

    t1, c1 = trace(7)
    t2, c2 = trace(7)
    _, c3 = trace(8)
    assert t1 == t2 and c1 == c2
    assert c1 != c3


def test_grid_and_naive_paths_agree():
    w1 = init_world([2, 2, 2], {2: 10}, rng_seed=4)
    w2 = init_world([2, 2, 2], {2: 10}, rng_seed=4)
    e1, e2 = [], []
    for _ in range(2000):
        e1.extend(engine.step(w1, use_grid=True))
        e2.extend(engine.step(w2, use_grid=False))
    assert [event_record(e) for e in e1] == [event_record(e) for e in e2]
    assert checkpoint(w1) == checkpoint(w2)


def test_eval_order_is_irrelevant():
    import random
    w1 = init_world([2, 2, 2], {2: 10}, rng_seed=9)
    w2 = init_world([2, 2, 2], {2: 10}, rng_seed=9)
    shuffler = random.Random(123)
    n = len(w1.machines)
    e1, e2 = [], []
    for _ in range(2000):
        order = list(range(n))
        shuffler.shuffle(order)
        e1.extend(engine.step(w1))
        e2.extend(engine.step(w2, eval_order=order))
    assert [event_record(e) for e in e1] == [event_record(e) for e in e2]
    assert checkpoint(w1) == checkpoint(w2)


def test_checkpoint_roundtrip_is_lossless():
    w = init_world([2, 4, 2], {2: 5, 4: 3}, rng_seed=11)
    engine.run(w, 500)
    blob = checkpoint(w)
    assert blob[:4] == b"JV2S"
    w2 = restore(blob)
    assert checkpoint(w2) == blob
    assert w2.step_number == w.step_number
    assert w2.rng.state() == w.rng.state()
    for a, b in zip(w.machines, w2.machines):
        assert repr(a) == repr(b)
        assert (a.x, a.y, a.heading, a.vx, a.vy, a.omega) == \
            (b.x, b.y, b.heading, b.vx, b.vy, b.omega)
        assert (a.fold_counter, a.split_state, a.strand_position) == \
            (b.fold_counter, b.split_state, b.strand_position)


def test_restore_rejects_garbage():
    w = init_world([2, 2, 2], {}, rng_seed=0)
    blob = checkpoint(w)
    with pytest.raises(CheckpointError):
        restore(b"NOPE" + blob[4:])
    with pytest.raises(CheckpointError):
        restore(blob[:-10])
    with pytest.raises(CheckpointError):
        restore(blob + b"\x00")


def test_validate_catches_asymmetric_bonds():
    ms = build_strand([2, 2, 2], x0=20, y0=20)
    ms[1].left = None  # break symmetry by hand
    w = new_world(ms)
    with pytest.raises(IntegrityViolation):
        w.validate()


def test_restore_validates_world():
    ms = build_strand([2, 2, 2], x0=20, y0=20)
    ms[1].left = None
    blob = checkpoint(new_world(ms))
    with pytest.raises(IntegrityViolation):
        restore(blob)


def test_arbitrate_is_greedy_deterministic_and_order_free():
    reqs = [(3, "up", 1, "up"), (1, "up", 2, "up"), (1, "left", 5, "right")]
    free = lambda mid, arm: True
    got = arbitrate(list(reqs), free)
    assert got == arbitrate(list(reversed(reqs)), free)
    # machine 1's up arm goes to the lowest sorted request (1 up 2)
    assert (1, "up", 2, "up") in got
    assert not any(r == (1, "up", 3, "up") for r in got)
    assert (1, "left", 5, "right") in got


def test_arbitrate_respects_filled_slots():
    reqs = [(1, "up", 2, "up")]
    assert arbitrate(reqs, lambda mid, arm: mid != 1) == []


def test_events_sorted_within_step():
    w = init_world([2, 2, 2], {2: 12}, rng_seed=1)
    for _ in range(4000):
        evs = engine.step(w)
        assert evs == sorted(evs, key=Event.sort_key)


def test_world_requires_contiguous_ids():
    ms = [Machine(0, 2, x=5, y=5), Machine(2, 2, x=8, y=8)]
    with pytest.raises(ConfigurationError):
        new_world(ms)
