"""Template replication: capture, coverage, the split wave, and handover."""

import math

from plusmesh import engine
from plusmesh.rules import Machine, RuleParams
from worldlib import build_strand, new_world, quiet_params


def _seed_with_children(parent_types, child_count=None):
    """A seed strand plus free machines parked at the exact capture pose:
    each child sits above its parent, facing the other way, up tips touching."""
    parents = build_strand(parent_types, x0=16, y0=20, seed_gene=1,
                           seed_phene=1)
    n = len(parents)
    child_count = n if child_count is None else child_count
    ms = list(parents)
    for i in range(child_count):
        p = parents[i]
        ms.append(Machine(n + i, p.type, x=p.x, y=p.y + 1.2,
                          heading=math.pi))
    return new_world(ms)


def drain(world, steps):
    evs = []
    for _ in range(steps):
        evs.extend(engine.step(world))
    return evs


def test_full_replication_cycle():
    w = _seed_with_children([2, 2, 4])
    evs = drain(w, 40)
    kinds = [e.kind for e in evs]
    assert "Split" in kinds
    split = next(e for e in evs if e.kind == "Split")
    assert split.detail["types_a"] == [2, 2, 4]
    assert split.detail["types_b"] == [4, 2, 2]  # mirror image of the parent
    assert split.detail["strand_a"] == [0, 1, 2]
    assert split.detail["strand_b"] == [5, 4, 3]
    # up bonds formed once per machine, then dropped by the split
    ups_formed = [e for e in evs if e.kind == "BondFormed"
                  and e.detail["arm"] == "up"]
    assert len(ups_formed) == 3
    drops = [e for e in evs if e.kind == "BondBroken"]
    assert all(e.detail["reason"] == "split" for e in drops)
    assert len(drops) == 3
    assert not any(k == "Shatter" for k in kinds)


def test_child_strand_bonds_are_mirrored():
    w = _seed_with_children([2, 4, 2])
    drain(w, 40)
    c0, c1, c2 = w.machines[3], w.machines[4], w.machines[5]
    # child of the leftmost parent is the rightmost child
    assert c0.left == 4 and c0.right is None
    assert c1.left == 5 and c1.right == 3
    assert c2.left is None and c2.right == 4


def test_seed_phene_handover():
    w = _seed_with_children([2, 2, 2])
    evs = drain(w, 40)
    created = [e for e in evs if e.kind == "SeedPheneCreated"]
    assert len(created) == 1
    assert created[0].subjects == (3, 4, 5)
    parents, children = w.machines[:3], w.machines[3:]
    assert all(m.seed_gene and not m.seed_phene for m in parents)
    assert all(m.folded and m.in_mesh for m in children)
    assert all(not m.seed_gene and not m.seed_phene for m in children)


def test_split_sets_repel_and_clears_progress():
    w = _seed_with_children([2, 2, 2])
    evs = drain(w, 40)
    split_step = next(e.step for e in evs if e.kind == "Split")
    for m in w.machines:
        assert m.replicated == 1
        assert m.up is None
        assert m.fold_counter <= w.step_number - split_step
        assert m.split_state == 1
    # repellors still counting down on at least the last pair to split
    assert any(m.repel_counter > 0 for m in w.machines)
    # countdown starts the step after the final pair splits off
    elapsed = w.step_number - split_step
    assert max(m.repel_counter for m in w.machines) == \
        w.rules.repel_duration - elapsed + 1


def test_repel_blocks_immediate_recapture():
    w = _seed_with_children([2, 2, 2])
    drain(w, 40)
    # freshly split strands drift apart; no new up bonds while repelling
    evs = drain(w, 20)
    assert not any(e.kind == "BondFormed" and e.detail["arm"] == "up"
                   for e in evs)


def test_partial_coverage_never_splits():
    w = _seed_with_children([2, 2, 2], child_count=2)
    evs = drain(w, 200)
    assert not any(e.kind == "Split" for e in evs)
    assert not any(e.kind == "BondBroken" for e in evs)
    assert max(m.split_state for m in w.machines) <= 2


def test_wrong_type_is_not_captured():
    parents = build_strand([2, 2, 2], x0=16, y0=20, seed_gene=1)
    stray = Machine(3, 4, x=parents[1].x, y=parents[1].y + 1.2,
                    heading=math.pi)
    w = new_world(parents + [stray])
    evs = drain(w, 100)
    assert not any(e.kind == "BondFormed" for e in evs)
    assert w.machines[3].up is None


def test_replication_repeats_from_same_template():
    # after the first split the parent strand can host a second brood
    w = _seed_with_children([2, 2, 2])
    drain(w, 40)
    rules = w.rules
    # wait out the repel window, then park fresh children ourselves
    drain(w, rules.repel_duration + 5)
    parents = w.machines[:3]
    for i, p in enumerate(parents):
        c = w.machines[3 + i]
        if not c.is_free:
            continue
    # instead of reusing the old brood (now a folded phene), extend the world
    ms = [m.clone() for m in w.machines]
    for i, p in enumerate(parents):
        ms.append(Machine(6 + i, p.type, x=p.x, y=p.y + 1.2, heading=math.pi))
    w2 = new_world(ms)
    evs = drain(w2, 40)
    splits = [e for e in evs if e.kind == "Split"]
    assert len(splits) == 1
    assert 0 in splits[0].subjects and 6 in splits[0].subjects
    # no second seed phene: the flag was already handed over
    assert not any(e.kind == "SeedPheneCreated" for e in evs)
