"""Post-hoc analysis of world snapshots, plus the event trace format.

The simulator keeps no strand or mesh data structure; strands and meshes are
emergent and are reconstructed here from the bond graph alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional

from .engine import Event, World
from .rules import Machine


class TopologyError(RuntimeError):
    """The bond graph violates the arm-slot invariants (e.g. a branched loop)."""


@dataclass(frozen=True)
class Strand:
    """A maximal sideways chain (or loop), listed left to right."""

    ids: tuple[int, ...]
    classification: str        # "free" | "gene" | "phene"
    loop: bool
    mesh_component: Optional[int]  # min machine id of the mesh, or None

    def __len__(self) -> int:
        return len(self.ids)


def derive_strands(world: World) -> list[Strand]:
    """Reconstruct strands and mesh components from bonds.

    Strands are maximal sideways-bond chains; loops are canonicalized to
    start at their minimum id.  A bondless machine is free; a strand with any
    folded member is a phene, otherwise a gene.  Mesh components connect
    phenes through up bonds whose endpoints are both folded.
    """
    machines = world.machines
    visited: set[int] = set()
    raw: list[tuple[tuple[int, ...], bool]] = []

    for m in machines:
        if m.id in visited:
            continue
        if not m.in_strand:
            visited.add(m.id)
            raw.append(((m.id,), False))
            continue
        # walk left to the start (or all the way around a loop)
        start = m.id
        seen = {start}
        cur = start
        while machines[cur].left is not None:
            nxt = machines[cur].left
            if nxt == start:
                break  # closed loop
            if nxt in seen:
                raise TopologyError(
                    f"sideways chain through machine {m.id} re-enters at "
                    f"{nxt} without closing")
            seen.add(nxt)
            cur = nxt
        loop = machines[cur].left == start and cur != start
        if loop:
            head = min(seen)
        else:
            head = cur
        ids = [head]
        while True:
            nxt = machines[ids[-1]].right
            if nxt is None or nxt == head:
                break
            if nxt in ids:
                raise TopologyError(
                    f"sideways chain through machine {m.id} branches at {nxt}")
            ids.append(nxt)
        loop = machines[ids[-1]].right == head and len(ids) > 1
        visited.update(ids)
        raw.append((tuple(ids), loop))

    strands: list[tuple[tuple[int, ...], bool, str]] = []
    owner: dict[int, int] = {}  # machine id -> index into strands
    for ids, loop in raw:
        ms = [machines[i] for i in ids]
        if len(ids) == 1 and ms[0].is_free:
            cls = "free"
        elif any(m.folded for m in ms):
            cls = "phene"
        else:
            cls = "gene"
        for i in ids:
            owner[i] = len(strands)
        strands.append((ids, loop, cls))

    # union phene strands across folded-to-folded up bonds
    parent = list(range(len(strands)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for m in machines:
        if m.up is not None and m.id < m.up:
            other = machines[m.up]
            if m.folded and other.folded:
                a, b = find(owner[m.id]), find(owner[m.up])
                if a != b:
                    parent[max(a, b)] = min(a, b)

    # a mesh component exists where at least one member is flagged in-mesh
    comp_min_id: dict[int, int] = {}
    comp_meshy: dict[int, bool] = {}
    for idx, (ids, _loop, cls) in enumerate(strands):
        root = find(idx)
        if cls != "phene":
            continue
        comp_min_id[root] = min(comp_min_id.get(root, ids[0]), ids[0])
        if any(machines[i].in_mesh for i in ids):
            comp_meshy[root] = True

    out: list[Strand] = []
    for idx, (ids, loop, cls) in enumerate(strands):
        root = find(idx)
        mesh = comp_min_id[root] if (cls == "phene"
                                     and comp_meshy.get(root)) else None
        out.append(Strand(ids, cls, loop, mesh))
    out.sort(key=lambda s: s.ids[0])
    return out


@dataclass
class SummaryRecord:
    """One row of run bookkeeping, in the style of a results table."""

    timestep: int
    total_machines: int
    free_machines: int
    strand_count: int
    phenes_folded: int
    phenes_in_mesh: int
    genes_remaining: int
    largest_mesh_size: int
    shatter_events: int = 0
    unfold_events: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def to_text(self) -> str:
        d = self.to_dict()
        width = max(len(k) for k in d)
        return "\n".join(f"{k.replace('_', ' '):<{width + 2}}{v}"
                         for k, v in d.items())


def summarize(world: World,
              events: Optional[Iterable[Event]] = None) -> SummaryRecord:
    """Count strands, phenes, genes, and mesh sizes in a snapshot.

    Event counts (shatters, unfold starts) are filled in when the caller
    supplies the run's event log; a bare snapshot cannot know them.
    """
    strands = derive_strands(world)
    free = sum(1 for s in strands if s.classification == "free")
    in_strands = sum(len(s) for s in strands if s.classification != "free")
    assert free + in_strands == len(world.machines)
    phenes = [s for s in strands if s.classification == "phene"]
    meshes: dict[int, int] = {}
    for s in phenes:
        if s.mesh_component is not None:
            meshes[s.mesh_component] = meshes.get(s.mesh_component, 0) + 1
    shatters = unfolds = 0
    if events is not None:
        for e in events:
            if e.kind == "Shatter":
                shatters += 1
            elif e.kind == "UnfoldStart":
                unfolds += 1
    return SummaryRecord(
        timestep=world.step_number,
        total_machines=len(world.machines),
        free_machines=free,
        strand_count=len(strands) - free,
        phenes_folded=sum(1 for s in phenes
                          if all(world.machines[i].folded for i in s.ids)),
        phenes_in_mesh=sum(1 for s in phenes if s.mesh_component is not None),
        genes_remaining=sum(1 for s in strands if s.classification == "gene"),
        largest_mesh_size=max(meshes.values(), default=0),
        shatter_events=shatters,
        unfold_events=unfolds,
    )


# ---------------------------------------------------------------------------
# Event trace
# ---------------------------------------------------------------------------


def event_record(event: Event) -> str:
    """One canonical trace line per event; key order and spacing are fixed so
    identical runs produce byte-identical traces."""
    return json.dumps(
        {"step": event.step, "kind": event.kind,
         "subjects": list(event.subjects), "detail": event.detail},
        sort_keys=True, separators=(",", ":"))


def write_trace(events: Iterable[Event], out: IO[str]) -> int:
    """Append events to a line-delimited trace; returns the line count."""
    n = 0
    for e in events:
        out.write(event_record(e))
        out.write("\n")
        n += 1
    return n
