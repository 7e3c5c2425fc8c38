"""Per-machine automaton: state vector, bonding tables, and signal protocols.

All transition logic reads only previous-step snapshots of the machine itself
and of machines it is bonded to (plus field-range neighbours, supplied by the
engine as derived data), so every machine's transition can be evaluated in any
order, or concurrently, with identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

# ---------------------------------------------------------------------------
# Bonding rule tables
# ---------------------------------------------------------------------------

# Up bonds between unfolded strands and free machines: likes attract.
def gene_up_bond_allowed(a: int, b: int) -> bool:
    return a == b


_PHENE_UP_PAIRS = frozenset({(2, 2), (3, 4), (4, 3), (4, 4)})


def phene_up_bond_allowed(a: int, b: int) -> bool:
    """Type pairs that may join two folded strands up-arm to up-arm."""
    return (a, b) in _PHENE_UP_PAIRS


# Folded sideways-bond angle by (left type, right type), in degrees.
# None marks type combinations with no assigned angle.
_FOLD_ANGLE_DEG: dict[tuple[int, int], Optional[int]] = {
    (1, 1): 0, (1, 2): 0, (1, 3): 0, (1, 4): 0,
    (2, 1): 0, (2, 2): 120, (2, 3): 45, (2, 4): 90,
    (3, 1): 0, (3, 2): 45, (3, 3): None, (3, 4): None,
    (4, 1): 0, (4, 2): 90, (4, 3): None, (4, 4): 60,
}


def fold_angle_deg(left_type: int, right_type: int) -> Optional[int]:
    """Folded bond angle in degrees, or None where undefined."""
    return _FOLD_ANGLE_DEG[(left_type, right_type)]


# bend-location values: 1 right-of-bend, 2 left-of-bend, 3 in-bend, 4 extender
def bend_location(left_type: Optional[int], right_type: Optional[int]) -> int:
    """Classify a machine by its neighbours' types.

    Type 1 is straight; 2, 3, 4 bend.  A missing neighbour counts as bending.
    """
    left_straight = left_type == 1
    right_straight = right_type == 1
    if right_straight and not left_straight:
        return 1
    if left_straight and not right_straight:
        return 2
    if not left_straight and not right_straight:
        return 3
    return 4


_BEND_BOND_PAIRS = frozenset({(1, 2), (2, 1), (3, 3)})


def bend_location_bond_allowed(a: int, b: int) -> bool:
    return (a, b) in _BEND_BOND_PAIRS


def mirror_of_template(parent_types: Sequence[int]) -> list[int]:
    """Type sequence of the strand a template produces: the reverse.

    The child faces the opposite direction, so reading it left-to-right in
    its own canonical orientation reverses the parent's order.
    """
    if not parent_types:
        raise ValueError("template must be non-empty")
    return list(reversed(parent_types))


# ---------------------------------------------------------------------------
# Rule constants
# ---------------------------------------------------------------------------


@dataclass
class RuleParams:
    """Tunable constants of the automaton (all in steps or radians)."""

    fold_limit: int = 4000        # idle steps before the leftmost machine folds
    stress_limit: int = 600       # out-of-tolerance steps before unfolding
    repel_duration: int = 120     # steps the repellor field stays on after a split
    tol_angle: float = math.radians(15.0)   # bond angle tolerance
    tol_dist: float = 0.125                 # bond tip-separation tolerance
    tol_overlap: float = math.radians(20.0)  # heading agreement for overlap arms

    def __post_init__(self) -> None:
        if min(self.fold_limit, self.stress_limit, self.repel_duration) <= 0:
            raise ValueError("rule counters must be positive")
        if min(self.tol_angle, self.tol_dist, self.tol_overlap) <= 0:
            raise ValueError("tolerances must be positive")


# ---------------------------------------------------------------------------
# Machine state
# ---------------------------------------------------------------------------

_MACHINE_FIELDS = (
    "id", "type",
    "fold_counter", "repel_counter", "stress_counter",
    "strand_position", "split_state",
    "reset_counter", "fold_now", "unfold",
    "seed_gene", "seed_phene", "in_mesh", "replicated", "shatter", "folded",
    "left", "right", "up", "overlap",
    "x", "y", "heading", "vx", "vy", "omega",
)


class Machine:
    """Complete per-machine state: internal flags/counters, bonds, pose, motion.

    Bond fields hold the id of the neighbour on that arm, or None.
    """

    __slots__ = _MACHINE_FIELDS

    def __init__(self, id: int, type: int, x: float = 0.0, y: float = 0.0,
                 heading: float = 0.0, vx: float = 0.0, vy: float = 0.0,
                 omega: float = 0.0, *, seed_gene: int = 0, seed_phene: int = 0,
                 folded: int = 0, in_mesh: int = 0, replicated: int = 0,
                 left: Optional[int] = None, right: Optional[int] = None,
                 up: Optional[int] = None, overlap: Optional[int] = None):
        if type not in (1, 2, 3, 4):
            raise ValueError(f"machine type must be 1..4, got {type}")
        if id < 0:
            raise ValueError("machine id must be non-negative")
        self.id = id
        self.type = type
        self.fold_counter = 0
        self.repel_counter = 0
        self.stress_counter = 0
        self.strand_position = 2
        self.split_state = 1
        self.reset_counter = 0
        self.fold_now = 0
        self.unfold = 0
        self.seed_gene = seed_gene
        self.seed_phene = seed_phene
        self.in_mesh = in_mesh
        self.replicated = replicated
        self.shatter = 0
        self.folded = folded
        self.left = left
        self.right = right
        self.up = up
        self.overlap = overlap
        self.x = x
        self.y = y
        self.heading = heading
        self.vx = vx
        self.vy = vy
        self.omega = omega

    def clone(self) -> "Machine":
        new = Machine.__new__(Machine)
        new.id = self.id
        new.type = self.type
        new.fold_counter = self.fold_counter
        new.repel_counter = self.repel_counter
        new.stress_counter = self.stress_counter
        new.strand_position = self.strand_position
        new.split_state = self.split_state
        new.reset_counter = self.reset_counter
        new.fold_now = self.fold_now
        new.unfold = self.unfold
        new.seed_gene = self.seed_gene
        new.seed_phene = self.seed_phene
        new.in_mesh = self.in_mesh
        new.replicated = self.replicated
        new.shatter = self.shatter
        new.folded = self.folded
        new.left = self.left
        new.right = self.right
        new.up = self.up
        new.overlap = self.overlap
        new.x = self.x
        new.y = self.y
        new.heading = self.heading
        new.vx = self.vx
        new.vy = self.vy
        new.omega = self.omega
        return new

    @property
    def quiescent(self) -> bool:
        """True when the automaton step is guaranteed to be the identity:
        a bondless machine with every signal, counter, and phase at rest."""
        return (self.left is None and self.right is None and self.up is None
                and self.overlap is None and not self.shatter
                and not self.unfold and not self.fold_now
                and not self.reset_counter and not self.folded
                and not self.in_mesh and self.split_state == 1
                and self.repel_counter == 0 and self.stress_counter == 0
                and self.strand_position == 2)

    def bonds(self) -> list[tuple[str, int]]:
        out = []
        for arm in ("left", "right", "up", "overlap"):
            other = getattr(self, arm)
            if other is not None:
                out.append((arm, other))
        return out

    @property
    def is_free(self) -> bool:
        return (self.left is None and self.right is None
                and self.up is None and self.overlap is None)

    @property
    def in_strand(self) -> bool:
        return self.left is not None or self.right is not None

    def __repr__(self) -> str:  # debugging aid
        flags = "".join(str(getattr(self, f)) for f in
                        ("seed_gene", "seed_phene", "in_mesh", "replicated",
                         "shatter", "folded"))
        return (f"Machine(id={self.id}, type={self.type}, flags={flags}, "
                f"bonds={self.bonds()}, xy=({self.x:.2f},{self.y:.2f}))")


def desired_sideways_angle(left_m: Machine, right_m: Machine) -> tuple[float, bool]:
    """Desired relative angle (radians) across a sideways bond.

    Returns (angle, defined).  Unfolded pairs are straight.  Folded pairs use
    the fold-angle table, applied as a clockwise turn when walking the strand
    left-to-right so that the overlap-detector arms end up on the loop
    interior and the up arms on the exterior.  Undefined table entries fall
    back to straight and are flagged.
    """
    if not (left_m.folded and right_m.folded):
        return 0.0, True
    deg = fold_angle_deg(left_m.type, right_m.type)
    if deg is None:
        return 0.0, False
    return -math.radians(deg), True


# ---------------------------------------------------------------------------
# Derived per-step data the engine feeds to the automaton
# ---------------------------------------------------------------------------


@dataclass
class Derived:
    """Per-step derived state, recomputed from the snapshot every step.

    in_tolerance: id -> 0/1, every existing bond within angle and tip limits.
    bond_ok: (min_id, max_id) -> bool per bonded pair (sideways and up).
    """

    in_tolerance: Mapping[int, int]
    bond_ok: Mapping[tuple[int, int], bool]

    def pair_ok(self, a: int, b: int) -> bool:
        return self.bond_ok.get((a, b) if a < b else (b, a), False)


def bend_location_of(m: Machine, type_of: Mapping[int, int]) -> int:
    """bend-location of a machine given a lookup of machine id -> type."""
    lt = type_of[m.left] if m.left is not None else None
    rt = type_of[m.right] if m.right is not None else None
    return bend_location(lt, rt)


def up_bond_eligible(a: Machine, b: Machine, derived: Derived,
                     type_of: Mapping[int, int]) -> bool:
    """Whether an unbonded pair of up arms may attract and bond.

    Gene case: exactly one side is a strand member (unfolded, free up slot)
    and the other is a free machine of the same type.  Phene case: both
    folded, the type and bend-location tables both permit it, and at least
    one side is already part of the mesh.  Both sides must be in tolerance,
    have no up neighbour, and not be mid-split or shattering.
    """
    if a.up is not None or b.up is not None:
        return False
    if a.shatter or b.shatter or a.repel_counter > 0 or b.repel_counter > 0:
        return False
    if not (derived.in_tolerance.get(a.id, 1) and derived.in_tolerance.get(b.id, 1)):
        return False
    if not a.folded and not b.folded:
        # replication: free machine meets an unfolded strand member
        if a.is_free == b.is_free:
            return False
        strand, free = (a, b) if a.in_strand else (b, a)
        if not strand.in_strand or not free.is_free:
            return False
        return gene_up_bond_allowed(a.type, b.type)
    if a.folded and b.folded:
        if not (a.in_mesh or b.in_mesh):
            return False
        if not phene_up_bond_allowed(a.type, b.type):
            return False
        return bend_location_bond_allowed(bend_location_of(a, type_of),
                                          bend_location_of(b, type_of))
    return False


# ---------------------------------------------------------------------------
# The state transition
# ---------------------------------------------------------------------------


@dataclass
class Transition:
    """Result of one machine's automaton step."""

    new: Machine                      # updated state (bonds still snapshot's)
    drops: list[tuple[str, int, str]]  # (arm, other_id, reason)
    events: list[tuple]               # (kind, detail-dict) pairs


class IntegrityError(RuntimeError):
    """A bond referenced a machine missing from the neighbourhood snapshot."""


def step_automaton(m: Machine, peers: Mapping[int, Machine],
                   rules: RuleParams, derived: Derived) -> Transition:
    """Apply one discrete-time transition to a single machine.

    Inputs are previous-step snapshots.  Rule order: shatter, unfold, stress,
    overlap, fold signalling, replication handshake, mesh membership.  Bond
    formation is handled by the engine's pairwise bonding phase.
    """
    new = m.clone()
    drops: list[tuple[str, int, str]] = []
    events: list[tuple] = []

    # --- shatter dissolution (flag was set last step; effects land now) ---
    if m.shatter:
        for arm, other in m.bonds():
            drops.append((arm, other, "shatter"))
            setattr(new, arm, None)
        new.folded = 0
        new.seed_gene = 0
        new.seed_phene = 0
        new.replicated = 0
        new.in_mesh = 0
        new.unfold = 0
        new.fold_now = 0
        new.reset_counter = 0
        new.fold_counter = 0
        new.stress_counter = 0
        new.repel_counter = 0
        new.split_state = 1
        new.strand_position = 2
        new.shatter = 0
        return Transition(new, drops, events)

    # --- shatter triggers ---
    trig = False
    for side in ("left", "right"):
        n = getattr(m, side)
        if n is None:
            continue
        nb = peers[n]
        if nb.shatter:
            trig = True
        # a sideways neighbour folding mid-wave while we are an incomplete
        # up-partner means our copy is being abandoned
        if (nb.folded and nb.fold_now and m.up is not None
                and not m.replicated):
            trig = True
    if m.up is not None:
        upn = peers[m.up]
        if upn.shatter and upn.replicated and not upn.folded:
            trig = True
        if not m.replicated and not m.folded and upn.folded:
            # unfolded template under a copy that folded before splitting
            new.split_state = 4
            trig = True
    if trig:
        new.shatter = 1
        events.append(("Shatter", {"machine": m.id}))
        return Transition(new, drops, events)

    in_tol = derived.in_tolerance.get(m.id, 1)

    # --- stress update ---
    new.stress_counter = 0 if in_tol else m.stress_counter + 1

    # --- unfold: overlap trigger, stress trigger, propagation ---
    unfold_now = False
    unfold_started = False
    if m.folded:
        for side in ("left", "right"):
            n = getattr(m, side)
            if n is not None and peers[n].unfold:
                unfold_now = True
                break
    # only an intact loop member may start an unfold; a folded machine with a
    # missing sideways bond is already mid-unfold and just rides the wave
    closed_member = m.left is not None and m.right is not None
    if m.overlap is not None:
        # transient overlap bond resolved this step; smaller id unfolds
        drops.append(("overlap", m.overlap, "overlap"))
        new.overlap = None
        if m.id < m.overlap and m.folded and closed_member and not unfold_now:
            unfold_now = True
            unfold_started = True
    if (m.folded and closed_member and not unfold_now
            and m.stress_counter > rules.stress_limit):
        unfold_now = True
        unfold_started = True
    if unfold_now:
        new.unfold = 1
        new.folded = 0
        new.in_mesh = 0
        new.fold_counter = 0
        new.stress_counter = 0
        if m.up is not None:
            drops.append(("up", m.up, "unfold"))
            new.up = None
        if unfold_started:
            # reopen the loop so the strand can act as a template again; the
            # unfold wave still reaches the left neighbour the long way round
            if m.left is not None and m.right is not None:
                drops.append(("left", m.left, "unfold"))
                new.left = None
            events.append(("UnfoldStart", {"machine": m.id}))
    elif m.unfold:
        new.unfold = 0  # signal clears one step after last assertion

    # --- fold signalling ---
    leftmost = m.right is not None and m.left is None
    rightmost = m.left is not None and m.right is None
    new.strand_position = 1 if leftmost else (3 if rightmost else 2)

    reset = 0
    if m.right is not None and peers[m.right].reset_counter:
        reset = 1
    # engine also sets reset_counter at commit when an up bond is gained
    new.reset_counter = reset

    if leftmost:
        # the machine's own flag may have been raised by the engine when an
        # up bond attached directly to it, so honour both; a leftmost machine
        # that is itself mid-replication holds its count instead of idling
        if reset or m.reset_counter:
            new.fold_counter = 0
        elif m.up is None:
            new.fold_counter = m.fold_counter + 1
    else:
        new.fold_counter = 0 if reset else m.fold_counter

    fold_now = 0
    if (leftmost and not new.folded and not m.seed_gene
            and new.fold_counter >= rules.fold_limit):
        fold_now = 1
        events.append(("FoldStart", {"machine": m.id}))
    if (m.left is not None and peers[m.left].fold_now
            and not m.folded and not m.seed_gene):
        fold_now = 1
    if fold_now:
        new.fold_now = 1
        new.folded = 1
        new.fold_counter = 0
        new.stress_counter = 0
        for side in ("left", "right"):
            n = getattr(m, side)
            if n is None:
                continue
            a, b = (m, peers[n]) if side == "right" else (peers[n], m)
            if fold_angle_deg(a.type, b.type) is None:
                events.append(("Diagnostic", {
                    "machine": m.id,
                    "detail": f"undefined fold angle for types "
                              f"{a.type}-{b.type}; treating as straight"}))
    else:
        new.fold_now = 0

    # --- replication handshake (genes only) ---
    if not new.folded and not m.in_mesh:
        # covered: my whole neighbourhood is mirrored across the up bond, in
        # both directions; a missing counterpart on either strand means the
        # copy is still growing
        covered = m.up is not None
        if covered:
            up_peer = peers[m.up]
            my_sides = [s for s in (m.left, m.right) if s is not None]
            their_sides = [s for s in (up_peer.left, up_peer.right)
                           if s is not None]
            for n in my_sides:
                if peers[n].up not in their_sides:
                    covered = False
            for p in their_sides:
                if peers[p].up not in my_sides:
                    covered = False
        state = m.split_state
        if state == 1:
            if covered and (m.left is None
                            or peers[m.left].split_state >= 2):
                state = 2
        elif state == 2:
            # the echo from the right takes precedence: the neighbour that
            # reported 3 has already split off, which breaks our coverage
            if rightmost or (m.right is not None
                             and peers[m.right].split_state == 3):
                state = 3  # engine completes the split at commit
            elif not covered:
                state = 1
        elif state == 3:
            state = 1
        new.split_state = state
    elif m.split_state != 1:
        # folded or meshed machines are out of the handshake; decay any
        # stale state one step after it was last visible to neighbours
        new.split_state = 1

    # --- repellor countdown ---
    if m.repel_counter > 0:
        new.repel_counter = m.repel_counter - 1

    # --- mesh membership propagation ---
    if m.folded and not m.in_mesh and not unfold_now:
        if m.up is not None and peers[m.up].in_mesh:
            new.in_mesh = 1
        else:
            for side in ("left", "right"):
                n = getattr(m, side)
                if (n is not None and peers[n].in_mesh
                        and derived.pair_ok(m.id, n)):
                    new.in_mesh = 1
                    break

    return Transition(new, drops, events)
