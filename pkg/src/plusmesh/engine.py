"""World container and the two-phase step loop.

Each step: freeze the previous state as an immutable snapshot, compute
physics and automaton transitions purely from that snapshot, arbitrate bond
requests deterministically, then commit everything at once.  The event
stream is a pure function of (configuration, rng seed).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .geometry import MachineBody, normalize_angle, normalize_heading
from .physics import PhysicsParams, Rng, SpatialGrid, brute_force_pairs
from .rules import (Derived, Machine, RuleParams, Transition,
                    desired_sideways_angle, step_automaton, up_bond_eligible)

EVENT_KINDS = ("BondFormed", "BondBroken", "Split", "FoldStart", "UnfoldStart",
               "Shatter", "SeedPheneCreated", "MeshJoin", "Diagnostic")
_KIND_ORDER = {k: i for i, k in enumerate(EVENT_KINDS)}

_MIRROR_ARM = {"left": "right", "right": "left", "up": "up", "overlap": "overlap"}
_ARM_ORDER = {"left": 0, "right": 1, "up": 2, "overlap": 3}


@dataclass(frozen=True)
class Event:
    step: int
    kind: str
    subjects: tuple[int, ...]
    detail: dict = field(default_factory=dict)

    def sort_key(self):
        return (_KIND_ORDER[self.kind], self.subjects,
                tuple(sorted(self.detail.items(), key=lambda kv: kv[0])))


class IntegrityViolation(RuntimeError):
    """A post-commit world invariant failed; carries a diagnostic dump."""


class ConfigurationError(ValueError):
    pass


class World:
    """Fixed population of machines plus physics/rule constants and RNG."""

    def __init__(self, params: PhysicsParams, rules: RuleParams,
                 body: MachineBody, machines: Sequence[Machine], rng: Rng):
        ms = sorted(machines, key=lambda m: m.id)
        if [m.id for m in ms] != list(range(len(ms))):
            raise ConfigurationError("machine ids must be contiguous from 0")
        self.params = params
        self.rules = rules
        self.body = body
        self.machines: list[Machine] = list(ms)
        self.step_number = 0
        self.rng = rng
        self.type_of = {m.id: m.type for m in ms}

    def machine(self, mid: int) -> Machine:
        return self.machines[mid]

    def validate(self) -> None:
        """Check bond symmetry, flag ranges, and finiteness; raise on failure."""
        ms = self.machines
        for m in ms:
            for arm, other in m.bonds():
                if other < 0 or other >= len(ms):
                    raise IntegrityViolation(
                        f"step {self.step_number}: machine {m.id} {arm} bond "
                        f"references unknown id {other}")
                if other == m.id:
                    raise IntegrityViolation(
                        f"step {self.step_number}: machine {m.id} self-bond on {arm}")
                back = getattr(ms[other], _MIRROR_ARM[arm])
                if back != m.id:
                    raise IntegrityViolation(
                        f"step {self.step_number}: asymmetric {arm} bond "
                        f"between {m.id} and {other} (reverse is {back})")
            if m.seed_gene and m.folded:
                raise IntegrityViolation(
                    f"step {self.step_number}: seed-gene machine {m.id} folded")
            for v in (m.x, m.y, m.heading, m.vx, m.vy, m.omega):
                if not math.isfinite(v):
                    raise IntegrityViolation(
                        f"step {self.step_number}: non-finite state on machine "
                        f"{m.id}: {m!r}")
            if not (0.0 <= m.x <= self.params.container_width
                    and 0.0 <= m.y <= self.params.container_height):
                raise IntegrityViolation(
                    f"step {self.step_number}: machine {m.id} outside container")


class _PeerView:
    """Read-only id -> snapshot lookup handed to the automaton."""

    __slots__ = ("_machines",)

    def __init__(self, machines: list[Machine]):
        self._machines = machines

    def __getitem__(self, mid: int) -> Machine:
        try:
            return self._machines[mid]
        except IndexError:
            from .rules import IntegrityError
            raise IntegrityError(
                f"bond references missing machine {mid}") from None

    def __contains__(self, mid: int) -> bool:
        return 0 <= mid < len(self._machines)


# ---------------------------------------------------------------------------
# World construction
# ---------------------------------------------------------------------------


def init_world(seed_types: Sequence[int], free_counts: dict[int, int],
               params: Optional[PhysicsParams] = None,
               rules: Optional[RuleParams] = None,
               body: Optional[MachineBody] = None,
               rng_seed: int = 0) -> World:
    """Build the initial soup: a seed strand at the container center plus
    uniformly placed free machines.

    The seed machines are sideways-bonded in a horizontal line with
    seed_gene = seed_phene = 1.  Free machines are rejection-sampled with a
    minimum middle spacing of twice the field radius.
    """
    params = params or PhysicsParams()
    rules = rules or RuleParams()
    body = body or MachineBody()
    if len(seed_types) < 3:
        raise ConfigurationError("seed strand must have at least 3 machines")
    for c in free_counts.values():
        if c < 0:
            raise ConfigurationError("free machine counts must be non-negative")

    rng = Rng(rng_seed)
    machines: list[Machine] = []
    pitch = body.sideways_pitch
    w, h = params.container_width, params.container_height
    k = len(seed_types)
    x0 = w / 2.0 - pitch * (k - 1) / 2.0
    if x0 < 0 or x0 + pitch * (k - 1) > w:
        raise ConfigurationError(
            f"container width {w} too small for a {k}-machine seed strand")
    for i, t in enumerate(seed_types):
        m = Machine(i, t, x=x0 + i * pitch, y=h / 2.0, heading=0.0,
                    seed_gene=1, seed_phene=1)
        m.left = i - 1 if i > 0 else None
        m.right = i + 1 if i < k - 1 else None
        m.strand_position = 1 if i == 0 else (3 if i == k - 1 else 2)
        machines.append(m)

    min_spacing = 2.0 * params.field_radius
    min_sq = min_spacing * min_spacing
    placed = [(m.x, m.y) for m in machines]
    next_id = k
    for t in sorted(free_counts):
        for _ in range(free_counts[t]):
            for _attempt in range(10000):
                x = rng.uniform() * w
                y = rng.uniform() * h
                if all((x - px) ** 2 + (y - py) ** 2 >= min_sq
                       for px, py in placed):
                    break
            else:
                raise ConfigurationError(
                    f"container {w}x{h} too small to place machine {next_id} "
                    f"with spacing {min_spacing}")
            heading = rng.uniform() * 2.0 * math.pi
            machines.append(Machine(next_id, t, x=x, y=y, heading=heading))
            placed.append((x, y))
            next_id += 1

    return World(params, rules, body, machines, rng)


# ---------------------------------------------------------------------------
# Bond arbitration
# ---------------------------------------------------------------------------


def arbitrate(requests: list[tuple[int, str, int, str]],
              slot_free: Callable[[int, str], bool]) -> list[tuple[int, str, int, str]]:
    """Deterministically resolve conflicting bond requests.

    Requests are canonicalized (lower id first), de-duplicated, sorted by
    (id, arm order, id, arm order), and accepted greedily while both arm
    slots remain unclaimed.  The result is independent of input order.
    """
    canon = set()
    for a, arm_a, b, arm_b in requests:
        if a > b:
            a, arm_a, b, arm_b = b, arm_b, a, arm_a
        canon.add((a, arm_a, b, arm_b))
    accepted = []
    used: set[tuple[int, str]] = set()
    for a, arm_a, b, arm_b in sorted(
            canon, key=lambda r: (r[0], _ARM_ORDER[r[1]], r[2], _ARM_ORDER[r[3]])):
        sa, sb = (a, arm_a), (b, arm_b)
        if sa in used or sb in used:
            continue
        if not (slot_free(a, arm_a) and slot_free(b, arm_b)):
            continue
        used.add(sa)
        used.add(sb)
        accepted.append((a, arm_a, b, arm_b))
    return accepted


# ---------------------------------------------------------------------------
# The step
# ---------------------------------------------------------------------------


def step(world: World, eval_order: Optional[Sequence[int]] = None,
         use_grid: bool = True, check_every: int = 1024) -> list[Event]:
    """Advance the world by one timestep and return this step's events."""
    S = world.machines
    n = len(S)
    params = world.params
    rules = world.rules
    body = world.body
    dt_step = world.step_number
    events: list[Event] = []

    # --- trig and arm-tip cache (snapshot poses) ---
    L, U = body.left, body.up
    P, O = body.repellor, body.overlap
    cos_h = [0.0] * n
    sin_h = [0.0] * n
    tipL = [(0.0, 0.0)] * n
    tipR = [(0.0, 0.0)] * n
    tipU = [(0.0, 0.0)] * n
    for m in S:
        i = m.id
        c = math.cos(m.heading)
        s = math.sin(m.heading)
        cos_h[i] = c
        sin_h[i] = s
        tipL[i] = (m.x - c * L, m.y - s * L)
        tipR[i] = (m.x + c * L, m.y + s * L)
        tipU[i] = (m.x - s * U, m.y + c * U)

    def tip_repel(i):
        return (S[i].x - sin_h[i] * P, S[i].y + cos_h[i] * P)

    def tip_overlap(i):
        return (S[i].x + sin_h[i] * O, S[i].y - cos_h[i] * O)

    # --- bonded-pair forces and derived tolerance data ---
    acc: list[list[tuple]] = [[] for _ in range(n)]
    in_tol = [1] * n
    bond_ok: dict[tuple[int, int], bool] = {}
    tol_a = rules.tol_angle
    tol_d2 = rules.tol_dist * rules.tol_dist
    spring_k = params.spring_k
    twist_k = params.twist_k

    def bonded_pair(a: int, b: int, tax, tay, tbx, tby, offset, desired):
        ma, mb = S[a], S[b]
        fx = spring_k * (tbx - tax)
        fy = spring_k * (tby - tay)
        err = normalize_angle(mb.heading - ma.heading - offset - desired)
        tw = twist_k * err
        ta = (tax - ma.x) * fy - (tay - ma.y) * fx + tw
        tb = (tbx - mb.x) * (-fy) - (tby - mb.y) * (-fx) - tw
        acc[a].append((b, 0, fx, fy, ta))
        acc[b].append((a, 0, -fx, -fy, tb))
        sep2 = (tbx - tax) ** 2 + (tby - tay) ** 2
        ok = abs(err) <= tol_a and sep2 <= tol_d2
        key = (a, b) if a < b else (b, a)
        bond_ok[key] = ok
        if not ok:
            in_tol[a] = 0
            in_tol[b] = 0

    for m in S:
        a = m.id
        if m.right is not None:
            b = m.right
            desired, _defined = desired_sideways_angle(m, S[b])
            tax, tay = tipR[a]
            tbx, tby = tipL[b]
            bonded_pair(a, b, tax, tay, tbx, tby, 0.0, desired)
        if m.up is not None and a < m.up:
            b = m.up
            tax, tay = tipU[a]
            tbx, tby = tipU[b]
            bonded_pair(a, b, tax, tay, tbx, tby, math.pi, 0.0)

    derived = Derived(in_tolerance=dict(enumerate(in_tol)), bond_ok=bond_ok)

    # --- broad-phase candidate pairs ---
    reach = body.max_arm + params.field_radius
    if use_grid:
        grid = SpatialGrid(cell_size=2.0 * reach, reach=reach)
        grid.build((m.id, m.x, m.y) for m in S)
        candidates = grid.candidate_pairs()
    else:
        candidates = brute_force_pairs({m.id: (m.x, m.y) for m in S}, reach)

    # --- unbonded interactions: attraction, repulsion, bond requests ---
    requests: list[tuple[int, str, int, str]] = []
    field_r = params.field_radius
    overlap_r2 = (2.0 * field_r) ** 2
    repel_k = params.repel_k
    type_of = world.type_of

    def attract(a, arm_a, b, arm_b, tax, tay, tbx, tby):
        d2 = (tbx - tax) ** 2 + (tby - tay) ** 2
        if d2 > overlap_r2:
            return
        ma, mb = S[a], S[b]
        fx = spring_k * (tbx - tax)
        fy = spring_k * (tby - tay)
        ta = (tax - ma.x) * fy - (tay - ma.y) * fx
        tb = (tbx - mb.x) * (-fy) - (tby - mb.y) * (-fx)
        acc[a].append((b, 1, fx, fy, ta))
        acc[b].append((a, 1, -fx, -fy, tb))
        if d2 <= tol_d2:
            requests.append((a, arm_a, b, arm_b))

    def repel_pair(a, b, ma, mb):
        tax, tay = tip_repel(a)
        tbx, tby = tip_repel(b)
        dx = tax - tbx
        dy = tay - tby
        d = math.hypot(dx, dy)
        if d < field_r:
            mag = repel_k * (field_r - d)
            ux, uy = (dx / d, dy / d) if d > 1e-12 else (1.0, 0.0)
            fx, fy = mag * ux, mag * uy
            ta = (tax - ma.x) * fy - (tay - ma.y) * fx
            tb = (tbx - mb.x) * (-fy) - (tby - mb.y) * (-fx)
            acc[a].append((b, 2, fx, fy, ta))
            acc[b].append((a, 2, -fx, -fy, tb))

    for a, b in candidates:
        ma, mb = S[a], S[b]
        if ma.shatter or mb.shatter:
            continue
        # fast path: two bondless unfolded machines can only repel
        if (ma.up is None and mb.up is None and ma.left is None
                and ma.right is None and mb.left is None and mb.right is None
                and not ma.folded and not mb.folded):
            if ma.repel_counter > 0 and mb.repel_counter > 0:
                repel_pair(a, b, ma, mb)
            continue
        bonded = b in (ma.left, ma.right, ma.up, ma.overlap)
        if bonded:
            continue
        # repellor push between two active fields
        if ma.repel_counter > 0 and mb.repel_counter > 0:
            repel_pair(a, b, ma, mb)
        # up-arm bonding (replication or mesh growth)
        if up_bond_eligible(ma, mb, derived, type_of):
            tax, tay = tipU[a]
            tbx, tby = tipU[b]
            attract(a, "up", b, "up", tax, tay, tbx, tby)
        # sideways bonds: replication children and folded loop closure
        if not ma.folded and not mb.folded:
            if (ma.up is not None and mb.up is not None
                    and not ma.replicated and not mb.replicated):
                up_a, up_b = S[ma.up], S[mb.up]
                if up_a.right == mb.up and ma.left is None and mb.right is None:
                    ax, ay = tipL[a]
                    bx, by = tipR[b]
                    attract(a, "left", b, "right", ax, ay, bx, by)
                elif up_b.right == ma.up and mb.left is None and ma.right is None:
                    ax, ay = tipL[b]
                    bx, by = tipR[a]
                    attract(b, "left", a, "right", ax, ay, bx, by)
        elif ma.folded and mb.folded and not ma.unfold and not mb.unfold:
            if ma.left is None and mb.right is None:
                ax, ay = tipL[a]
                bx, by = tipR[b]
                attract(a, "left", b, "right", ax, ay, bx, by)
            if mb.left is None and ma.right is None:
                ax, ay = tipL[b]
                bx, by = tipR[a]
                attract(b, "left", a, "right", ax, ay, bx, by)
            # overlap detection: two mesh phenes occupying the same spot
            if (ma.in_mesh and mb.in_mesh and ma.overlap is None
                    and mb.overlap is None
                    and abs(normalize_angle(ma.heading - mb.heading))
                    <= rules.tol_overlap):
                ax, ay = tip_overlap(a)
                bx, by = tip_overlap(b)
                if (ax - bx) ** 2 + (ay - by) ** 2 <= overlap_r2:
                    requests.append((a, "overlap", b, "overlap"))

    # --- automaton transitions (identity fast path for idle free machines) ---
    peers = _PeerView(S)
    order = eval_order if eval_order is not None else range(n)
    transitions: list = [None] * n
    _IDENTITY = Transition(None, (), ())
    for i in order:
        if S[i].quiescent:
            transitions[i] = _IDENTITY
        else:
            transitions[i] = step_automaton(S[i], peers, rules, derived)
    # identity transitions reuse the snapshot object: every later phase only
    # ever reads it through `new`, and the old list is discarded at commit
    new = [t.new if t.new is not None else S[i]
           for i, t in enumerate(transitions)]

    # --- Brownian kicks and integration, in id order ---
    # this is brownian_kick + integrate inlined with the same arithmetic in
    # the same order (bit-identical trajectories), minus the per-machine
    # call and allocation overhead
    rng = world.rng
    seed = rng.seed
    counter = rng.counter
    noisy = (params.brownian_linear_sigma != 0.0
             or params.brownian_angular_sigma != 0.0)
    sig_l = params.brownian_linear_sigma
    sig_a = params.brownian_angular_sigma
    dt = params.dt
    mass = params.mass
    inertia = params.inertia
    lin_keep = 1.0 - params.linear_drag
    ang_keep = 1.0 - params.angular_drag
    clamp = params.speed_clamp
    cw = params.container_width
    ch = params.container_height
    sqrt, log, cos, sin, hypot = (math.sqrt, math.log, math.cos, math.sin,
                                  math.hypot)
    two_pi = 2.0 * math.pi
    u64 = (1 << 64) - 1
    dbl = 1.0 / (1 << 53)
    for i in range(n):
        contribs = acc[i]
        fx = fy = tq = 0.0
        if contribs:
            contribs.sort(key=lambda c: (c[0], c[1]))
            for _, _, cfx, cfy, ctq in contribs:
                fx += cfx
                fy += cfy
                tq += ctq
        m = S[i]
        vx = m.vx
        vy = m.vy
        om = m.omega
        if noisy:
            u = [0.0, 0.0, 0.0, 0.0]
            j = 0
            while j < 4:
                counter = (counter + 1) & u64
                z = (seed + counter * 0x9E3779B97F4A7C15) & u64
                z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & u64
                z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & u64
                v = ((z ^ (z >> 31)) >> 11) * dbl
                if v == 0.0 and (j == 0 or j == 2):
                    continue
                u[j] = v
                j += 1
            r = sqrt(-2.0 * log(u[0]))
            a = two_pi * u[1]
            vx += sig_l * (r * cos(a))
            vy += sig_l * (r * sin(a))
            om += sig_a * (sqrt(-2.0 * log(u[2])) * cos(two_pi * u[3]))
        vx = (vx + dt * fx / mass) * lin_keep
        vy = (vy + dt * fy / mass) * lin_keep
        sp = hypot(vx, vy)
        if sp > clamp:
            scale = clamp / sp
            vx *= scale
            vy *= scale
        om = (om + dt * tq / inertia) * ang_keep
        if om > clamp:
            om = clamp
        elif om < -clamp:
            om = -clamp
        x = m.x + dt * vx
        y = m.y + dt * vy
        if x < 0.0:
            x = 0.0
            if vx < 0.0:
                vx = 0.0
        elif x > cw:
            x = cw
            if vx > 0.0:
                vx = 0.0
        if y < 0.0:
            y = 0.0
            if vy < 0.0:
                vy = 0.0
        elif y > ch:
            y = ch
            if vy > 0.0:
                vy = 0.0
        heading = normalize_heading(m.heading + dt * om)
        nm = new[i]
        nm.x = x
        nm.y = y
        nm.heading = heading
        nm.vx = vx
        nm.vy = vy
        nm.omega = om
    rng.counter = counter

    # --- commit automaton drops (symmetric) ---
    broken: set[tuple[int, int, str]] = set()

    def drop(a: int, arm: str, b: int, reason: str):
        setattr(new[a], arm, None)
        marm = _MIRROR_ARM[arm]
        if getattr(new[b], marm) == a:
            setattr(new[b], marm, None)
        key = (a, b, arm) if a < b else (b, a, _MIRROR_ARM[arm])
        if key not in broken:
            broken.add(key)
            events.append(Event(dt_step, "BondBroken", tuple(sorted((a, b))),
                                {"arm": min(arm, _MIRROR_ARM[arm]),
                                 "reason": reason}))

    for i in range(n):
        for arm, other, reason in transitions[i].drops:
            drop(i, arm, other, reason)
        for kind, detail in transitions[i].events:
            events.append(Event(dt_step, kind, (i,),
                                {k: v for k, v in detail.items()
                                 if k != "machine"}))

    # --- split completions ---
    completed_pairs: list[tuple[int, int]] = []
    seen_pairs: set[tuple[int, int]] = set()
    for i in range(n):
        if new[i].split_state == 3 and S[i].split_state != 3:
            j = S[i].up
            if j is None:
                continue
            key = (i, j) if i < j else (j, i)
            if key in seen_pairs:
                continue
            seen_pairs.add(key)
            completed_pairs.append(key)
            drop(i, "up", j, "split")
            for x, y in ((i, j), (j, i)):
                mx = new[x]
                mx.replicated = 1
                mx.fold_counter = 0
                mx.repel_counter = rules.repel_duration
                if S[y].seed_phene:
                    mx.in_mesh = 1
                    mx.folded = 1
                    new[y].seed_phene = 0
            if new[j].split_state != 3:
                new[j].split_state = 1

    if completed_pairs:
        _emit_split_events(dt_step, new, completed_pairs, world.type_of, events)

    # --- arbitration and bond commit ---
    if requests:
        accepted = arbitrate(
            requests, lambda mid, arm: getattr(new[mid], arm) is None)
        for a, arm_a, b, arm_b in accepted:
            setattr(new[a], arm_a, b)
            setattr(new[b], arm_b, a)
            kind = ("up" if arm_a == "up" else
                    "overlap" if arm_a == "overlap" else "sideways")
            events.append(Event(dt_step, "BondFormed", (a, b),
                                {"arm": kind}))
            if kind == "up":
                new[a].reset_counter = 1
                new[b].reset_counter = 1
                if new[a].folded and new[b].folded:
                    events.append(Event(dt_step, "MeshJoin", (a, b)))

    # --- finalize ---
    world.machines = new
    world.step_number = dt_step + 1
    events.sort(key=Event.sort_key)
    if check_every and world.step_number % check_every == 0:
        world.validate()
    return events


def _strand_ids(machines: list[Machine], start: int) -> list[int]:
    """Left-to-right ids of the sideways chain containing `start`."""
    cur = start
    seen = {start}
    while machines[cur].left is not None and machines[cur].left not in seen:
        cur = machines[cur].left
        seen.add(cur)
    out = [cur]
    visited = {cur}
    while True:
        nxt = machines[out[-1]].right
        if nxt is None or nxt in visited:
            break
        out.append(nxt)
        visited.add(nxt)
    return out


def _emit_split_events(step_no: int, new: list[Machine],
                       completed: list[tuple[int, int]],
                       type_of: dict[int, int], events: list[Event]) -> None:
    """Emit a Split (and possibly SeedPheneCreated) once the two strands of a
    replication pair have no up bonds left between them."""
    done: set[frozenset] = set()
    for i, j in completed:
        strand_i = _strand_ids(new, i)
        strand_j = _strand_ids(new, j)
        key = frozenset((min(strand_i), min(strand_j)))
        if key in done:
            continue
        done.add(key)
        set_j = set(strand_j)
        if any(new[x].up is not None and new[x].up in set_j for x in strand_i):
            continue  # still tethered; Split fires on a later pair
        a_ids, b_ids = sorted((strand_i, strand_j), key=min)
        detail = {
            "strand_a": list(a_ids), "types_a": [type_of[x] for x in a_ids],
            "strand_b": list(b_ids), "types_b": [type_of[x] for x in b_ids],
        }
        subjects = tuple(sorted(a_ids + b_ids))
        events.append(Event(step_no, "Split", subjects, detail))
        for ids in (a_ids, b_ids):
            if all(new[x].folded and new[x].in_mesh for x in ids):
                events.append(Event(step_no, "SeedPheneCreated", tuple(sorted(ids))))


# ---------------------------------------------------------------------------
# External interventions and the run loop
# ---------------------------------------------------------------------------


def sever_bond(world: World, a: int, b: int) -> list[Event]:
    """Forcibly delete a bond between steps (an unexpected loss: both
    machines immediately raise their shatter flags)."""
    ma, mb = world.machines[a], world.machines[b]
    arm = next((arm for arm, other in ma.bonds() if other == b), None)
    if arm is None:
        raise ValueError(f"machines {a} and {b} are not bonded")
    setattr(ma, arm, None)
    setattr(mb, _MIRROR_ARM[arm], None)
    ma.shatter = 1
    mb.shatter = 1
    return [
        Event(world.step_number, "BondBroken", tuple(sorted((a, b))),
              {"arm": min(arm, _MIRROR_ARM[arm]), "reason": "severed"}),
        Event(world.step_number, "Shatter", (a,)),
        Event(world.step_number, "Shatter", (b,)),
    ]


def run(world: World, max_steps: int,
        on_step: Optional[Callable[[World, list[Event]], None]] = None,
        stop_when: Optional[Callable[[World, list[Event]], bool]] = None,
        use_grid: bool = True, check_every: int = 1024) -> list[Event]:
    """Step repeatedly, collecting events.  `stop_when` is evaluated after
    each step and permits early exit."""
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    log: list[Event] = []
    for _ in range(max_steps):
        evs = step(world, use_grid=use_grid, check_every=check_every)
        log.extend(evs)
        if on_step is not None:
            on_step(world, evs)
        if stop_when is not None and stop_when(world, evs):
            break
    return log


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------

_MAGIC = b"JV2S"
_VERSION = 1
_PHYS_FIELDS = ("dt", "field_radius", "spring_k", "twist_k", "repel_k",
                "brownian_linear_sigma", "brownian_angular_sigma",
                "linear_drag", "angular_drag", "mass", "inertia",
                "speed_clamp", "container_width", "container_height")
_RULE_INT_FIELDS = ("fold_limit", "stress_limit", "repel_duration")
_RULE_FLOAT_FIELDS = ("tol_angle", "tol_dist", "tol_overlap")
_BODY_FIELDS = ("left", "right", "up", "repellor", "overlap")
_M_SMALL = ("type", "strand_position", "split_state", "reset_counter",
            "fold_now", "unfold", "seed_gene", "seed_phene", "in_mesh",
            "replicated", "shatter", "folded")
_M_COUNTERS = ("fold_counter", "repel_counter", "stress_counter")
_M_BONDS = ("left", "right", "up", "overlap")
_M_FLOATS = ("x", "y", "heading", "vx", "vy", "omega")

_MACHINE_STRUCT = struct.Struct("<I" + "B" * len(_M_SMALL)
                                + "I" * len(_M_COUNTERS)
                                + "i" * len(_M_BONDS)
                                + "d" * len(_M_FLOATS))


class CheckpointError(ValueError):
    pass


def checkpoint(world: World) -> bytes:
    """Serialize the complete world (including RNG state) losslessly."""
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<I", _VERSION)
    out += struct.pack("<14d", *(getattr(world.params, f) for f in _PHYS_FIELDS))
    out += struct.pack("<3I", *(getattr(world.rules, f) for f in _RULE_INT_FIELDS))
    out += struct.pack("<3d", *(getattr(world.rules, f) for f in _RULE_FLOAT_FIELDS))
    out += struct.pack("<5d", *(getattr(world.body, f) for f in _BODY_FIELDS))
    out += struct.pack("<QQQ", world.step_number, *world.rng.state())
    out += struct.pack("<I", len(world.machines))
    for m in world.machines:
        small = [getattr(m, f) for f in _M_SMALL]
        counters = [getattr(m, f) for f in _M_COUNTERS]
        bonds = [-1 if getattr(m, f) is None else getattr(m, f) for f in _M_BONDS]
        floats = [getattr(m, f) for f in _M_FLOATS]
        out += _MACHINE_STRUCT.pack(m.id, *small, *counters, *bonds, *floats)
    return bytes(out)


def restore(data: bytes) -> World:
    """Rebuild a world from checkpoint bytes; validates format and ranges."""
    try:
        if data[:4] != _MAGIC:
            raise CheckpointError("bad magic; not a world checkpoint")
        off = 4
        (version,) = struct.unpack_from("<I", data, off)
        off += 4
        if version != _VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        phys = struct.unpack_from("<14d", data, off)
        off += 14 * 8
        rint = struct.unpack_from("<3I", data, off)
        off += 12
        rflt = struct.unpack_from("<3d", data, off)
        off += 24
        bvals = struct.unpack_from("<5d", data, off)
        off += 40
        step_no, rseed, rcounter = struct.unpack_from("<QQQ", data, off)
        off += 24
        (count,) = struct.unpack_from("<I", data, off)
        off += 4
        params = PhysicsParams(**dict(zip(_PHYS_FIELDS, phys)))
        rules = RuleParams(**dict(zip(_RULE_INT_FIELDS, rint)),
                           **dict(zip(_RULE_FLOAT_FIELDS, rflt)))
        body = MachineBody(**dict(zip(_BODY_FIELDS, bvals)))
        machines = []
        for _ in range(count):
            vals = _MACHINE_STRUCT.unpack_from(data, off)
            off += _MACHINE_STRUCT.size
            mid = vals[0]
            small = vals[1:1 + len(_M_SMALL)]
            counters = vals[1 + len(_M_SMALL):1 + len(_M_SMALL) + 3]
            bonds = vals[1 + len(_M_SMALL) + 3:1 + len(_M_SMALL) + 7]
            floats = vals[1 + len(_M_SMALL) + 7:]
            m = Machine(mid, small[0])
            for f, v in zip(_M_SMALL[1:], small[1:]):
                if f in ("strand_position",) and v not in (1, 2, 3):
                    raise CheckpointError(f"bad strand_position {v}")
                if f == "split_state" and v not in (1, 2, 3, 4):
                    raise CheckpointError(f"bad split_state {v}")
                if f not in ("strand_position", "split_state") and v not in (0, 1):
                    raise CheckpointError(f"flag {f} out of range: {v}")
                setattr(m, f, v)
            for f, v in zip(_M_COUNTERS, counters):
                setattr(m, f, v)
            for f, v in zip(_M_BONDS, bonds):
                setattr(m, f, None if v == -1 else v)
            for f, v in zip(_M_FLOATS, floats):
                if not math.isfinite(v):
                    raise CheckpointError(f"non-finite {f} for machine {mid}")
                setattr(m, f, v)
            machines.append(m)
        if off != len(data):
            raise CheckpointError("trailing bytes after machine records")
        world = World(params, rules, body, machines, Rng(rseed, rcounter))
        world.step_number = step_no
        world.validate()
        return world
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from None
