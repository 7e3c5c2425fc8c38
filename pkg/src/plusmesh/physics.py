"""Virtual liquid physics: spring/twist bond forces, Brownian kicks, viscous
drag, wall containment, and the spatial grid for broad-phase neighbour search.

Forces act only between arm-tip fields; machine bodies never collide.  The
integrator is semi-implicit Euler with per-step multiplicative drag, which is
stable for this heavily damped regime.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

from .geometry import Kinematics, MachineBody, Pose, arm_tip, normalize_angle, \
    normalize_heading, Arm


@dataclass
class PhysicsParams:
    """All tuned physical constants.  Defaults are calibrated for desk-scale
    runs (small containers, tens of machines)."""

    dt: float = 0.1
    field_radius: float = 0.25
    spring_k: float = 4.0
    twist_k: float = 1.5
    repel_k: float = 8.0
    brownian_linear_sigma: float = 0.1
    brownian_angular_sigma: float = 0.05
    linear_drag: float = 0.08
    angular_drag: float = 0.08
    mass: float = 1.0
    inertia: float = 0.5
    speed_clamp: float = 0.5
    container_width: float = 40.0
    container_height: float = 40.0

    def __post_init__(self) -> None:
        positives = (self.dt, self.field_radius, self.spring_k, self.twist_k,
                     self.repel_k, self.mass, self.inertia, self.speed_clamp,
                     self.container_width, self.container_height)
        if min(positives) <= 0:
            raise ValueError("physics constants must be strictly positive")
        if self.brownian_linear_sigma < 0 or self.brownian_angular_sigma < 0:
            raise ValueError("Brownian sigmas must be non-negative")
        if not (0 < self.linear_drag < 1 and 0 < self.angular_drag < 1):
            raise ValueError("drag factors must lie in (0, 1)")


_U64 = (1 << 64) - 1
_DOUBLE_SCALE = 1.0 / (1 << 53)


class Rng:
    """Deterministic 64-bit shift-mix generator (counter mode).

    Each output is the splitmix64 finalizer applied to seed + counter, so the
    stream state is just two integers and checkpoints are trivial.  The same
    seed produces the same stream on every platform.
    """

    __slots__ = ("seed", "counter")

    def __init__(self, seed: int, counter: int = 0):
        self.seed = seed & _U64
        self.counter = counter & _U64

    def next_u64(self) -> int:
        self.counter = (self.counter + 1) & _U64
        z = (self.seed + self.counter * 0x9E3779B97F4A7C15) & _U64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _DOUBLE_SCALE

    def gauss_pair(self) -> tuple[float, float]:
        """Two independent standard normals (Box-Muller)."""
        u1 = self.uniform()
        while u1 == 0.0:
            u1 = self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        a = 2.0 * math.pi * u2
        return r * math.cos(a), r * math.sin(a)

    def state(self) -> tuple[int, int]:
        return (self.seed, self.counter)


def brownian_kick(rng: Rng, params: PhysicsParams) -> tuple[float, float, float]:
    """Zero-mean velocity perturbation (dvx, dvy, domega).

    Always consumes a fixed number of draws so the stream stays aligned
    regardless of which component is used where.
    """
    if params.brownian_linear_sigma == 0.0 and params.brownian_angular_sigma == 0.0:
        return (0.0, 0.0, 0.0)
    # two Box-Muller pairs, three normals used; the generator arithmetic is
    # inlined because this is the innermost per-machine cost of a step
    seed = rng.seed
    counter = rng.counter
    u = [0.0, 0.0, 0.0, 0.0]
    j = 0
    while j < 4:
        counter = (counter + 1) & _U64
        z = (seed + counter * 0x9E3779B97F4A7C15) & _U64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
        v = ((z ^ (z >> 31)) >> 11) * _DOUBLE_SCALE
        if v == 0.0 and (j == 0 or j == 2):
            continue  # log() input must be nonzero; redraw like next_u64
        u[j] = v
        j += 1
    rng.counter = counter
    r = math.sqrt(-2.0 * math.log(u[0]))
    a = 2.0 * math.pi * u[1]
    g1 = r * math.cos(a)
    g2 = r * math.sin(a)
    g3 = math.sqrt(-2.0 * math.log(u[2])) * math.cos(2.0 * math.pi * u[3])
    s = params.brownian_linear_sigma
    return (s * g1, s * g2, params.brownian_angular_sigma * g3)


# ---------------------------------------------------------------------------
# Forces
# ---------------------------------------------------------------------------

_BOND_ARMS = {"sideways": (Arm.RIGHT, Arm.LEFT), "up": (Arm.UP, Arm.UP)}
_BOND_OFFSET = {"sideways": 0.0, "up": math.pi}


def bond_forces(pose_a: Pose, pose_b: Pose, body: MachineBody, bond_kind: str,
                desired_angle: float, params: PhysicsParams):
    """Spring + twist forces across a bonded arm pair.

    The linear spring pulls the two tips together; the twist torque drives
    the relative heading toward the desired bond angle.  Returns
    ((fax, fay), (fbx, fby), torque_a, torque_b); the pair's linear forces
    always sum to zero.
    """
    arm_a, arm_b = _BOND_ARMS[bond_kind]
    tax, tay = arm_tip(pose_a, body, arm_a)
    tbx, tby = arm_tip(pose_b, body, arm_b)
    k = params.spring_k
    fx = k * (tbx - tax)
    fy = k * (tby - tay)
    # torque from tip force about each middle: r x F
    ta = (tax - pose_a.x) * fy - (tay - pose_a.y) * fx
    tb = (tbx - pose_b.x) * (-fy) - (tby - pose_b.y) * (-fx)
    err = normalize_angle(pose_b.heading - pose_a.heading
                          - _BOND_OFFSET[bond_kind] - desired_angle)
    tw = params.twist_k * err
    ta += tw
    tb -= tw
    return (fx, fy), (-fx, -fy), ta, tb


def repellor_force(pose_a: Pose, pose_b: Pose, body: MachineBody,
                   params: PhysicsParams):
    """Equal-and-opposite push between two active repellor tips.

    Magnitude repel_k * (field_radius - separation), zero beyond the field.
    """
    tax, tay = arm_tip(pose_a, body, Arm.REPELLOR)
    tbx, tby = arm_tip(pose_b, body, Arm.REPELLOR)
    dx = tax - tbx
    dy = tay - tby
    d = math.hypot(dx, dy)
    if d >= params.field_radius:
        return (0.0, 0.0), (0.0, 0.0), 0.0, 0.0
    mag = params.repel_k * (params.field_radius - d)
    if d > 1e-12:
        ux, uy = dx / d, dy / d
    else:
        ux, uy = 1.0, 0.0  # coincident tips: deterministic fallback direction
    fx, fy = mag * ux, mag * uy
    ta = (tax - pose_a.x) * fy - (tay - pose_a.y) * fx
    tb = (tbx - pose_b.x) * (-fy) - (tby - pose_b.y) * (-fx)
    return (fx, fy), (-fx, -fy), ta, tb


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


def integrate(pose: Pose, kin: Kinematics, fx: float, fy: float, torque: float,
              params: PhysicsParams) -> tuple[Pose, Kinematics]:
    """Semi-implicit Euler step with drag, speed clamp, and wall containment.

    The middle is clamped to the container; the velocity component into the
    wall is zeroed (slippery walls).
    """
    dt = params.dt
    vx = (kin.vx + dt * fx / params.mass) * (1.0 - params.linear_drag)
    vy = (kin.vy + dt * fy / params.mass) * (1.0 - params.linear_drag)
    sp = math.hypot(vx, vy)
    if sp > params.speed_clamp:
        scale = params.speed_clamp / sp
        vx *= scale
        vy *= scale
    om = (kin.omega + dt * torque / params.inertia) * (1.0 - params.angular_drag)
    if om > params.speed_clamp:
        om = params.speed_clamp
    elif om < -params.speed_clamp:
        om = -params.speed_clamp
    x = pose.x + dt * vx
    y = pose.y + dt * vy
    if x < 0.0:
        x = 0.0
        if vx < 0.0:
            vx = 0.0
    elif x > params.container_width:
        x = params.container_width
        if vx > 0.0:
            vx = 0.0
    if y < 0.0:
        y = 0.0
        if vy < 0.0:
            vy = 0.0
    elif y > params.container_height:
        y = params.container_height
        if vy > 0.0:
            vy = 0.0
    heading = normalize_heading(pose.heading + dt * om)
    return Pose(x, y, heading), Kinematics(vx, vy, om)


# ---------------------------------------------------------------------------
# Spatial index
# ---------------------------------------------------------------------------


class SpatialGrid:
    """Uniform hash grid over machine middles for broad-phase queries.

    Queries are inflated by `reach` (max arm length + field radius) so that
    any pair whose arm-tip fields could interact is always returned; exact
    tip-circle tests happen downstream.
    """

    def __init__(self, cell_size: float, reach: float):
        if cell_size <= 0:
            raise ValueError("cell size must be positive")
        self.cell_size = cell_size
        self.reach = reach
        self.cells: dict[tuple[int, int], list[int]] = defaultdict(list)
        self.points: dict[int, tuple[float, float]] = {}

    def insert(self, mid: int, x: float, y: float) -> None:
        cs = self.cell_size
        self.cells[(int(x // cs), int(y // cs))].append(mid)
        self.points[mid] = (x, y)

    def build(self, points: Iterable[tuple[int, float, float]]) -> None:
        self.cells.clear()
        self.points.clear()
        cells = self.cells
        pts = self.points
        cs = self.cell_size
        for mid, x, y in points:
            cells[(int(x // cs), int(y // cs))].append(mid)
            pts[mid] = (x, y)

    def neighbours_within(self, x: float, y: float, radius: float) -> set[int]:
        """Ids of machines whose middle lies within radius + reach of (x, y)."""
        r = radius + self.reach
        cs = self.cell_size
        cx0 = int((x - r) // cs)
        cx1 = int((x + r) // cs)
        cy0 = int((y - r) // cs)
        cy1 = int((y + r) // cs)
        r2 = r * r
        out: set[int] = set()
        cells = self.cells
        pts = self.points
        for cx in range(cx0, cx1 + 1):
            for cy in range(cy0, cy1 + 1):
                for mid in cells.get((cx, cy), ()):
                    px, py = pts[mid]
                    if (px - x) ** 2 + (py - y) ** 2 <= r2:
                        out.add(mid)
        return out

    def candidate_pairs(self) -> list[tuple[int, int]]:
        """All pairs (i < j) whose middles lie within 2 * reach, sorted."""
        r2 = (2.0 * self.reach) ** 2
        offsets = ((1, 0), (1, 1), (0, 1), (-1, 1))
        pairs: list[tuple[int, int]] = []
        pts = self.points
        for (cx, cy), ids in self.cells.items():
            for i_pos, a in enumerate(ids):
                ax, ay = pts[a]
                for b in ids[i_pos + 1:]:
                    bx, by = pts[b]
                    if (ax - bx) ** 2 + (ay - by) ** 2 <= r2:
                        pairs.append((a, b) if a < b else (b, a))
            for ox, oy in offsets:
                other = self.cells.get((cx + ox, cy + oy))
                if not other:
                    continue
                for a in ids:
                    ax, ay = pts[a]
                    for b in other:
                        bx, by = pts[b]
                        if (ax - bx) ** 2 + (ay - by) ** 2 <= r2:
                            pairs.append((a, b) if a < b else (b, a))
        pairs.sort()
        return pairs


def brute_force_neighbours(points: dict[int, tuple[float, float]], x: float,
                           y: float, radius: float, reach: float) -> set[int]:
    """O(n) oracle with the same inflated-radius contract as the grid."""
    r2 = (radius + reach) ** 2
    return {mid for mid, (px, py) in points.items()
            if (px - x) ** 2 + (py - y) ** 2 <= r2}


def brute_force_pairs(points: dict[int, tuple[float, float]],
                      reach: float) -> list[tuple[int, int]]:
    """O(n^2) candidate-pair oracle matching SpatialGrid.candidate_pairs."""
    r2 = (2.0 * reach) ** 2
    ids = sorted(points)
    pairs = []
    for i, a in enumerate(ids):
        ax, ay = points[a]
        for b in ids[i + 1:]:
            bx, by = points[b]
            if (ax - bx) ** 2 + (ay - by) ** 2 <= r2:
                pairs.append((a, b))
    return pairs
