"""Machine body geometry: the five-arm plus shape, poses, and arm-tip math.

Every machine is a rigid plus sign with five arms radiating from a single
junction point (the "middle", treated as the center of mass).  In the
canonical orientation (heading 0) the long left/right arms lie on the x axis,
the medium up arm points along +y, the repellor arm also points along +y
(hidden under the up arm), and the short overlap-detector arm points along -y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

TWO_PI = 2.0 * math.pi

MACHINE_TYPES = (1, 2, 3, 4)


class Arm(IntEnum):
    LEFT = 0
    RIGHT = 1
    UP = 2
    REPELLOR = 3
    OVERLAP = 4


# Canonical unit direction of each arm at heading 0.
ARM_DIRECTION: dict[Arm, tuple[float, float]] = {
    Arm.LEFT: (-1.0, 0.0),
    Arm.RIGHT: (1.0, 0.0),
    Arm.UP: (0.0, 1.0),
    Arm.REPELLOR: (0.0, 1.0),
    Arm.OVERLAP: (0.0, -1.0),
}


def normalize_angle(a: float) -> float:
    """Map an angle to the interval (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a > math.pi:
        a -= TWO_PI
    elif a <= -math.pi:
        a += TWO_PI
    return a


def normalize_heading(a: float) -> float:
    """Map an angle to [0, 2*pi)."""
    a = math.fmod(a, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    return a


@dataclass(frozen=True)
class MachineBody:
    """Arm lengths of the plus-shaped rigid body, in world units.

    Left and right are the longest and equal; up is strictly shorter; the
    repellor and overlap-detector arms are strictly shorter than up.
    """

    left: float = 1.0
    right: float = 1.0
    up: float = 0.6
    repellor: float = 0.35
    overlap: float = 0.35

    def __post_init__(self) -> None:
        if self.left != self.right:
            raise ValueError("left and right arms must be equal in length")
        if not (self.up < self.left):
            raise ValueError("up arm must be shorter than the left/right arms")
        if not (self.repellor < self.up and self.overlap < self.up):
            raise ValueError("repellor and overlap arms must be shorter than up")
        if min(self.left, self.up, self.repellor, self.overlap) <= 0:
            raise ValueError("arm lengths must be positive")

    def length(self, arm: Arm) -> float:
        return (self.left, self.right, self.up, self.repellor, self.overlap)[arm]

    @property
    def max_arm(self) -> float:
        return self.left

    @property
    def sideways_pitch(self) -> float:
        """Rest separation of middles across a sideways bond."""
        return self.left + self.right

    @property
    def up_pitch(self) -> float:
        """Rest separation of middles across an up bond."""
        return 2.0 * self.up


@dataclass
class Pose:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0  # radians, CCW-positive, kept in [0, 2*pi)


@dataclass
class Kinematics:
    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0


def arm_tip(pose: Pose, body: MachineBody, arm: Arm) -> tuple[float, float]:
    """World coordinates of an arm tip: middle + rotate(dir * length, heading)."""
    dx, dy = ARM_DIRECTION[arm]
    ln = body.length(arm)
    c = math.cos(pose.heading)
    s = math.sin(pose.heading)
    ax = dx * ln
    ay = dy * ln
    return (pose.x + c * ax - s * ay, pose.y + s * ax + c * ay)


def relative_bond_angle(pose_a: Pose, pose_b: Pose, bond_kind: str) -> float:
    """Signed relative angle of a bond, in (-pi, pi].

    For a sideways bond (a's right arm to b's left arm) this is simply
    heading_b - heading_a.  For an up bond the two machines face opposite
    directions at rest, so pi is subtracted: 0 means exactly anti-parallel.
    """
    d = pose_b.heading - pose_a.heading
    if bond_kind == "up":
        d -= math.pi
    elif bond_kind != "sideways":
        raise ValueError(f"unknown bond kind: {bond_kind!r}")
    return normalize_angle(d)
