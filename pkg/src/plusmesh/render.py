"""Deterministic SVG snapshots of a world.

Machines are drawn as their five arm segments, bonds as thin lines between
the bonded tips.  Element order, attribute order, and number formatting are
all fixed, so the output is a pure function of the snapshot and can be
compared against golden files.
"""

from __future__ import annotations

from typing import IO

from .engine import World
from .geometry import Arm, arm_tip, Pose

_ARM_ORDER = (Arm.LEFT, Arm.RIGHT, Arm.UP, Arm.REPELLOR, Arm.OVERLAP)

# legend: grey container; black gene/free arms; blue folded arms; green when
# also in the mesh; bond colours by kind
_COLOUR_FREE = "#404040"
_COLOUR_FOLDED = "#1f6fb4"
_COLOUR_MESH = "#2c8a3d"
_BOND_COLOUR = {"sideways": "#c0392b", "up": "#e67e22", "overlap": "#8e44ad"}
_ARM_MIRROR = {"left": "right", "right": "left", "up": "up",
               "overlap": "overlap"}
_ARM_TO_ENUM = {"left": Arm.LEFT, "right": Arm.RIGHT, "up": Arm.UP,
                "overlap": Arm.OVERLAP}


def _f(v: float) -> str:
    s = f"{v:.4f}"
    return "0.0000" if s == "-0.0000" else s


def render_frame(world: World) -> str:
    """Render one snapshot as a complete SVG document string."""
    w = world.params.container_width
    h = world.params.container_height
    body = world.body
    lines: list[str] = []
    lines.append('<?xml version="1.0" encoding="UTF-8"?>')
    lines.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_f(w)} {_f(h)}" '
        f'width="800" height="{_f(800.0 * h / w)}">')
    lines.append(
        f'<rect x="0" y="0" width="{_f(w)}" height="{_f(h)}" '
        'fill="#ececec" stroke="#999999" stroke-width="0.05"/>')

    def flip(y: float) -> float:
        return h - y  # SVG y grows downward

    # bonds first so arms draw on top; one line per pair, lower id first
    for m in world.machines:
        pose_m = Pose(m.x, m.y, m.heading)
        for arm, other in m.bonds():
            if other < m.id:
                continue
            o = world.machines[other]
            ax, ay = arm_tip(pose_m, body, _ARM_TO_ENUM[arm])
            bx, by = arm_tip(Pose(o.x, o.y, o.heading), body,
                             _ARM_TO_ENUM[_ARM_MIRROR[arm]])
            kind = ("up" if arm == "up" else
                    "overlap" if arm == "overlap" else "sideways")
            lines.append(
                f'<line x1="{_f(ax)}" y1="{_f(flip(ay))}" x2="{_f(bx)}" '
                f'y2="{_f(flip(by))}" stroke="{_BOND_COLOUR[kind]}" '
                'stroke-width="0.03"/>')

    for m in world.machines:
        colour = (_COLOUR_MESH if m.in_mesh else
                  _COLOUR_FOLDED if m.folded else _COLOUR_FREE)
        pose = Pose(m.x, m.y, m.heading)
        segs = []
        for arm in _ARM_ORDER:
            tx, ty = arm_tip(pose, body, arm)
            segs.append(f"M {_f(m.x)} {_f(flip(m.y))} L {_f(tx)} {_f(flip(ty))}")
        lines.append(
            f'<path d="{" ".join(segs)}" stroke="{colour}" '
            'stroke-width="0.06" fill="none"/>')

    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_frame(world: World, out: IO[str]) -> None:
    out.write(render_frame(world))
