"""Seed-strand tooling: parsing, the turtle-walk fold predictor, the
meshability validator, and the inverse shape-to-seed compiler.

A seed is just an ordered sequence of machine types.  Folding geometry is
predicted symbolically: all bond angles are whole degrees, so loop closure is
decided by an exact integer turn sum, with a tiny positional epsilon as a
belt-and-braces check on the float walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .rules import (bend_location, bend_location_bond_allowed, fold_angle_deg,
                    phene_up_bond_allowed)

CLOSURE_EPS = 1e-9
UNIT_PITCH = 2.0  # rest separation of sideways-bonded middles


class SeedError(ValueError):
    """Seed text or geometry problem; message carries the position."""


@dataclass(frozen=True)
class SeedSpec:
    types: tuple[int, ...]

    def __post_init__(self):
        if len(self.types) < 3:
            raise SeedError(
                f"seed needs at least 3 machines, got {len(self.types)}")
        for i, t in enumerate(self.types):
            if t not in (1, 2, 3, 4):
                raise SeedError(f"machine type out of range at token {i + 1}: {t}")

    @property
    def text(self) -> str:
        return "-".join(str(t) for t in self.types)

    def __len__(self) -> int:
        return len(self.types)


def parse_seed(text: str) -> SeedSpec:
    """Parse dash-separated machine types ("2-2-2"); whitespace tolerated."""
    tokens = [t.strip() for t in text.strip().split("-")]
    if tokens == [""]:
        raise SeedError("empty seed text")
    types = []
    for i, tok in enumerate(tokens, start=1):
        if not tok.isdigit():
            raise SeedError(f"parse error at token {i}: {tok!r} is not a digit")
        v = int(tok)
        if not 1 <= v <= 4:
            raise SeedError(f"parse error at token {i}: type {v} outside 1-4")
        types.append(v)
    if len(types) < 3:
        raise SeedError(f"seed needs at least 3 machines, got {len(types)}")
    return SeedSpec(tuple(types))


def mirror_seed(spec: SeedSpec) -> SeedSpec:
    """The mirror-image template: same types read right to left."""
    return SeedSpec(tuple(reversed(spec.types)))


@dataclass(frozen=True)
class FoldPlan:
    """Ideal folded geometry of a seed at unit sideways pitch."""

    vertices: tuple[tuple[float, float], ...]
    turn_angles: tuple[int, ...]  # whole degrees, one per bond (cyclic)
    closed: bool
    closure_distance: float
    closure_heading_deg: int

    @property
    def corner_count(self) -> int:
        return sum(1 for t in self.turn_angles if t != 0)

    @property
    def total_turn_deg(self) -> int:
        return sum(self.turn_angles)


def predict_fold(spec: SeedSpec) -> FoldPlan:
    """Turtle-walk the loop: emit a vertex, advance one pitch, turn CCW by
    the bond angle of the (current, next) type pair.

    Closed means the walk returns to the origin (within CLOSURE_EPS) and the
    turns sum to exactly 360 degrees.  An undefined bond angle anywhere along
    the loop is an error naming the offending pair.
    """
    types = spec.types
    n = len(types)
    turns = []
    for i in range(n):
        a, b = types[i], types[(i + 1) % n]
        deg = fold_angle_deg(a, b)
        if deg is None:
            raise SeedError(
                f"fold angle undefined for type pair ({a},{b}) at position "
                f"{i + 1}")
        turns.append(deg)
    x = y = 0.0
    heading = 0
    vertices = []
    for i in range(n):
        vertices.append((x, y))
        rad = math.radians(heading)
        x += UNIT_PITCH * math.cos(rad)
        y += UNIT_PITCH * math.sin(rad)
        heading += turns[i]
    dist = math.hypot(x, y)
    total = sum(turns)
    closed = total == 360 and dist <= CLOSURE_EPS
    return FoldPlan(tuple(vertices), tuple(turns), closed, dist, total % 360)


@dataclass
class ValidationReport:
    """Everything the validator knows about a seed, printable or structured."""

    seed: SeedSpec
    closed: bool = False
    corner_count: int = 0
    total_turn_deg: int = 0
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    # per machine: (index, type, bend location, up-bondable in a mesh)
    machines: list[tuple[int, int, int, bool]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def meshable_count(self) -> int:
        return sum(1 for _, _, _, m in self.machines if m)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed.text,
            "closed": self.closed,
            "corners": self.corner_count,
            "total_turn_deg": self.total_turn_deg,
            "errors": list(self.errors),
            "warnings": list(self.warnings),
            "machines": [
                {"index": i, "type": t, "bend_location": bl, "meshable": m}
                for i, t, bl, m in self.machines
            ],
        }

    def to_text(self) -> str:
        lines = [f"seed {self.seed.text}: "
                 + ("closed" if self.closed else "not closed")
                 + f", {self.corner_count} corners, total turn "
                 + f"{self.total_turn_deg} deg"]
        for i, t, bl, m in self.machines:
            lines.append(f"  machine {i}: type {t}, bend location {bl}, "
                         + ("up-bondable" if m else "non-bonding"))
        for w in self.warnings:
            lines.append(f"  warning: {w}")
        for e in self.errors:
            lines.append(f"  error: {e}")
        lines.append("  verdict: " + ("valid" if self.ok else "invalid"))
        return "\n".join(lines)


def _swap_sides(bl: int) -> int:
    """Bend location of the same machine seen from the mirror strand."""
    return {1: 2, 2: 1, 3: 3, 4: 4}[bl]


def validate_seed(spec: SeedSpec) -> ValidationReport:
    """Closure plus meshability: can each folded machine up-bond the matching
    machine of a mirror copy of the same loop?"""
    report = ValidationReport(seed=spec)
    try:
        plan = predict_fold(spec)
    except SeedError as exc:
        report.errors.append(str(exc))
        return report
    report.closed = plan.closed
    report.corner_count = plan.corner_count
    report.total_turn_deg = plan.total_turn_deg
    if not plan.closed:
        report.errors.append(
            f"seed does not fold into a closed loop (total turn "
            f"{sum(plan.turn_angles)} deg, gap {plan.closure_distance:.3g})")
    types = spec.types
    n = len(types)
    for i, t in enumerate(types):
        left_t = types[(i - 1) % n]
        right_t = types[(i + 1) % n]
        bl = bend_location(left_t, right_t)
        meshable = (phene_up_bond_allowed(t, t)
                    and bend_location_bond_allowed(bl, _swap_sides(bl)))
        report.machines.append((i, t, bl, meshable))
    if report.meshable_count == 0 and not report.errors:
        report.warnings.append(
            "no machine in this loop can form an up bond; the folded shapes "
            "would never join into a mesh")
    return report


# ---------------------------------------------------------------------------
# Shape compiler
# ---------------------------------------------------------------------------

# Corner machine type per side, walked cyclically.
_SHAPE_SIDES = {
    "triangle": (2, 2, 2),
    "square": (4, 2, 4, 2),
    "hexagon": (4, 4, 4, 4, 4, 4),
    "octagon": (2, 3, 2, 3, 2, 3, 2, 3),
}


def _expand_side(corner_type: int, expansion: int) -> list[int]:
    if expansion == 1:
        return [corner_type]
    # two corner machines bracketing a run of type-1 extenders
    return [corner_type] + [1] * (expansion - 2) + [corner_type]


def compile_shape(shape: str, side_expansion: int = 1,
                  width: int | None = None,
                  height: int | None = None) -> SeedSpec:
    """Build a seed that folds into the requested polygon.

    `side_expansion` is the number of machines per side; exactly two per
    side is impossible (the two corner machines would sit adjacent and turn
    twice), so 2 is rejected.  Rectangle takes explicit side lengths in
    machines instead of an expansion factor.
    """
    name = shape.strip().lower()
    if name == "rectangle":
        if side_expansion != 1:
            raise SeedError(
                "rectangle takes explicit side lengths, not a side expansion")
        if width is None or height is None:
            raise SeedError("rectangle requires width and height (machines per side)")
        if width == height:
            raise SeedError("rectangle sides must differ; use square instead")
        for v, label in ((width, "width"), (height, "height")):
            if v < 1:
                raise SeedError(f"rectangle {label} must be at least 1")
            if v == 2:
                raise SeedError(
                    f"rectangle {label} of exactly 2 machines cannot fold flat")
        w_side = _expand_side(2, width) if width >= 3 else [2]
        h_side = _expand_side(4, height) if height >= 3 else [4]
        return SeedSpec(tuple(w_side + h_side + w_side + h_side))
    if name not in _SHAPE_SIDES:
        raise SeedError(f"unsupported shape: {shape!r}")
    if width is not None or height is not None:
        raise SeedError(f"{name} does not take width/height")
    if side_expansion < 1:
        raise SeedError("side expansion must be a positive integer")
    if side_expansion == 2:
        raise SeedError("side expansion of exactly 2 is impossible: the two "
                        "corner machines per side would double every turn")
    types: list[int] = []
    for corner in _SHAPE_SIDES[name]:
        types.extend(_expand_side(corner, side_expansion))
    spec = SeedSpec(tuple(types))
    plan = predict_fold(spec)
    if not plan.closed:
        raise SeedError(
            f"internal error: compiled {name} seed {spec.text} does not close")
    return spec
