"""Shared fixtures: hand-built strands, folded loops, and quiet worlds."""

from __future__ import annotations

import math

from plusmesh.engine import World
from plusmesh.geometry import MachineBody
from plusmesh.physics import PhysicsParams, Rng
from plusmesh.rules import Machine, RuleParams, fold_angle_deg


def quiet_params(**overrides) -> PhysicsParams:
    """Physics with Brownian motion off, for scripted scenarios."""
    kw = dict(brownian_linear_sigma=0.0, brownian_angular_sigma=0.0)
    kw.update(overrides)
    return PhysicsParams(**kw)


def new_world(machines, params=None, rules=None, body=None, rng_seed=0):
    return World(params or quiet_params(), rules or RuleParams(),
                 body or MachineBody(), machines, Rng(rng_seed))


def build_strand(types, x0=10.0, y0=10.0, heading=0.0, start_id=0,
                 pitch=2.0, **machine_kw):
    """A straight sideways-bonded strand along its heading."""
    ms = []
    c, s = math.cos(heading), math.sin(heading)
    n = len(types)
    for i, t in enumerate(types):
        m = Machine(start_id + i, t, x=x0 + i * pitch * c,
                    y=y0 + i * pitch * s, heading=heading, **machine_kw)
        m.left = start_id + i - 1 if i > 0 else None
        m.right = start_id + i + 1 if i < n - 1 else None
        m.strand_position = 1 if i == 0 else (3 if i == n - 1 else 2)
        ms.append(m)
    return ms


def build_folded_loop(types, x0=10.0, y0=10.0, heading0=0.0, start_id=0,
                      in_mesh=0, **machine_kw):
    """A closed folded loop at its exact rest geometry.

    Walks the loop with clockwise turns (matching the physical fold
    direction) and places middles so every bonded tip pair coincides.
    """
    n = len(types)
    headings = [heading0]
    for i in range(n - 1):
        deg = fold_angle_deg(types[i], types[i + 1])
        assert deg is not None, "loop uses an undefined fold angle"
        headings.append(headings[-1] - math.radians(deg))
    xs, ys = [x0], [y0]
    for i in range(n - 1):
        xs.append(xs[-1] + math.cos(headings[i]) + math.cos(headings[i + 1]))
        ys.append(ys[-1] + math.sin(headings[i]) + math.sin(headings[i + 1]))
    ms = []
    for i, t in enumerate(types):
        m = Machine(start_id + i, t, x=xs[i], y=ys[i], heading=headings[i],
                    folded=1, in_mesh=in_mesh, **machine_kw)
        m.left = start_id + (i - 1) % n
        m.right = start_id + (i + 1) % n
        ms.append(m)
    return ms
