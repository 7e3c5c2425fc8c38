import math
import random

import pytest

from plusmesh.geometry import Arm, Kinematics, MachineBody, Pose, arm_tip, \
    normalize_angle
from plusmesh.physics import (PhysicsParams, Rng, SpatialGrid, bond_forces,
                              brownian_kick, brute_force_neighbours,
                              brute_force_pairs, integrate, repellor_force)


def test_rng_is_deterministic_and_checkpointable():
    a = Rng(42)
    vals = [a.next_u64() for _ in range(5)]
    seed, counter = a.state()
    b = Rng(seed, counter)
    assert [b.next_u64() for _ in range(5)] == [a.next_u64() for _ in range(5)]
    assert Rng(42).next_u64() == vals[0]


def test_rng_uniform_range_and_spread():
    r = Rng(1)
    xs = [r.uniform() for _ in range(2000)]
    assert all(0.0 <= x < 1.0 for x in xs)
    mean = sum(xs) / len(xs)
    assert abs(mean - 0.5) < 0.05


def test_rng_different_seeds_differ():
    assert Rng(1).next_u64() != Rng(2).next_u64()


def test_brownian_consumes_fixed_draws():
    params = PhysicsParams()
    r = Rng(9)
    for _ in range(50):
        before = r.state()[1]
        brownian_kick(r, params)
        assert r.state()[1] - before == 4


def test_brownian_zero_sigma_draws_nothing():
    params = PhysicsParams(brownian_linear_sigma=0.0,
                           brownian_angular_sigma=0.0)
    r = Rng(9)
    assert brownian_kick(r, params) == (0.0, 0.0, 0.0)
    assert r.state()[1] == 0


def _pair_potential(pose_a, pose_b, body, kind, desired, params):
    arm_a, arm_b = (Arm.RIGHT, Arm.LEFT) if kind == "sideways" \
        else (Arm.UP, Arm.UP)
    tax, tay = arm_tip(pose_a, body, arm_a)
    tbx, tby = arm_tip(pose_b, body, arm_b)
    offset = 0.0 if kind == "sideways" else math.pi
    err = normalize_angle(pose_b.heading - pose_a.heading - offset - desired)
    return (0.5 * params.spring_k * ((tbx - tax) ** 2 + (tby - tay) ** 2)
            + 0.5 * params.twist_k * err * err)


def test_bond_forces_match_potential_gradient():
    body = MachineBody()
    params = PhysicsParams()
    rng = random.Random(3)
    h = 1e-6
    for _ in range(50):
        kind = rng.choice(("sideways", "up"))
        desired = rng.uniform(-2.0, 2.0)
        pa = Pose(rng.uniform(0, 4), rng.uniform(0, 4), rng.uniform(0, 6.28))
        pb = Pose(rng.uniform(0, 4), rng.uniform(0, 4), rng.uniform(0, 6.28))
        (fax, fay), (fbx, fby), ta, tb = bond_forces(
            pa, pb, body, kind, desired, params)
        assert fax == -fbx and fay == -fby

        def u(pa_, pb_):
            return _pair_potential(pa_, pb_, body, kind, desired, params)

        grads = [
            (fax, -(u(Pose(pa.x + h, pa.y, pa.heading), pb)
                    - u(Pose(pa.x - h, pa.y, pa.heading), pb)) / (2 * h)),
            (fay, -(u(Pose(pa.x, pa.y + h, pa.heading), pb)
                    - u(Pose(pa.x, pa.y - h, pa.heading), pb)) / (2 * h)),
            (ta, -(u(Pose(pa.x, pa.y, pa.heading + h), pb)
                   - u(Pose(pa.x, pa.y, pa.heading - h), pb)) / (2 * h)),
            (fbx, -(u(pa, Pose(pb.x + h, pb.y, pb.heading))
                    - u(pa, Pose(pb.x - h, pb.y, pb.heading))) / (2 * h)),
            (tb, -(u(pa, Pose(pb.x, pb.y, pb.heading + h))
                   - u(pa, Pose(pb.x, pb.y, pb.heading - h))) / (2 * h)),
        ]
        for analytic, numeric in grads:
            assert analytic == pytest.approx(numeric, rel=1e-5, abs=1e-6)


def test_repellor_zero_beyond_field():
    body = MachineBody()
    params = PhysicsParams()
    pa = Pose(0, 0, 0)
    pb = Pose(5, 0, 0)
    (fax, fay), (fbx, fby), ta, tb = repellor_force(pa, pb, body, params)
    assert fax == fay == fbx == fby == ta == tb == 0.0


def test_repellor_pushes_apart_inside_field():
    body = MachineBody()
    params = PhysicsParams()
    pa = Pose(0, 0, 0)
    pb = Pose(0.1, 0, 0)  # repellor tips 0.1 apart, inside 0.25
    (fax, fay), (fbx, fby), _, _ = repellor_force(pa, pb, body, params)
    assert fax < 0 and fbx > 0   # away from each other
    assert fax == -fbx and fay == -fby


def test_integrate_wall_clamp_is_slippery():
    params = PhysicsParams()
    pose = Pose(0.01, 5.0, 0.0)
    kin = Kinematics(vx=-3.0, vy=0.2)
    p2, k2 = integrate(pose, kin, 0.0, 0.0, 0.0, params)
    assert p2.x == 0.0
    assert k2.vx == 0.0       # inward velocity zeroed
    assert k2.vy != 0.0       # tangential motion survives


def test_integrate_speed_clamp():
    params = PhysicsParams()
    p2, k2 = integrate(Pose(20, 20, 0), Kinematics(), 1e6, 0.0, 1e6, params)
    assert math.hypot(k2.vx, k2.vy) <= params.speed_clamp + 1e-12
    assert abs(k2.omega) <= params.speed_clamp + 1e-12


def test_integrate_drag_decays_velocity():
    params = PhysicsParams()
    _, k2 = integrate(Pose(20, 20, 0), Kinematics(vx=0.1), 0.0, 0.0, 0.0,
                      params)
    assert k2.vx == pytest.approx(0.1 * (1 - params.linear_drag))


def test_grid_matches_brute_force_pairs():
    rng = random.Random(11)
    reach = 1.25
    points = {i: (rng.uniform(0, 30), rng.uniform(0, 30)) for i in range(120)}
    grid = SpatialGrid(cell_size=2 * reach, reach=reach)
    grid.build((i, x, y) for i, (x, y) in points.items())
    got = grid.candidate_pairs()
    assert got == brute_force_pairs(points, reach)
    assert len(got) == len(set(got))  # no duplicates


def test_grid_matches_brute_force_neighbours():
    rng = random.Random(5)
    reach = 1.25
    points = {i: (rng.uniform(0, 25), rng.uniform(0, 25)) for i in range(80)}
    grid = SpatialGrid(cell_size=2 * reach, reach=reach)
    grid.build((i, x, y) for i, (x, y) in points.items())
    for _ in range(200):
        x, y, r = rng.uniform(0, 25), rng.uniform(0, 25), rng.uniform(0, 3)
        assert grid.neighbours_within(x, y, r) == \
            brute_force_neighbours(points, x, y, r, reach)


def test_params_validation():
    with pytest.raises(ValueError):
        PhysicsParams(dt=0.0)
    with pytest.raises(ValueError):
        PhysicsParams(linear_drag=1.5)
    with pytest.raises(ValueError):
        PhysicsParams(brownian_linear_sigma=-0.1)
