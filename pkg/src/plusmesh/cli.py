"""Command-line entry points.

Subcommands: run (simulate), validate (seed report), compile (shape to
seed), render (checkpoint to SVG), summarize (checkpoint to counts table).
Exit codes: 0 success, 1 validation/configuration error, 2 runtime
integrity error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import engine
from .analysis import summarize, write_trace
from .config import ConfigError, load_config, write_resolved_config
from .engine import IntegrityViolation, CheckpointError
from .render import render_frame
from .rules import IntegrityError
from .seeds import SeedError, compile_shape, parse_seed, validate_seed

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INTEGRITY = 2


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="plusmesh",
        description="Simulate self-replicating machine strands that fold "
                    "into polygons and assemble into meshes.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a simulation")
    run.add_argument("--seed", help="seed strand, e.g. 2-2-2")
    run.add_argument("--free", action="append", metavar="TYPE=COUNT",
                     help="free machines of a type (repeatable)")
    run.add_argument("--steps", type=int, metavar="N")
    run.add_argument("--rng-seed", type=int, metavar="N", dest="rng_seed")
    run.add_argument("--container", metavar="WxH")
    run.add_argument("--snapshot-every", type=int, metavar="N",
                     dest="snapshot_every")
    run.add_argument("--out", metavar="DIR")
    run.add_argument("--config", metavar="FILE")
    run.add_argument("--param", action="append", metavar="KEY=VALUE",
                     dest="params", help="physics or rule constant override")

    val = sub.add_parser("validate", help="validate a seed strand")
    val.add_argument("seed", help="seed strand, e.g. 2-2-2")
    val.add_argument("--json", action="store_true", help="structured output")

    comp = sub.add_parser("compile", help="compile a polygon into a seed")
    comp.add_argument("shape",
                      choices=["triangle", "square", "rectangle", "hexagon",
                               "octagon"])
    comp.add_argument("--expansion", type=int, default=1, metavar="N",
                      help="machines per side (2 is impossible)")
    comp.add_argument("--width", type=int, metavar="N",
                      help="rectangle: machines on the long sides")
    comp.add_argument("--height", type=int, metavar="N",
                      help="rectangle: machines on the short sides")

    ren = sub.add_parser("render", help="render a checkpoint as SVG")
    ren.add_argument("checkpoint", help="checkpoint file")
    ren.add_argument("--out", metavar="FILE", help="default: stdout")

    summ = sub.add_parser("summarize", help="tabulate a checkpoint")
    summ.add_argument("checkpoint", help="checkpoint file")
    summ.add_argument("--json", action="store_true", help="structured output")
    return p


def _cmd_run(args: argparse.Namespace) -> int:
    flags = {"seed": args.seed, "free": args.free, "steps": args.steps,
             "rng_seed": args.rng_seed, "container": args.container,
             "snapshot_every": args.snapshot_every, "out": args.out,
             "params": args.params}
    cfg = load_config(args.config, flags)
    report = validate_seed(parse_seed(cfg.seed_text))
    if not report.ok:
        print(report.to_text(), file=sys.stderr)
        return EXIT_VALIDATION

    world = cfg.build_world()
    out_dir = Path(cfg.output_dir) if cfg.output_dir else None
    trace_file = None
    if out_dir is not None:
        write_resolved_config(cfg, out_dir)
        trace_file = (out_dir / "trace.jsonl").open("w")

    def on_step(w: engine.World, events) -> None:
        if trace_file is not None and events:
            write_trace(events, trace_file)
        if (cfg.snapshot_every and out_dir is not None
                and w.step_number % cfg.snapshot_every == 0):
            stem = f"step_{w.step_number:08d}"
            (out_dir / f"{stem}.jv2s").write_bytes(engine.checkpoint(w))
            (out_dir / f"{stem}.svg").write_text(render_frame(w))

    try:
        events = engine.run(world, cfg.max_steps, on_step=on_step)
    finally:
        if trace_file is not None:
            trace_file.close()
    if out_dir is not None:
        (out_dir / "final.jv2s").write_bytes(engine.checkpoint(world))
        (out_dir / "final.svg").write_text(render_frame(world))
    print(summarize(world, events).to_text())
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    report = validate_seed(parse_seed(args.seed))
    if args.json:
        import json
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(report.to_text())
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _cmd_compile(args: argparse.Namespace) -> int:
    spec = compile_shape(args.shape, side_expansion=args.expansion,
                         width=args.width, height=args.height)
    print(spec.text)
    return EXIT_OK


def _load_checkpoint(path: str) -> engine.World:
    return engine.restore(Path(path).read_bytes())


def _cmd_render(args: argparse.Namespace) -> int:
    svg = render_frame(_load_checkpoint(args.checkpoint))
    if args.out:
        Path(args.out).write_text(svg)
    else:
        sys.stdout.write(svg)
    return EXIT_OK


def _cmd_summarize(args: argparse.Namespace) -> int:
    record = summarize(_load_checkpoint(args.checkpoint))
    if args.json:
        import json
        print(json.dumps(record.to_dict(), indent=2, sort_keys=True))
    else:
        print(record.to_text())
    return EXIT_OK


_COMMANDS = {"run": _cmd_run, "validate": _cmd_validate,
             "compile": _cmd_compile, "render": _cmd_render,
             "summarize": _cmd_summarize}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, SeedError, CheckpointError,
            engine.ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (IntegrityViolation, IntegrityError) as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY


if __name__ == "__main__":
    sys.exit(main())
