"""Command line entry points for the whole pipeline.

Subcommands: fmt, check, synth-demo, learn, run, loss, serve, report-plot.
Every command is deterministic given its flags and seeds; failures exit
nonzero with a diagnostic on stderr. The default registry can be set with
the SEMO_REGISTRY environment variable.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import asset_text
from .learn import LearnConfig, imitation_loss, learn
from .registry import ValidationError, load_registry, validate
from .scenarios import BUILTIN_SCENARIOS, run_script, synth_demo
from .script import ScriptError, format_script, parse_script
from .world import Dataset, load_scenario_file


class CliError(Exception):
    pass


def _registry(args):
    spec = getattr(args, "registry", None) or os.environ.get("SEMO_REGISTRY", "attract")
    return load_registry(spec)


def _scenario(spec: str):
    if spec in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[spec]()
    path = Path(spec)
    if not path.exists():
        raise CliError(f"unknown scenario {spec!r} (builtins: {', '.join(BUILTIN_SCENARIOS)})")
    return load_scenario_file(path)


def _read_script(path: str):
    if path.startswith("builtin:"):
        return asset_text(path.split(":", 1)[1] + ".pf")
    return Path(path).read_text()


def _checked(path: str, registry):
    return validate(parse_script(_read_script(path)), registry)


def _config(args) -> LearnConfig:
    cfg = LearnConfig()
    if getattr(args, "config", None):
        cfg = LearnConfig.from_dict(json.loads(Path(args.config).read_text()))
    if getattr(args, "scenario", None):
        cfg.limits = _scenario(args.scenario).limits
    for flag, attr in (("delta", "delta"), ("min_support", "min_support"),
                       ("margin", "margin"), ("lambda_idle", "lambda_idle")):
        val = getattr(args, flag, None)
        if val is not None:
            setattr(cfg, attr, val)
    return cfg


def cmd_fmt(args) -> int:
    text = _read_script(args.file)
    formatted = format_script(parse_script(text))
    if args.write:
        Path(args.file).write_text(formatted)
    else:
        sys.stdout.write(formatted)
    return 0


def cmd_check(args) -> int:
    registry = _registry(args)
    checked = _checked(args.file, registry)
    n_leaves = len(checked.top) + sum(len(b) for b in checked.nodes.values())
    print(f"ok: {len(checked.top)} top-level statements, "
          f"{len(checked.nodes)} nodes, {n_leaves} resolved statements")
    return 0


def cmd_synth_demo(args) -> int:
    registry = _registry(args)
    checked = _checked(args.script, registry)
    scenario = _scenario(args.scenario)
    dataset = synth_demo(checked, scenario, seed=args.seed, hz=args.hz,
                         noise=args.noise)
    dataset.dump(args.output)
    print(f"wrote {len(dataset)} samples to {args.output}")
    return 0


def cmd_learn(args) -> int:
    from .report import build_report, render_bands, write_report

    registry = _registry(args)
    dataset = Dataset.load(args.data)
    cfg = _config(args)
    result = learn(dataset, registry, cfg)
    text = format_script(result.script)
    Path(args.output).write_text(text)
    print(f"wrote script to {args.output}")
    if args.report:
        records = build_report(result)
        write_report(records, args.report)
        print(f"wrote report to {args.report}")
        if args.plot:
            render_bands(records, args.plot)
            print(f"wrote figure to {args.plot}")
    elif args.plot:
        render_bands(build_report(result), args.plot)
        print(f"wrote figure to {args.plot}")
    return 0


def cmd_run(args) -> int:
    registry = _registry(args)
    checked = _checked(args.script, registry)
    scenario = _scenario(args.scenario)
    trace = run_script(checked, scenario, seed=args.seed, ticks=args.ticks,
                       hz=args.hz)
    trace.dump(args.output)
    note = " (truncated: scenario ended)" if trace.truncated else ""
    print(f"wrote {len(trace.rows)} ticks to {args.output}{note}")
    return 0


def cmd_loss(args) -> int:
    registry = _registry(args)
    checked = _checked(args.script, registry)
    dataset = Dataset.load(args.data)
    limits = _scenario(args.scenario).limits if args.scenario else None
    value = imitation_loss(dataset, checked, limits)
    print(f"{value:.9g}")
    return 0


def cmd_report_plot(args) -> int:
    from .report import read_report, render_bands

    render_bands(read_report(args.report), args.output)
    print(f"wrote figure to {args.output}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(default_scenario=args.scenario, registry=_registry(args))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semo",
                                description="reactive behavior scripts: "
                                            "format, validate, simulate, learn")
    p.add_argument("--registry", help="builtin registry name or JSON path")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fmt", help="canonically format a script")
    f.add_argument("file")
    f.add_argument("--write", action="store_true", help="rewrite the file in place")
    f.set_defaults(fn=cmd_fmt)

    c = sub.add_parser("check", help="validate a script against the registry")
    c.add_argument("file")
    c.set_defaults(fn=cmd_check)

    s = sub.add_parser("synth-demo", help="record a synthetic demonstration")
    s.add_argument("--script", required=True)
    s.add_argument("--scenario", default="demo")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--hz", type=float, default=50.0)
    s.add_argument("--noise", type=float, default=0.01)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(fn=cmd_synth_demo)

    l = sub.add_parser("learn", help="learn a script from a demonstration")
    l.add_argument("--data", required=True)
    l.add_argument("--config", help="JSON learner configuration")
    l.add_argument("--scenario", help="scenario supplying actuation limits")
    l.add_argument("--delta", type=float, help="grouping tolerance (m)")
    l.add_argument("--min-support", dest="min_support", type=int)
    l.add_argument("--margin", type=float)
    l.add_argument("--lambda-idle", dest="lambda_idle", type=float)
    l.add_argument("-o", "--output", required=True)
    l.add_argument("--report", help="write activation bands (JSONL)")
    l.add_argument("--plot", help="also render the bands figure (svg/png)")
    l.set_defaults(fn=cmd_learn)

    r = sub.add_parser("run", help="run a script in a scenario, write the trace")
    r.add_argument("--script", required=True)
    r.add_argument("--scenario", default="demo")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--ticks", type=int, required=True)
    r.add_argument("--hz", type=float, default=50.0)
    r.add_argument("-o", "--output", required=True)
    r.set_defaults(fn=cmd_run)

    lo = sub.add_parser("loss", help="one-step imitation loss of a script on data")
    lo.add_argument("--data", required=True)
    lo.add_argument("--script", required=True)
    lo.add_argument("--scenario", help="scenario supplying actuation limits")
    lo.set_defaults(fn=cmd_loss)

    rp = sub.add_parser("report-plot", help="render a learner report to a figure")
    rp.add_argument("--report", required=True)
    rp.add_argument("-o", "--output", required=True)
    rp.set_defaults(fn=cmd_report_plot)

    sv = sub.add_parser("serve", help="start the session service")
    sv.add_argument("--scenario", default="demo")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8750)
    sv.set_defaults(fn=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ScriptError, ValidationError, CliError, FileNotFoundError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
