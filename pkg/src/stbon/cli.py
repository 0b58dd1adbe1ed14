"""Command-line entry points.

Subcommands: ``run`` (one experiment), ``sweep`` (one axis), ``theorem``
(the bound-validation grid), and ``bridge-check`` (conformance suite
against an out-of-process model). Exit status: 0 success, 2 config
error, 3 runtime error or failed check.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bridge import BridgeModel, parse_bridge_command
from .conformance import run_interface_suite
from .errors import ConfigError, StbonError
from .harness import (
    SWEEP_AXES,
    ExperimentConfig,
    default_out_path,
    load_config,
    run_experiment,
    sweep,
)
from .jsonio import JsonlWriter


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="override the experiment seed")
    parser.add_argument("--out", help="output JSONL path (default under $STBON_OUT_DIR)")
    parser.add_argument("--model", help="model spec: toy | bridge:<command line>")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config key (repeatable)",
    )


def _build_config(args: argparse.Namespace, forced: dict | None = None) -> ExperimentConfig:
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.model is not None:
        overrides.append(f"model={args.model}")
    config = load_config(args.config, overrides)
    if forced:
        import dataclasses

        config = dataclasses.replace(config, **forced).validate()
    return config


def _cmd_run(args: argparse.Namespace) -> int:
    config = _build_config(args)
    out = Path(args.out) if args.out else default_out_path(config)
    with JsonlWriter(out) as writer:
        summary = run_experiment(config, writer)
    rec = summary.as_record()
    print(f"wrote {out}")
    acc = "n/a" if rec["accuracy"] is None else f"{rec['accuracy']:.4f}"
    print(
        f"task={rec['task']} method={rec['method']} n={rec['n']} "
        f"questions={rec['num_questions']} accuracy={acc} "
        f"mean_c={rec['mean_c']} mean_T={rec['mean_generated']:.1f} "
        f"m_cost={rec['mean_m_cost']:.3f} a_cost={rec['mean_a_cost']:.3f}"
    )
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _build_config(args)
    values = [v for v in args.values.split(",") if v != ""]
    out_dir = Path(args.out) if args.out else default_out_path(config, kind="sweep").parent
    summaries = sweep(config, args.axis, values, out_dir)
    for value, summary in zip(values, summaries):
        rec = summary.as_record()
        acc = "n/a" if rec["accuracy"] is None else f"{rec['accuracy']:.4f}"
        print(f"{args.axis}={value}: accuracy={acc} a_cost={rec['mean_a_cost']:.3f}")
    print(f"wrote {out_dir}")
    return 0


def _cmd_theorem(args: argparse.Namespace) -> int:
    config = _build_config(args, forced={"task": "theorem-grid"})
    out = Path(args.out) if args.out else default_out_path(config, kind="theorem")
    with JsonlWriter(out) as writer:
        summary = run_experiment(config, writer)
    ok = summary.accuracy == 1.0
    print(f"wrote {out}")
    print(f"grid cells={summary.num_questions} all_passed={ok}")
    return 0 if ok else 3


def _cmd_bridge_check(args: argparse.Namespace) -> int:
    if not args.model or not args.model.startswith("bridge:"):
        raise ConfigError("bridge-check requires --model bridge:<command line>")
    command = parse_bridge_command(args.model)
    with BridgeModel(command) as model:
        desc = model.descriptor
        print(
            f"descriptor: vocab={desc.vocab_size} layers={desc.num_layers} "
            f"dim={desc.hidden_dim} eos={desc.eos_id} max_context={desc.max_context}"
        )
        results = run_interface_suite(model, seed=args.seed or 0)
    failed = [r for r in results if not r.passed]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        detail = f" - {r.detail}" if r.detail else ""
        print(f"{status} {r.name}{detail}")
    return 0 if not failed else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stbon", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment")
    _add_common(run_p)
    run_p.set_defaults(fn=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="sweep one axis")
    _add_common(sweep_p)
    sweep_p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    sweep_p.add_argument("--values", required=True, help="comma-separated axis values")
    sweep_p.set_defaults(fn=_cmd_sweep)

    theorem_p = sub.add_parser("theorem", help="run the bound-validation grid")
    _add_common(theorem_p)
    theorem_p.set_defaults(fn=_cmd_theorem)

    bridge_p = sub.add_parser("bridge-check", help="conformance-check a model bridge")
    bridge_p.add_argument("--model", required=True, help="bridge:<command line>")
    bridge_p.add_argument("--seed", type=int, default=0)
    bridge_p.set_defaults(fn=_cmd_bridge_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StbonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
