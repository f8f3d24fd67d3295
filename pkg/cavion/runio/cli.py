"""
Command Line
`cavion <command> <target> [flags]`: simulations, fits, g2 estimation and
figure reports, each run ending with a manifest.

Exit status: 0 success, 1 user error (any CavionError), 2 internal or IO error.
"""

import argparse
import os
from pathlib import Path
from typing import List, Optional

from .. import __version__, config, console
from ..errors import CavionError, UsageError
from .manifest import RunContext, verify_run, write_manifest
from .registry import get_task
from .settings import parse_config, read_config_document

TARGETS = {
    "sim": ("microscopy", "decay", "scan", "saturation", "g2"),
    "fit": ("decay", "lorentzian", "saturation"),
    "g2": ("estimate",),
    "report": ("figure2", "figure3", "figure4"),
}
# analysis of existing files is deterministic; bootstrap draws still need a seed
ANALYSIS_SEED = 0


class _Parser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage().strip()}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cavion", description="Single-ion fiber-cavity simulator and estimators")
    parser.add_argument("command", choices=list(TARGETS) + ["verify"])
    parser.add_argument("target", nargs="?", help="task within the command, or the run directory to verify")
    parser.add_argument("--config", help="run config (JSON, or TOML by suffix)")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--trials", help="trial count, e.g. 5e6")
    parser.add_argument("--threads", type=int, help="worker threads")
    parser.add_argument("--input", help="input file for fit and g2 commands")
    parser.add_argument("--version", action="version", version=f"cavion {__version__}")
    return parser


def _parse_trials(text: str) -> int:
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"--trials: not a number: {text!r}")
    if value < 1 or value != int(value):
        raise UsageError(f"--trials: expected a positive integer, got {text!r}")
    return int(value)


def _task_name(args) -> str:
    if args.target is None:
        raise UsageError(f"{args.command} needs one of: {', '.join(TARGETS[args.command])}")
    if args.target not in TARGETS[args.command]:
        raise UsageError(
            f"unknown {args.command} target {args.target!r}; choose from {', '.join(TARGETS[args.command])}"
        )
    return f"{args.command}.{args.target}"


def _document(args, task_name: str) -> dict:
    """Config tree with command-line values applied on top."""
    if args.command == "sim" and not args.config:
        raise UsageError(f"sim {args.target} requires --config")
    if args.command in ("fit", "g2") and not args.input:
        raise UsageError(f"{args.command} {args.target} requires --input")

    data = read_config_document(args.config) if args.config else {}
    task_block = dict(data.get("task") or {})
    if task_block.get("name", task_name) != task_name:
        console.warn(f"config task {task_block['name']!r} replaced by {task_name!r}")
        task_block = {}
    task_block["name"] = task_name
    if args.trials is not None:
        task_block["trials"] = _parse_trials(args.trials)
    if args.input is not None:
        task_block["input"] = str(Path(args.input))
    data["task"] = task_block

    if args.seed is not None:
        data["seed"] = args.seed
    elif args.command in ("fit", "g2"):
        data.setdefault("seed", ANALYSIS_SEED)
    if args.threads is not None:
        data["threads"] = args.threads
    return data


def _output_dir(args, cfg) -> Path:
    """--out, then CAVION_OUTPUT_DIR, then the config, then runs/<task>."""
    chosen = args.out or os.getenv("CAVION_OUTPUT_DIR") or cfg.output_dir
    if chosen:
        return Path(chosen)
    return Path(config.DEFAULT_OUTPUT_DIR) / cfg.task.replace(".", "_")


def _threads(args, cfg) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.threads
    if os.getenv("CAVION_THREADS"):
        return config.default_threads()
    return cfg.threads or config.default_threads()


def _verify(target: Optional[str]) -> int:
    if not target:
        raise UsageError("verify needs a run directory")
    problems = verify_run(target)
    if problems:
        for problem in problems:
            console.error(problem)
        return 1
    console.success(f"all outputs in {target} match the manifest")
    return 0


def run_task(args) -> int:
    task_name = _task_name(args)
    base_dir = Path(args.config).parent if args.config else None
    cfg = parse_config(_document(args, task_name), base_dir=base_dir, source=args.config)
    run = RunContext(cfg, _output_dir(args, cfg), _threads(args, cfg))

    console.info(f"{task_name} (seed {cfg.seed}, {run.threads} threads) -> {run.output_dir}")
    summary = get_task(task_name)["function"](run)
    run.write_json("summary.json", summary)
    echo = "config.resolved.toml" if (args.config or "").endswith(".toml") else "config.resolved.json"
    with run.output(echo) as tmp:
        cfg.write_resolved(tmp)
    manifest = write_manifest(run)
    console.success(f"{len(run.files)} files written; manifest {manifest}")
    return 0


def cli_dispatch(argv: List[str] = None) -> int:
    """Parse argv, run the command and return the exit status."""
    try:
        args = build_parser().parse_args(argv)
        if args.command == "verify":
            return _verify(args.target)
        return run_task(args)
    except SystemExit as e:
        # --help / --version
        return int(e.code or 0)
    except CavionError as e:
        console.error(str(e))
        return 1
    except Exception as e:
        console.error(f"internal error: {type(e).__name__}: {e}")
        return 2
