"""
cavion Run I/O Package
Configs, time-tag files, manifests, task recipes and the command line.
"""

from .settings import RunConfig, load_config, parse_config, read_config_document
from .timetag_io import write_timetags, read_timetags, encode_timetags, decode_timetags
from .manifest import RunManifest, RunContext, write_manifest, read_manifest, verify_run, sha256_file
from .registry import task, get_task, get_all_tasks, task_names
from . import recipes
from .cli import cli_dispatch, build_parser

__all__ = [
    "RunConfig", "load_config", "parse_config", "read_config_document",
    "write_timetags", "read_timetags", "encode_timetags", "decode_timetags",
    "RunManifest", "RunContext", "write_manifest", "read_manifest", "verify_run", "sha256_file",
    "task", "get_task", "get_all_tasks", "task_names", "recipes",
    "cli_dispatch", "build_parser",
]
