"""
Run Manifests
Every run directory ends with manifest.json: tool version, config hash, seed,
wall times and a sha256 for each output file. Outputs and the manifest are
written under temporary names and renamed into place when complete.
"""

import hashlib
import json
import os
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

from .. import __version__, config
from ..errors import FormatError

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@contextmanager
def atomic_output(path):
    """Yield a temporary sibling path; rename it onto `path` when the block succeeds."""
    path = Path(path)
    tmp = path.with_name(f".{path.stem}.tmp{path.suffix}")
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


@dataclass
class OutputFile:
    path: str
    sha256: str
    bytes: int


@dataclass
class RunManifest:
    tool_version: str
    config_hash: str
    seed: int
    task: str
    threads: int
    output_dir: str
    started_at: str
    finished_at: str = ""
    environment: Dict[str, Optional[str]] = field(default_factory=dict)
    files: List[OutputFile] = field(default_factory=list)
    version: int = MANIFEST_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        if data.get("version") != MANIFEST_VERSION:
            raise FormatError(f"unsupported manifest version {data.get('version')!r}")
        files = [OutputFile(**f) for f in data.get("files", [])]
        return cls(**{**data, "files": files})


class RunContext:
    """One run: resolved config, output directory and the files it has emitted."""

    def __init__(self, cfg, output_dir, threads: int):
        self.config = cfg
        self.output_dir = Path(output_dir)
        self.threads = threads
        self.files: List[Path] = []
        self.started_at = _now()
        self.output_dir.mkdir(parents=True, exist_ok=True)

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def params(self) -> dict:
        return self.config.task_params

    def param(self, name: str):
        return self.config.task_params[name]

    @contextmanager
    def output(self, name: str):
        """Temporary path for output `name`, registered once written."""
        target = self.output_dir / name
        target.parent.mkdir(parents=True, exist_ok=True)
        with atomic_output(target) as tmp:
            yield tmp
        self.files.append(target)

    def write_json(self, name: str, data) -> Path:
        with self.output(name) as tmp:
            tmp.write_text(json.dumps(data, indent=2, sort_keys=True), encoding="utf-8")
        return self.output_dir / name

    def manifest(self) -> RunManifest:
        files = []
        for path in sorted(set(self.files)):
            files.append(OutputFile(
                path=path.relative_to(self.output_dir).as_posix(),
                sha256=sha256_file(path),
                bytes=path.stat().st_size,
            ))
        return RunManifest(
            tool_version=__version__,
            config_hash=self.config.config_hash(),
            seed=self.seed,
            task=self.config.task,
            threads=self.threads,
            output_dir=str(self.output_dir),
            started_at=self.started_at,
            finished_at=_now(),
            environment=config.env_overrides(),
            files=files,
        )


def write_manifest(run: RunContext) -> Path:
    """Hash the run's outputs and write manifest.json atomically."""
    manifest = run.manifest()
    target = run.output_dir / MANIFEST_NAME
    with atomic_output(target) as tmp:
        tmp.write_text(json.dumps(manifest.to_dict(), indent=2), encoding="utf-8")
    return target


def read_manifest(run_dir) -> RunManifest:
    path = Path(run_dir) / MANIFEST_NAME
    try:
        return RunManifest.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except FileNotFoundError:
        raise FormatError(f"no manifest in {run_dir}")
    except (ValueError, TypeError) as e:
        raise FormatError(f"unreadable manifest {path}: {e}")


def verify_run(run_dir) -> List[str]:
    """Problems found re-hashing a run directory (empty when everything matches)."""
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    problems = []
    for entry in manifest.files:
        path = run_dir / entry.path
        if not path.exists():
            problems.append(f"{entry.path}: missing")
            continue
        actual = sha256_file(path)
        if actual != entry.sha256:
            problems.append(f"{entry.path}: hash mismatch (expected {entry.sha256[:12]}, got {actual[:12]})")
    return problems
