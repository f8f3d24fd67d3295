"""
Run Configuration
Loads run configs (JSON, or TOML by suffix), rejects unknown keys, resolves
every default and builds the scenario the task runs on.

Shape:
    {
      "version": 1,
      "seed": 7,
      "output_dir": "runs/g2",
      "threads": 4,
      "preset": "g2-paper",
      "scenario": {
        "kind": "single_ion" | "g2" | "decay" | "particle",
        "cavity": {...}, "particle": {...}, "ensemble_file": "particle.json",
        "timing": {...}, "chain": {...},
        "excitation": {"power_w": ..., "freq_hz": ..., "p_sat_w": ..., "b_field_mt": ...,
                       "natural_lifetime_s": ..., "spectral_diffusion": false}
      },
      "task": {"name": "sim.g2", "trials": 5000000, ...}
    }
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

from .. import config
from ..cavity import CavityParams
from ..ensemble import ParticleSpec, load_particle
from ..errors import CavionError, ConfigError, InvalidParameterError
from ..photodynamics import DetectionChain, ProtocolTiming, Scenario
from ..photodynamics import presets as scenario_presets
from ..rng import Stream, check_seed, derive_seed
from .registry import get_all_tasks, task_names

try:
    import tomllib
except ImportError:
    try:
        import tomli as tomllib
    except ImportError:
        tomllib = None

try:
    import tomli_w
    TOML_WRITE = True
except ImportError:
    TOML_WRITE = False

CONFIG_VERSION = 1
SCENARIO_KINDS = ("single_ion", "g2", "decay", "particle")
TOP_KEYS = {"version", "seed", "output_dir", "threads", "preset", "scenario", "task"}
SCENARIO_KEYS = {"kind", "cavity", "particle", "ensemble_file", "timing", "chain", "excitation"}
EXCITATION_KEYS = {
    "power_w": "excitation_power_w",
    "freq_hz": "excitation_freq_hz",
    "p_sat_w": "p_sat_w",
    "b_field_mt": "b_field_mt",
    "natural_lifetime_s": "natural_lifetime_s",
    "branching_ratio": "branching_ratio",
    "reference_ion": "reference_ion",
    "spectral_diffusion": "spectral_diffusion",
}
# excluded from the config hash: they never change output bytes
RUNTIME_KEYS = ("output_dir", "threads")


def _check_keys(block: Dict[str, Any], allowed, where: str):
    if not isinstance(block, dict):
        raise ConfigError(where, "expected a table/object")
    for key in block:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}" if where else key, "unknown key")


def _dataclass_keys(cls) -> set:
    return {f.name for f in fields(cls)}


@dataclass
class RunConfig:
    """A validated run: seed, task and the fully resolved scenario blocks."""
    seed: int
    task: str
    task_params: Dict[str, Any]
    preset: str
    kind: Optional[str]
    cavity: Dict[str, Any] = field(default_factory=dict)
    particle: Optional[Dict[str, Any]] = None
    ensemble_file: Optional[str] = None
    timing: Dict[str, Any] = field(default_factory=dict)
    chain: Dict[str, Any] = field(default_factory=dict)
    excitation: Dict[str, Any] = field(default_factory=dict)
    output_dir: Optional[str] = None
    threads: Optional[int] = None
    source: Optional[str] = None

    # -------------------------------------------------------------------------
    # scenario
    # -------------------------------------------------------------------------
    def build_scenario(self, kind: str = None, **overrides) -> Scenario:
        """The resolved scenario; `kind` and keyword overrides let recipes vary it."""
        kind = kind or self.kind
        if kind is None:
            raise ConfigError("scenario.kind", f"task {self.task} runs no simulation")
        try:
            cavity = CavityParams(**self.cavity)
            if kind == "particle":
                spec = ParticleSpec(**self.particle) if self.particle is not None else None
                particle_seed = derive_seed(self.seed, Stream.SAMPLE, 0)
                base = scenario_presets.particle_scenario(particle_seed, spec, cavity)
            elif kind == "decay":
                base = scenario_presets.decay_scenario(cavity=cavity)
            elif kind == "g2":
                base = scenario_presets.g2_scenario(cavity)
            else:
                base = scenario_presets.single_ion_scenario(cavity=cavity)
            if self.ensemble_file:
                base = base.with_(particle=load_particle(self.ensemble_file))

            timing = replace(base.timing, **self.timing)
            chain = DetectionChain.from_preset(self.preset, **self.chain)
            excitation = {EXCITATION_KEYS[k]: v for k, v in self.excitation.items()}
            scenario = base.with_(timing=timing, chain=chain, **excitation)
            return scenario.with_(**overrides) if overrides else scenario
        except ConfigError:
            raise
        except (InvalidParameterError, TypeError) as e:
            raise ConfigError("scenario", str(e))

    # -------------------------------------------------------------------------
    # echo / hash
    # -------------------------------------------------------------------------
    def to_dict(self) -> dict:
        """The resolved config, every default filled in."""
        if self.kind is not None:
            built = self.build_scenario()
            timing, chain = built.timing, built.chain
            excitation = {k: getattr(built, attr) for k, attr in EXCITATION_KEYS.items()}
        else:
            timing = replace(ProtocolTiming(), **self.timing)
            chain = DetectionChain.from_preset(self.preset, **self.chain)
            excitation = dict(self.excitation)
        scenario = {
            "kind": self.kind,
            "cavity": asdict(CavityParams(**self.cavity)),
            "particle": asdict(ParticleSpec(**self.particle)) if self.particle is not None else None,
            "ensemble_file": self.ensemble_file,
            "timing": asdict(timing),
            "chain": asdict(chain),
            "excitation": excitation,
        }
        return {
            "version": CONFIG_VERSION,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "threads": self.threads,
            "preset": self.preset,
            "scenario": scenario,
            "task": {"name": self.task, **self.task_params},
        }

    def config_hash(self) -> str:
        data = {k: v for k, v in self.to_dict().items() if k not in RUNTIME_KEYS}
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def write_resolved(self, path) -> Path:
        """Echo the resolved config (without run-time keys) as JSON, or TOML for .toml paths."""
        path = Path(path)
        data = {k: v for k, v in self.to_dict().items() if k not in RUNTIME_KEYS}
        if path.suffix == ".toml":
            if not TOML_WRITE:
                raise ConfigError("output", "tomli-w is needed to write TOML")
            with open(path, "wb") as f:
                tomli_w.dump(_drop_none(data), f)
        else:
            path.write_text(json.dumps(data, indent=2, sort_keys=True), encoding="utf-8")
        return path


def _drop_none(data):
    """TOML has no null; unset values are left out."""
    if isinstance(data, dict):
        return {k: _drop_none(v) for k, v in data.items() if v is not None}
    if isinstance(data, list):
        return [_drop_none(v) for v in data]
    return data


def _integer(value, where: str) -> int:
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigError(where, f"expected a number, got {value!r}")
    if number != int(number):
        raise ConfigError(where, f"expected an integer, got {value!r}")
    return int(number)


def parse_config(data: Dict[str, Any], base_dir: Path = None, source: str = None) -> RunConfig:
    """Validate a config document and resolve its defaults."""
    from . import recipes  # noqa: F401  registers the tasks

    _check_keys(data, TOP_KEYS, "")
    version = data.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError("version", f"unsupported config version {version!r}")

    if "seed" not in data or data["seed"] is None:
        raise ConfigError("seed", "required (no silent nondeterminism)")
    try:
        seed = check_seed(_integer(data["seed"], "seed"))
    except InvalidParameterError as e:
        raise ConfigError("seed", str(e))

    task_block = dict(data.get("task") or {})
    name = task_block.pop("name", None)
    if name is None:
        raise ConfigError("task.name", "required")
    tasks = get_all_tasks()
    if name not in tasks:
        raise ConfigError("task.name", f"unknown task {name!r}; choose from {task_names()}")
    spec = tasks[name]
    _check_keys(task_block, spec["params"], "task")
    params = {**spec["params"], **task_block}
    if "trials" in params and params["trials"] is not None:
        params["trials"] = _integer(params["trials"], "task.trials")
        if params["trials"] < 1:
            raise ConfigError("task.trials", "must be >= 1")

    scenario = data.get("scenario") or {}
    _check_keys(scenario, SCENARIO_KEYS, "scenario")
    kind = scenario.get("kind", spec["scenario"])
    if kind is not None and kind not in SCENARIO_KINDS:
        raise ConfigError("scenario.kind", f"must be one of {SCENARIO_KINDS}")
    preset = data.get("preset", spec["preset"])
    if preset not in config.DETECTOR_PRESETS:
        raise ConfigError("preset", f"unknown preset {preset!r}; choose from {sorted(config.DETECTOR_PRESETS)}")

    blocks = {
        "cavity": (scenario.get("cavity") or {}, _dataclass_keys(CavityParams)),
        "timing": (scenario.get("timing") or {}, _dataclass_keys(ProtocolTiming)),
        "chain": (scenario.get("chain") or {}, _dataclass_keys(DetectionChain)),
        "excitation": (scenario.get("excitation") or {}, set(EXCITATION_KEYS)),
    }
    for where, (block, allowed) in blocks.items():
        _check_keys(block, allowed, f"scenario.{where}")
    particle = scenario.get("particle")
    if particle is not None:
        _check_keys(particle, _dataclass_keys(ParticleSpec), "scenario.particle")

    ensemble_file = scenario.get("ensemble_file")
    if ensemble_file is not None:
        path = Path(ensemble_file)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if not path.exists():
            raise ConfigError("scenario.ensemble_file", f"file not found: {path}")
        ensemble_file = str(path)

    threads = data.get("threads")
    if threads is not None:
        threads = _integer(threads, "threads")
        if threads < 1:
            raise ConfigError("threads", "must be >= 1")

    cfg = RunConfig(
        seed=seed,
        task=name,
        task_params=params,
        preset=preset,
        kind=kind,
        cavity=dict(blocks["cavity"][0]),
        particle=dict(particle) if particle is not None else None,
        ensemble_file=ensemble_file,
        timing=dict(blocks["timing"][0]),
        chain=dict(blocks["chain"][0]),
        excitation=dict(blocks["excitation"][0]),
        output_dir=data.get("output_dir"),
        threads=threads,
        source=source,
    )
    _validate_blocks(cfg)
    return cfg


def _validate_blocks(cfg: RunConfig):
    """Construct every block once so invariant violations name their field."""
    checks = (
        ("scenario.cavity", lambda: CavityParams(**cfg.cavity)),
        ("scenario.timing", lambda: replace(ProtocolTiming(), **cfg.timing)),
        ("scenario.chain", lambda: DetectionChain.from_preset(cfg.preset, **cfg.chain)),
        ("scenario.particle", lambda: ParticleSpec(**(cfg.particle or {}))),
    )
    for where, build in checks:
        try:
            build()
        except (InvalidParameterError, TypeError) as e:
            raise ConfigError(where, str(e))
    if cfg.kind is not None:
        cfg.build_scenario()


def read_config_document(path) -> Dict[str, Any]:
    """Raw config tree from a JSON file, or TOML when the suffix is .toml."""
    path = Path(path)
    try:
        if path.suffix == ".toml":
            if tomllib is None:
                raise ConfigError("config", "tomli is needed to read TOML configs")
            with open(path, "rb") as f:
                return tomllib.load(f)
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}")
    except CavionError:
        raise
    except (ValueError, OSError) as e:
        raise ConfigError("config", f"cannot parse {path}: {e}")


def load_config(path) -> RunConfig:
    """
    Read and validate a run config.

    Raises:
        ConfigError: unreadable file, unknown key, or an invalid value (names the field)
    """
    path = Path(path)
    return parse_config(read_config_document(path), base_dir=path.parent, source=str(path))
