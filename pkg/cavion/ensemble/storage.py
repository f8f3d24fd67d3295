"""
Ensemble Storage
Versioned JSON documents for sampled particles.
"""

import json
from dataclasses import asdict, fields
from pathlib import Path

from ..errors import FormatError
from .particles import Ion, Nanoparticle

ENSEMBLE_VERSION = 1


def particle_to_dict(particle: Nanoparticle) -> dict:
    data = asdict(particle)
    data["ions"] = [asdict(ion) for ion in particle.ions]
    for ion in data["ions"]:
        ion["position_nm"] = list(ion["position_nm"])
    return {"version": ENSEMBLE_VERSION, "particle": data}


def particle_from_dict(document: dict) -> Nanoparticle:
    version = document.get("version")
    if version != ENSEMBLE_VERSION:
        raise FormatError(f"unsupported ensemble version: {version!r}")
    data = dict(document["particle"])
    known = {f.name for f in fields(Nanoparticle)}
    unknown = set(data) - known
    if unknown:
        raise FormatError(f"unknown particle keys: {sorted(unknown)}")
    ion_keys = {f.name for f in fields(Ion)}
    ions = []
    for raw in data.pop("ions", []):
        if set(raw) - ion_keys:
            raise FormatError(f"unknown ion keys: {sorted(set(raw) - ion_keys)}")
        raw = dict(raw)
        raw["position_nm"] = tuple(raw["position_nm"])
        ions.append(Ion(**raw))
    return Nanoparticle(ions=ions, **data)


def save_particle(particle: Nanoparticle, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(particle_to_dict(particle), indent=2), encoding="utf-8")
    return path


def load_particle(path) -> Nanoparticle:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"ensemble file is not valid JSON: {e}")
    return particle_from_dict(document)
