"""Declarative run files: schema, overrides, and translation into engine objects."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .fock import FieldCombination
from .integrator import IntegratorConfig
from .npacket import NPhotonSpec
from .operators import EXCITED, GROUND, SLH, MultiModeSLH, operator_from_json, two_level_slh
from .twomode import TwoModeCombination, scattering_preset
from .wavepackets import packet_from_config

EXPERIMENTS = ("single_run", "excite_sweep", "scaling_fit", "strong_coupling_map",
               "rabi_rect", "scatter_sweep", "oracle_check")

_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_count = {"type": "integer", "minimum": 0}
_operator = {"type": "object", "required": ["dim", "entries"],
             "properties": {"dim": {"type": "integer", "minimum": 1},
                            "entries": {"type": "array", "items": {"type": "array", "items": _number,
                                                                   "minItems": 2, "maxItems": 2}}}}
_packet = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["gaussian", "rectangular", "sampled"]},
        "omega": _pos, "t_a": _number, "t_max": _pos, "t0": _number, "dt": _pos,
        "file": {"type": "string"}, "re": {"type": "array"}, "im": {"type": "array"},
        "detuning": _number,
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "gaussian"}}}, "then": {"required": ["omega"]}},
        {"if": {"properties": {"kind": {"const": "rectangular"}}}, "then": {"required": ["t_max"]}},
        {"if": {"properties": {"kind": {"const": "sampled"}}},
         "then": {"anyOf": [{"required": ["file"]}, {"required": ["re", "dt"]}]}},
    ],
    "additionalProperties": False,
}
_amp_list = {"type": "array", "items": {"type": "array", "items": _number, "minItems": 2, "maxItems": 3}}
_field = {
    "type": "object",
    "properties": {
        "fock": {"oneOf": [_count, {"type": "array", "items": _count, "minItems": 2, "maxItems": 2}]},
        "superposition": _amp_list,
        "mixture": _amp_list,
        "npacket": {"type": "object", "required": ["basis", "amplitudes"]},
        "twomode_superposition": {"type": "array", "items": {"type": "array", "minItems": 3, "maxItems": 4}},
    },
    "minProperties": 1, "maxProperties": 1,
    "additionalProperties": False,
}
_range = {"oneOf": [
    {"type": "array", "items": _number, "minItems": 1},
    {"type": "object", "required": ["start", "stop", "num"],
     "properties": {"start": _number, "stop": _number, "num": {"type": "integer", "minimum": 1},
                    "log": {"type": "boolean"}},
     "additionalProperties": False},
]}

SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "system": {"type": "object", "properties": {
            "preset": {"enum": ["two_level_atom", "waveguide_atom"]},
            "gamma": _pos, "gamma_forward": _pos, "gamma_backward": _pos,
            "slh": {"type": "object", "required": ["s", "l", "h"]},
            "multimode_slh": {"type": "object", "required": ["s", "l", "h"]},
        }, "additionalProperties": False},
        "system_state": {"oneOf": [{"enum": ["ground", "excited"]}, _operator]},
        "packet": _packet,
        "packet2": _packet,
        "field": _field,
        "fields": {"type": "object", "additionalProperties": _field, "minProperties": 1},
        "phi": _number,
        "cross_flux": {"type": "boolean"},
        "integrator": {"type": "object", "properties": {
            "method": {"enum": ["rk45_adaptive", "rk4_fixed"]},
            "rtol": _pos, "atol": _pos, "dt_init": _pos, "dt_max": _pos, "dt_min": _pos,
            "window": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
            "sample_points": {"type": "integer", "minimum": 2},
        }, "additionalProperties": False},
        "sweep": {"type": "object", "properties": {
            "bandwidths": _range,
            "photons": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        }, "additionalProperties": False},
        "rabi": {"type": "object", "required": ["photons", "t_max"], "properties": {
            "photons": {"type": "integer", "minimum": 1}, "t_max": _pos,
            "samples": {"type": "integer", "minimum": 3}, "gamma_guided": _pos,
        }, "additionalProperties": False},
        "map": {"type": "object", "required": ["photons", "t_centers"], "properties": {
            "photons": {"type": "integer", "minimum": 1}, "tau": _pos, "t_centers": _range,
            "gamma_guided": _pos,
        }, "additionalProperties": False},
        "oracle": {"type": "object", "required": ["bins"], "properties": {
            "bins": {"type": "integer", "minimum": 1},
            "window": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
            "samples": {"type": "integer", "minimum": 2},
        }, "additionalProperties": False},
        "fit": {"type": "object", "properties": {
            "table": {"type": "string"},
        }, "additionalProperties": False},
        "output": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}


class RunFileError(ValueError):
    """Schema or semantic violation; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


def _path(parts) -> str:
    return "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in parts).lstrip(".")


def validate(doc: dict) -> None:
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(doc),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise RunFileError(_path(e.absolute_path), e.message)


def load(path) -> tuple[dict, Path]:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except FileNotFoundError:
        raise RunFileError("", f"run file {p} not found") from None
    except json.JSONDecodeError as exc:
        raise RunFileError("", f"not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise RunFileError("", "top level must be an object")
    return doc, p.parent


def apply_override(doc: dict, assignment: str) -> None:
    """``a.b.c=value``; value parsed as JSON, falling back to a plain string."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise RunFileError(key, "override must look like key.path=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = doc
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise RunFileError(key, "cannot descend into a non-object")
    node[parts[-1]] = value


def config_hash(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header_lines(doc: dict) -> list[str]:
    return [f"config_hash: {config_hash(doc)}", f"engine: fockwave {__version__}"]


def check_files(doc: dict, base_dir: Path) -> None:
    for key in ("packet", "packet2"):
        f = doc.get(key, {}).get("file")
        if f and not (base_dir / f).exists():
            raise RunFileError(f"{key}.file", f"file {f} not found")
    t = doc.get("fit", {}).get("table")
    if t and not (base_dir / t).exists():
        raise RunFileError("fit.table", f"file {t} not found")


# translation -------------------------------------------------------------------------

def expand_range(spec) -> np.ndarray:
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    if spec.get("log"):
        return np.logspace(np.log10(spec["start"]), np.log10(spec["stop"]), spec["num"])
    return np.linspace(spec["start"], spec["stop"], spec["num"])


def system(doc: dict):
    sysd = doc.get("system", {"preset": "two_level_atom"})
    try:
        if "slh" in sysd:
            return SLH.from_json(sysd["slh"])
        if "multimode_slh" in sysd:
            return MultiModeSLH.from_json(sysd["multimode_slh"])
        if sysd.get("preset", "two_level_atom") == "waveguide_atom":
            return scattering_preset(sysd.get("gamma_forward", 0.5), sysd.get("gamma_backward", 0.5))
        return two_level_slh(sysd.get("gamma", 1.0))
    except (ValueError, KeyError) as exc:
        raise RunFileError("system", str(exc)) from None


def system_state(doc: dict, dim: int):
    st = doc.get("system_state", "ground")
    if st == "ground":
        return np.diag([1.0] + [0.0] * (dim - 1)) if dim != 2 else GROUND
    if st == "excited":
        if dim != 2:
            raise RunFileError("system_state", "'excited' is defined for the two-level atom only")
        return EXCITED
    try:
        return operator_from_json(st)
    except ValueError as exc:
        raise RunFileError("system_state", str(exc)) from None


def packet(doc: dict, base_dir, key="packet"):
    if key not in doc:
        raise RunFileError(key, "missing packet")
    try:
        return packet_from_config(doc[key], base_dir)
    except (ValueError, KeyError) as exc:
        raise RunFileError(key, str(exc)) from None


def _amps(rows):
    return {int(r[0]): complex(r[1], r[2] if len(r) > 2 else 0.0) for r in rows}


def field_object(spec: dict, where: str, base_dir):
    """FieldCombination, TwoModeCombination or NPhotonSpec for one ``field`` entry."""
    try:
        if "fock" in spec:
            n = spec["fock"]
            return TwoModeCombination.fock(*n) if isinstance(n, list) else FieldCombination.fock(n)
        if "superposition" in spec:
            return FieldCombination.superposition(_amps(spec["superposition"]))
        if "mixture" in spec:
            return FieldCombination.mixture({int(r[0]): float(r[1]) for r in spec["mixture"]})
        if "twomode_superposition" in spec:
            return TwoModeCombination.superposition(
                {(int(r[0]), int(r[1])): complex(r[2], r[3] if len(r) > 3 else 0.0)
                 for r in spec["twomode_superposition"]})
        return NPhotonSpec.from_json(spec["npacket"], base_dir)
    except (ValueError, KeyError, TypeError) as exc:
        raise RunFileError(where, str(exc)) from None


def fields(doc: dict, base_dir) -> dict:
    if "fields" in doc:
        return {k: field_object(v, f"fields.{k}", base_dir) for k, v in doc["fields"].items()}
    if "field" in doc:
        return {"field": field_object(doc["field"], "field", base_dir)}
    raise RunFileError("field", "missing field specification")


def integrator_overrides(doc: dict) -> dict:
    """Integrator keys for ``resolve_config``; a missing window is chosen by the engine."""
    raw = copy.deepcopy(doc.get("integrator", {}))
    if "window" in raw:
        raw["window"] = tuple(raw["window"])
    try:
        IntegratorConfig(**{"window": (0.0, 1.0), **raw})
    except (ValueError, TypeError) as exc:
        raise RunFileError("integrator", str(exc)) from None
    return raw
