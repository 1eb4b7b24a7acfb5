"""Experiment configuration: schema, validation with line numbers, serialization.

A config is a YAML (or JSON) mapping.  Keys::

    schema_version: 1                      # required
    experiment: ghz_infidelity | cnot_average | irb | bounds
    seed: 12345                            # required unless given on the command line
    eta_T: 0.0312                          # ZZ crosstalk times CNOT duration
    phi: [0.0, 0.025, 0.05]                # cnot_average sweep (alias of eta_T), scalar for irb
    xi_T: 0.0035                           # noise strength times CNOT duration
    theta: 0.0                             # single-qubit Z-error angle
    noise_weights: [0.5, 0.5]              # (dephasing, damping)
    n_max: 5                               # highest estimator order
    precision: null                        # early-stopping threshold on |sigma_{n+1} - sigma_n|
    orders: [1, 2]                         # cnot_average estimator orders
    M: 300                                 # cnot_average preparation Cliffords
    shots: exact                           # or a positive integer
    quadrature_order: 16
    spam: reference                        # reference | none | {fiducial_angles: [ax, ay], povm: [p0, p1, p2, p3]}
    irb: {enabled: true, lengths: [...], samples_per_length: 60, shots: exact}
    bounds_circuit: ghz                    # bounds experiment: ghz | cnot
    output_dir: results
    record_wall_time: false
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .exceptions import ConfigError

SCHEMA_VERSION = 1
EXPERIMENTS = ("ghz_infidelity", "cnot_average", "irb", "bounds")
DEFAULT_WEIGHTS = {"ghz_infidelity": (0.5, 0.5), "bounds": (0.5, 0.5),
                   "cnot_average": (1.0, 0.1), "irb": (1.0, 0.1)}
SEED_MAX = 2**64 - 1

_TOP_KEYS = {
    "schema_version", "experiment", "seed", "eta_T", "phi", "xi_T", "theta", "noise_weights",
    "n_max", "precision", "orders", "M", "shots", "quadrature_order", "spam", "irb",
    "bounds_circuit", "output_dir", "record_wall_time",
}
_IRB_KEYS = {"enabled", "lengths", "samples_per_length", "shots"}
_SPAM_KEYS = {"fiducial_angles", "povm"}


@dataclass(frozen=True)
class SpamConfig:
    fiducial_angles: tuple = (0.0, 0.0)
    povm: tuple = (0.5, 0.0, 0.0, 0.5)


REFERENCE_SPAM = SpamConfig((0.005 * math.pi, 0.005 * math.pi), (0.501, 0.0, 0.0, 0.495))


@dataclass(frozen=True)
class IrbSettings:
    enabled: bool = True
    lengths: tuple = tuple(3 + 15 * k for k in range(21))
    samples_per_length: int = 60
    shots: Any = "exact"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    schema_version: int = SCHEMA_VERSION
    eta_T: float = 0.0
    phi: tuple = (0.0,)
    xi_T: float = 0.0
    theta: float = 0.0
    noise_weights: tuple = (0.5, 0.5)
    n_max: int = 5
    precision: float | None = None
    orders: tuple = (1, 2)
    M: int = 300
    shots: Any = "exact"
    quadrature_order: int = 16
    spam: SpamConfig | None = None
    irb: IrbSettings = IrbSettings()
    bounds_circuit: str = "ghz"
    output_dir: str = "results"
    record_wall_time: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spam"] = None if self.spam is None else asdict(self.spam)
        for k, v in list(d.items()):
            if isinstance(v, tuple):
                d[k] = list(v)
        for sub in ("spam", "irb"):
            if d[sub] is not None:
                d[sub] = {k: list(v) if isinstance(v, tuple) else v for k, v in d[sub].items()}
        return d


def _line_map(node, prefix=()) -> dict:
    """Map key paths to 1-based line numbers from a composed YAML node."""
    out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = prefix + (str(k.value),)
            out[path] = k.start_mark.line + 1
            out.update(_line_map(v, path))
    return out


def _load(text: str, is_json: bool):
    if is_json:
        try:
            return json.loads(text), {}
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e.msg}", e.lineno) from None
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark else None
        raise ConfigError(f"invalid YAML: {e.problem}", line) from None
    return data, _line_map(node) if node is not None else {}


class _Validator:
    def __init__(self, lines: dict):
        self.lines = lines

    def fail(self, path, msg):
        raise ConfigError(f"{'.'.join(path)}: {msg}", self.lines.get(tuple(path)))

    def number(self, path, v, minimum=0.0):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(path, f"expected a finite number, got {v!r}")
        if minimum is not None and v < minimum:
            self.fail(path, f"must be >= {minimum}, got {v}")
        return float(v)

    def integer(self, path, v, minimum=None, maximum=None):
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(path, f"expected an integer, got {v!r}")
        if minimum is not None and v < minimum:
            self.fail(path, f"must be >= {minimum}, got {v}")
        if maximum is not None and v > maximum:
            self.fail(path, f"must be <= {maximum}, got {v}")
        return v

    def shots(self, path, v):
        if v == "exact":
            return "exact"
        return self.integer(path, v, minimum=1)

    def number_list(self, path, v, length=None, minimum=0.0):
        if not isinstance(v, (list, tuple)):
            v = [v]
        if length is not None and len(v) != length:
            self.fail(path, f"expected {length} values, got {len(v)}")
        return tuple(self.number(path, x, minimum) for x in v)

    def keys(self, path, d, allowed):
        if not isinstance(d, dict):
            self.fail(path, "expected a mapping")
        for k in d:
            if k not in allowed:
                self.fail(tuple(path) + (str(k),), "unknown key")


def from_mapping(data: Any, lines: dict | None = None, seed_override: int | None = None) -> ExperimentConfig:
    """Validate a parsed mapping into an :class:`ExperimentConfig`."""
    v = _Validator(lines or {})
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", 1)
    v.keys((), data, _TOP_KEYS)
    if "schema_version" not in data:
        raise ConfigError("schema_version is required", 1)
    if data["schema_version"] != SCHEMA_VERSION:
        v.fail(("schema_version",), f"unsupported version {data['schema_version']!r}")
    exp = data.get("experiment")
    if exp not in EXPERIMENTS:
        v.fail(("experiment",), f"must be one of {', '.join(EXPERIMENTS)}")
    seed = seed_override if seed_override is not None else data.get("seed")
    if seed is None:
        raise ConfigError("seed is required (in the file or via --seed)", 1)
    seed = v.integer(("seed",), seed, 0, SEED_MAX)

    kw: dict = {"experiment": exp, "seed": seed}
    for key in ("eta_T", "xi_T", "theta"):
        if key in data:
            kw[key] = v.number((key,), data[key])
    if "phi" in data:
        kw["phi"] = v.number_list(("phi",), data["phi"])
        if "eta_T" not in data and exp != "cnot_average":
            kw["eta_T"] = kw["phi"][0]
    kw["noise_weights"] = (
        v.number_list(("noise_weights",), data["noise_weights"], 2)
        if "noise_weights" in data else DEFAULT_WEIGHTS[exp]
    )
    if "n_max" in data:
        kw["n_max"] = v.integer(("n_max",), data["n_max"], 1, 20)
    if data.get("precision") is not None:
        kw["precision"] = v.number(("precision",), data["precision"])
    if "orders" in data:
        orders = data["orders"] if isinstance(data["orders"], list) else [data["orders"]]
        kw["orders"] = tuple(v.integer(("orders",), o, 1, 20) for o in orders)
    if "M" in data:
        kw["M"] = v.integer(("M",), data["M"], 1)
    if "shots" in data:
        kw["shots"] = v.shots(("shots",), data["shots"])
    if "quadrature_order" in data:
        kw["quadrature_order"] = v.integer(("quadrature_order",), data["quadrature_order"], 1, 200)
    if "spam" in data:
        s = data["spam"]
        if s in (None, "none"):
            kw["spam"] = None
        elif s == "reference":
            kw["spam"] = REFERENCE_SPAM
        else:
            v.keys(("spam",), s, _SPAM_KEYS)
            kw["spam"] = SpamConfig(
                v.number_list(("spam", "fiducial_angles"), s.get("fiducial_angles", [0, 0]), 2, None),
                v.number_list(("spam", "povm"), s.get("povm", [0.5, 0, 0, 0.5]), 4, None),
            )
    elif exp in ("cnot_average", "irb"):
        kw["spam"] = REFERENCE_SPAM
    if "irb" in data:
        r = data["irb"]
        v.keys(("irb",), r, _IRB_KEYS)
        ik = {}
        if "enabled" in r:
            if not isinstance(r["enabled"], bool):
                v.fail(("irb", "enabled"), "expected true or false")
            ik["enabled"] = r["enabled"]
        if "lengths" in r:
            ls = r["lengths"]
            if not isinstance(ls, list) or not ls:
                v.fail(("irb", "lengths"), "expected a non-empty list")
            ls = tuple(v.integer(("irb", "lengths"), x, 1) for x in ls)
            if any(b <= a for a, b in zip(ls, ls[1:])):
                v.fail(("irb", "lengths"), "must be strictly increasing")
            ik["lengths"] = ls
        if "samples_per_length" in r:
            ik["samples_per_length"] = v.integer(("irb", "samples_per_length"), r["samples_per_length"], 1)
        if "shots" in r:
            ik["shots"] = v.shots(("irb", "shots"), r["shots"])
        kw["irb"] = IrbSettings(**ik)
    if "bounds_circuit" in data:
        if data["bounds_circuit"] not in ("ghz", "cnot"):
            v.fail(("bounds_circuit",), "must be ghz or cnot")
        kw["bounds_circuit"] = data["bounds_circuit"]
    if "output_dir" in data:
        if not isinstance(data["output_dir"], str):
            v.fail(("output_dir",), "expected a path string")
        kw["output_dir"] = data["output_dir"]
    if "record_wall_time" in data:
        if not isinstance(data["record_wall_time"], bool):
            v.fail(("record_wall_time",), "expected true or false")
        kw["record_wall_time"] = data["record_wall_time"]
    return ExperimentConfig(**kw)


def parse_config(text: str, is_json: bool = False, seed_override: int | None = None) -> ExperimentConfig:
    data, lines = _load(text, is_json)
    return from_mapping(data, lines, seed_override)


def load_config(path, seed_override: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    return parse_config(text, path.suffix.lower() == ".json", seed_override)


def dump_config(cfg: ExperimentConfig, as_json: bool = False) -> str:
    d = cfg.to_dict()
    if as_json:
        return json.dumps(d, indent=2, sort_keys=True)
    return yaml.safe_dump(d, sort_keys=True)
