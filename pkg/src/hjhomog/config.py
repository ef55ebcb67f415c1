"""Run configuration: schema validation, defaults, and the JSON output contract."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from importlib import resources

import jsonschema

from .core import PeriodicGrid
from .effective import ThetaInterval
from .hamiltonian import HamiltonianSpec, from_config


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the failing field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


DEFAULTS = {
    "order": "first",
    "tol": 1e-6,
    "seed": 0,
    "effective": {"theta_range": [-2.0, 2.0], "count": 17, "c": 0.0, "resolution": 0.05, "level_tol": 1e-3},
    "solve": {"eps": 0.0625, "c": 0.0, "envelope": True, "interval": None, "strict": False},
    "mather": {"theta": 0.0, "fourier_order": None},
    "rate": {
        "mode": "rate",
        "c": 0.0,
        "target": None,
        "eps_list": [0.25, 0.125, 0.0625, 0.03125, 0.015625],
        "interval": None,
    },
}


class OutputSchemaError(RuntimeError):
    pass


def load_schema(name: str) -> dict:
    text = (resources.files("hjhomog") / "schemas" / f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _path(error: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in error.absolute_path) or "<root>"


def validate(document, schema_name: str) -> None:
    schema = load_schema(schema_name)
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(document), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        raise ConfigError(errors[0].message, _path(errors[0]))


def materialize(raw: dict) -> dict:
    """Validate ``raw`` and return a copy with every default filled in."""
    validate(raw, "config")
    cfg = copy.deepcopy(raw)
    ham = cfg["hamiltonian"]
    ham.setdefault("dim", 1)
    for key in ("order", "tol", "seed"):
        cfg.setdefault(key, DEFAULTS[key])
    cfg.setdefault("grid", {})
    cfg["grid"].setdefault("points", 256 if ham["dim"] == 1 else 64)
    for block in ("effective", "solve", "rate"):
        merged = copy.deepcopy(DEFAULTS[block])
        merged.update(cfg.get(block, {}))
        cfg[block] = merged
    mather = copy.deepcopy(DEFAULTS["mather"])
    if ham["dim"] == 1:
        mather.update({"points": 32, "v_max": 5.0, "mv": 33})
    else:
        mather.update({"points": 12, "v_max": 2.0, "mv": 9})
    mather.update(cfg.get("mather", {}))
    cfg["mather"] = mather
    lo, hi = cfg["effective"]["theta_range"]
    if not lo < hi:
        raise ConfigError("theta_range must be increasing", "effective/theta_range")
    if mather["mv"] % 2 == 0:
        raise ConfigError("mv must be odd", "mather/mv")
    for path, block in (("solve/interval", cfg["solve"]["interval"]), ("rate/interval", cfg["rate"]["interval"])):
        if block and None not in block.values() and block["theta_minus"] > block["theta_plus"]:
            raise ConfigError("theta_minus exceeds theta_plus", path)
    return cfg


@dataclass(frozen=True)
class RunConfig:
    raw: dict  # the materialized document

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        return cls(materialize(raw))

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(raw)

    def hamiltonian(self) -> HamiltonianSpec:
        return from_config(self.raw["hamiltonian"])

    @property
    def order(self) -> str:
        return self.raw["order"]

    @property
    def tol(self) -> float:
        return float(self.raw["tol"])

    @property
    def dim(self) -> int:
        return int(self.raw["hamiltonian"]["dim"])

    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.dim, int(self.raw["grid"]["points"]))

    def block(self, name: str) -> dict:
        return self.raw[name]


def interval_from_block(block: dict, c: float) -> ThetaInterval:
    lo, hi = block["theta_minus"], block["theta_plus"]
    lo_inf, hi_inf = lo is None, hi is None
    lo_v = -math.inf if lo_inf else float(lo)
    hi_v = math.inf if hi_inf else float(hi)
    return ThetaInterval(float(c), lo_v, hi_v, False, lo_inf, hi_inf)


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _clean(obj.item())
    return obj


def dump_json(document: dict, schema_name: str) -> str:
    """Schema-checked JSON text with sorted keys; non-finite floats become null."""
    document = _clean(document)
    try:
        validate(document, schema_name)
    except ConfigError as exc:
        raise OutputSchemaError(f"{schema_name} output violates its schema: {exc}") from None
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"
