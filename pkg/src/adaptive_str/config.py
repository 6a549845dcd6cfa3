"""Experiment configuration: JSON validated against ``schema/config.schema.json``.

Errors are raised as :class:`ConfigError` carrying the dotted JSON path of the
offending field (``system.sigma``, ``system.basis[1]``).
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import jsonschema

from .basis.parser import parse_expr
from .basis.spec import BasisSpec, SurrogatePolicy
from .errors import ConfigError, ExprError, ValidationError
from .simulator import NoiseMode, SimConfig, SystemInstance, ThetaMode, sample_instance

SCHEMA_VERSION = 1

DEFAULTS = {
    "system": {"theta_mode": "sampled", "y0": 0.0},
    "sim": {
        "horizon": 10000,
        "seed_count": 1,
        "base_seed": 0,
        "surrogate_policy": "OFF",
        "excursion_threshold": 1e6,
        "noise_mode": "GAUSSIAN",
    },
    "analysis": {"t0": 10, "recovery_sigmas": 6.0},
    "density": {"h": 1e-3, "l_max": 1e4, "refine": True},
    "check": {"tol": 1e-12},
    "output": {"directory": "out", "emit_trajectories": False, "cadence": 1},
}


@lru_cache(maxsize=1)
def config_schema() -> dict:
    text = resources.files("adaptive_str").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _path(parts) -> str:
    out = ""
    for p in parts:
        if isinstance(p, int):
            out += f"[{p}]"
        else:
            out += ("." if out else "") + str(p)
    return out or "<root>"


def _schema_error(err: jsonschema.ValidationError) -> ConfigError:
    parts = list(err.absolute_path)
    msg = err.message
    if err.validator == "required" and isinstance(err.instance, dict):
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            parts.append(missing[0])
            msg = "required field is missing"
    elif err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            parts.append(extra[0])
            msg = "unknown field"
    return ConfigError(msg, _path(parts))


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    name: str
    basis: BasisSpec

    @property
    def system(self) -> dict:
        return self.raw["system"]

    @property
    def sim(self) -> dict:
        return self.raw["sim"]

    @property
    def analysis(self) -> dict:
        return self.raw["analysis"]

    @property
    def density(self) -> dict:
        return self.raw["density"]

    @property
    def check(self) -> dict:
        return self.raw["check"]

    @property
    def output(self) -> dict:
        return self.raw["output"]

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def exponents(self) -> Optional[list[float]]:
        return self.system.get("declared_exponents")

    def seeds(self) -> list[int]:
        if "seeds" in self.sim:
            return sorted(set(int(s) for s in self.sim["seeds"]))
        base = int(self.sim["base_seed"])
        return list(range(base, base + int(self.sim["seed_count"])))

    def sim_config(self, seed: int) -> SimConfig:
        s = self.sim
        return SimConfig(
            horizon=int(s["horizon"]),
            seed=int(seed),
            surrogate_policy=SurrogatePolicy(s["surrogate_policy"]),
            excursion_threshold=float(s["excursion_threshold"]),
            record_cadence=int(self.output["cadence"]),
            noise_mode=NoiseMode(s["noise_mode"]),
            lambda_cadence=s.get("lambda_cadence"),
        )

    def instance(self, seed: int) -> SystemInstance:
        sy = self.system
        return sample_instance(
            self.basis, sy["theta0"], float(sy["sigma"]), float(sy["y0"]), int(seed),
            ThetaMode(sy["theta_mode"]), sy.get("theta"),
        )

    def to_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True)


def _apply_defaults(doc: dict) -> dict:
    out = copy.deepcopy(doc)
    for section, vals in DEFAULTS.items():
        sec = out.setdefault(section, {})
        for k, v in vals.items():
            sec.setdefault(k, v)
    return out


def _check_semantics(doc: dict) -> BasisSpec:
    sy = doc["system"]
    exprs = []
    for i, src in enumerate(sy["basis"]):
        try:
            exprs.append(parse_expr(src))
        except ExprError as exc:
            raise ConfigError(str(exc), f"system.basis[{i}]") from None
    n = len(exprs)
    if len(sy["theta0"]) != n:
        raise ConfigError(f"must have length {n} (one per basis function)", "system.theta0")
    if sy["theta_mode"] == "fixed":
        if "theta" not in sy:
            raise ConfigError("required when theta_mode is fixed", "system.theta")
        if len(sy["theta"]) != n:
            raise ConfigError(f"must have length {n} (one per basis function)", "system.theta")
    for key in ("sigma", "y0", "declared_bound"):
        if key in sy and not math.isfinite(sy[key]):
            raise ConfigError("must be finite", f"system.{key}")
    b = sy.get("declared_exponents")
    if b is not None:
        if any(not (math.isfinite(v) and v > 0) for v in b):
            raise ConfigError("exponents must be positive and finite", "system.declared_exponents")
        if any(not x > y for x, y in zip(b, b[1:])):
            raise ConfigError("exponents must be strictly decreasing", "system.declared_exponents")
        if len(b) != n:
            raise ConfigError(f"must have length {n} (one per basis function)", "system.declared_exponents")
    win = doc["analysis"].get("rate_window")
    if win is not None and not win[0] < win[1]:
        raise ConfigError("window must be increasing", "analysis.rate_window")
    ladder = doc["density"].get("ladder")
    if ladder is not None and any(not x < y for x, y in zip(ladder, ladder[1:])):
        raise ConfigError("ladder must be increasing", "density.ladder")
    try:
        return BasisSpec(
            tuple(exprs),
            declared_exponents=tuple(b) if b is not None else None,
            declared_bound=sy.get("declared_bound"),
            surrogate_policy=SurrogatePolicy(doc["sim"]["surrogate_policy"]),
        )
    except ValidationError as exc:
        raise ConfigError(str(exc), "system") from None


def load_config(source: Any, name: Optional[str] = None) -> ExperimentConfig:
    """Load from a path, a JSON string or an already parsed dict."""
    if isinstance(source, dict):
        doc = source
    else:
        text = None
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            p = Path(source)
            try:
                text = p.read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc.strerror}", str(p)) from None
            if name is None:
                name = p.stem
        else:
            text = source
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg} at line {exc.lineno} column {exc.colno}", "<root>") from None
    validator = jsonschema.Draft202012Validator(config_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        raise _schema_error(jsonschema.exceptions.best_match(errors))
    doc = _apply_defaults(doc)
    spec = _check_semantics(doc)
    return ExperimentConfig(doc, name or doc.get("name", "config"), spec)


def scenario_path(name: str) -> Path:
    """Path of a shipped scenario config (``example1``, ``example2``, ...)."""
    fname = name if name.endswith(".json") else name + ".json"
    return Path(str(resources.files("adaptive_str").joinpath("scenarios", fname)))


def list_scenarios() -> list[str]:
    d = resources.files("adaptive_str").joinpath("scenarios")
    return sorted(p.name[:-5] for p in d.iterdir() if p.name.endswith(".json"))
