"""Experiment configuration: a flat JSON object, one experiment per file.

Reserved keys are ``experiment``, ``seed`` and ``output_path``; every other
key is a parameter of the experiment.  :func:`validate_text` reports every
violated constraint at once; :func:`parse_config` raises
:class:`ConfigError` carrying that list.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from numbers import Integral, Real

from .distinguishers import MAX_ENUMERATION_N

EXPERIMENTS = ("sample", "power", "tv_curve", "coupling", "martingale", "diffusion", "anticap", "qprobe")
RESERVED = ("experiment", "seed", "output_path")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class Param:
    kind: str  # "int", "float", "prob", "dim", "dims", "choice"
    required: bool = True
    default: object = None
    minimum: float | None = None
    choices: tuple = ()


def _dim_or_grid():
    return {"d": Param("dim", required=False), "d_grid": Param("dims", required=False)}


# d and d_grid are alternatives; _GRID_EXPERIMENTS need exactly one of them
SCHEMAS: dict[str, dict[str, Param]] = {
    "sample": {
        "n": Param("int", minimum=1),
        "p": Param("prob"),
        "model": Param("choice", required=False, default="geo", choices=("geo", "er")),
        "d": Param("dim", required=False),
        "trials": Param("int", minimum=1),
    },
    "power": {
        "n": Param("int", minimum=3),
        "p": Param("prob"),
        **_dim_or_grid(),
        "z": Param("float", required=False, default=3.0, minimum=0.0),
        "trials": Param("int", minimum=100),
    },
    "tv_curve": {
        "n": Param("int", minimum=1),
        "p": Param("prob"),
        **_dim_or_grid(),
        "trials": Param("int", minimum=1),
    },
    "coupling": {
        "n": Param("int", minimum=2),
        "p": Param("prob"),
        "d": Param("dim"),
        "eps": Param("float", required=False),
        "mc_budget": Param("int", minimum=1),
        "trials": Param("int", minimum=1),
    },
    "martingale": {
        "k": Param("int", minimum=0),
        "j": Param("int", minimum=0),
        "p": Param("prob"),
        **_dim_or_grid(),
        "trials": Param("int", minimum=2),
        "mc_samples": Param("int", minimum=100),
        "sweeps": Param("int", required=False, default=20, minimum=1),
        "method": Param("choice", required=False, default="splitting", choices=("splitting", "plain")),
    },
    "diffusion": {
        "d": Param("dim"),
        "p": Param("prob"),
        "pushes": Param("int", minimum=0),
        "particles": Param("int", minimum=1),
        "z_samples": Param("int", minimum=100),
        "start": Param("choice", required=False, default="point", choices=("point", "uniform")),
    },
    "anticap": {
        "m": Param("int", minimum=0),
        "p": Param("prob"),
        **_dim_or_grid(),
        "trials": Param("int", minimum=2),
        "mc_samples": Param("int", minimum=100),
        "sweeps": Param("int", required=False, default=20, minimum=1),
    },
    "qprobe": {
        "p": Param("prob"),
        **_dim_or_grid(),
        "trials": Param("int", minimum=10_000),
    },
}
_GRID_EXPERIMENTS = ("power", "tv_curve", "martingale", "anticap", "qprobe")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    output_path: str | None = None

    @property
    def d_grid(self) -> list[int]:
        if "d_grid" in self.parameters:
            return list(self.parameters["d_grid"])
        return [self.parameters["d"]]


def _is_int(v):
    return isinstance(v, Integral) and not isinstance(v, bool)


def _is_real(v):
    return isinstance(v, Real) and not isinstance(v, bool) and math.isfinite(v)


def _check_value(name, v, spec: Param, problems):
    if spec.kind == "choice":
        if v not in spec.choices:
            problems.append(f"{name}: must be one of {', '.join(spec.choices)}, got {v!r}")
        return
    if spec.kind == "dims":
        if not isinstance(v, list) or not v:
            problems.append(f"{name}: must be a non-empty list of dimensions")
            return
        for x in v:
            _check_value(name, x, Param("dim"), problems)
        return
    if spec.kind in ("int", "dim"):
        if not _is_int(v):
            problems.append(f"{name}: must be an integer, got {v!r}")
            return
        if spec.kind == "dim" and v < 2:
            problems.append(f"{name}: dimension must be >= 2, got {v}")
    elif not _is_real(v):
        problems.append(f"{name}: must be a finite number, got {v!r}")
        return
    if spec.kind == "prob" and not 0 < v < 1:
        problems.append(f"{name}: must lie in (0, 1), got {v}")
    if spec.minimum is not None and v < spec.minimum:
        problems.append(f"{name}: must be >= {spec.minimum}, got {v}")


def _cross_checks(experiment, params, problems):
    p = params.get("p")
    if experiment == "coupling" and _is_real(p) and p > 0.5:
        problems.append(f"p: the sandwich coupling is defined only for p <= 1/2, got {p}")
    if experiment == "coupling" and "eps" in params and _is_real(params["eps"]) and params["eps"] <= 0:
        problems.append("eps: must be positive")
    if experiment == "tv_curve" and _is_int(params.get("n")) and params["n"] > MAX_ENUMERATION_N:
        problems.append(f"n: n ≤ {MAX_ENUMERATION_N} required for exact enumeration, got {params['n']}")
    if experiment == "martingale" and _is_int(params.get("k")) and _is_int(params.get("j")) \
            and params["j"] > params["k"]:
        problems.append(f"j: must not exceed k, got j={params['j']}, k={params['k']}")
    if experiment == "sample" and params.get("model", "geo") == "geo" and "d" not in params:
        problems.append("d: required for model=geo")
    if experiment in _GRID_EXPERIMENTS:
        has_d, has_grid = "d" in params, "d_grid" in params
        if has_d == has_grid:
            problems.append("d: give exactly one of d or d_grid")


def check_document(doc) -> list[str]:
    """Every violated constraint of a decoded config document."""
    if not isinstance(doc, dict):
        return ["config must be a JSON object"]
    problems = []
    experiment = doc.get("experiment")
    if experiment is None:
        problems.append("experiment missing")
    elif experiment not in SCHEMAS:
        problems.append(f"experiment: unknown experiment {experiment!r} (one of {', '.join(EXPERIMENTS)})")
    seed = doc.get("seed", 0)
    if not _is_int(seed) or not 0 <= seed < 2**64:
        problems.append(f"seed: must be an integer in [0, 2^64), got {seed!r}")
    out = doc.get("output_path")
    if out is not None and not isinstance(out, str):
        problems.append("output_path: must be a string")
    if experiment not in SCHEMAS:
        return problems
    schema = SCHEMAS[experiment]
    params = {k: v for k, v in doc.items() if k not in RESERVED}
    for name in sorted(set(params) - set(schema)):
        problems.append(f"{name}: unknown parameter for experiment={experiment}")
    for name, spec in schema.items():
        if name in params:
            _check_value(name, params[name], spec, problems)
        elif spec.required:
            problems.append(f"{name}: missing (required by experiment={experiment})")
    _cross_checks(experiment, params, problems)
    return problems


def validate_text(text: str) -> list[str]:
    """Validation report for raw config text; empty when the config is valid."""
    if not text.strip():
        return ["experiment missing"]
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        return [f"config is not valid JSON: {exc}"]
    return check_document(doc)


def parse_config(text: str) -> ExperimentConfig:
    problems = validate_text(text)
    if problems:
        raise ConfigError(problems)
    doc = json.loads(text)
    schema = SCHEMAS[doc["experiment"]]
    params = {k: v for k, v in doc.items() if k not in RESERVED}
    for name, spec in schema.items():
        if name not in params and spec.default is not None:
            params[name] = spec.default
    return ExperimentConfig(doc["experiment"], params, int(doc.get("seed", 0)), doc.get("output_path"))
