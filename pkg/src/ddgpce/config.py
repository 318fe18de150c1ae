"""Pipeline configuration: JSON schema, semantic checks and model resolution.

Validation collects every problem it can find before anything is sampled or
evaluated, so one run of ``ddgpce validate`` reports the full list.
"""

from __future__ import annotations

import json
import shlex
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .distributions import RandomInputModel
from .errors import ConfigError
from .external import ExternalModel
from .multiindex import cardinality_reduced
from .models import TrussModel, TrussOutput, builtin_truss36, composite_input_model, linear_gaussian, truss36_input_model
from .risk import ESTIMATORS

_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}

_MARGINAL = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["normal", "uniform", "lognormal"]},
        "repeat": _POS_INT,
        "marginal": {"type": "object"},
        "mean": _NUM, "std": _NUM, "cov": _NUM, "lower": _NUM, "upper": _NUM,
    },
    "anyOf": [{"required": ["kind"]}, {"required": ["marginal"]}],
}

_MODEL_REF = {
    "type": "object",
    "properties": {
        "builtin": {"enum": ["truss36", "truss36-low", "linear"]},
        "output": {"enum": ["y1", "y2"]},
        "truss_file": {"type": "string"},
        "command": {"type": "string"},
        "timeout": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "batch_size": {"type": ["integer", "null"], "minimum": 1},
        "weights": {"type": "array", "items": _NUM},
        "offset": _NUM,
    },
    "oneOf": [{"required": ["builtin"]}, {"required": ["truss_file"]}, {"required": ["command"]}],
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ddgpce pipeline configuration",
    "type": "object",
    "properties": {
        "input_model": {
            "type": "object",
            "properties": {
                "builtin": {"enum": ["truss36", "composite"]},
                "marginals": {"type": "array", "items": _MARGINAL, "minItems": 1},
                "correlation": {"type": "object"},
            },
            "oneOf": [{"required": ["builtin"]}, {"required": ["marginals"]}],
        },
        "basis": {
            "type": "object",
            "properties": {
                "S": {"type": "integer", "minimum": 0},
                "m": {"type": "integer", "minimum": 0},
                "m_bar": {"oneOf": [_POS_INT, {"type": "array", "items": _POS_INT, "minItems": 1}]},
            },
            "required": ["S", "m"],
            "additionalProperties": False,
        },
        "samples": {
            "type": "object",
            "properties": {
                "L": _POS_INT, "L_prime": _POS_INT, "L_double_prime": _POS_INT,
                "L_bar": _POS_INT, "pool": _POS_INT,
            },
            "additionalProperties": False,
        },
        "beta": {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 1}]},
        "seed": {"type": "integer", "minimum": 0},
        "qmc_seed": {"type": "integer", "minimum": 0},
        "estimator": {"enum": list(ESTIMATORS)},
        "ratio_min": {"type": "number", "exclusiveMinimum": 0},
        "model": _MODEL_REF,
        "low_model": _MODEL_REF,
        "trials": {
            "type": "object",
            "properties": {"K": _POS_INT, "replace": {"type": "boolean"}},
            "additionalProperties": False,
        },
        "budget": {
            "type": "object",
            "properties": {"total": _NUM, "cost_high": _NUM, "cost_low": _NUM},
            "required": ["total", "cost_high", "cost_low"],
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"archive": {"type": "string"}, "report": {"type": "string"}},
            "additionalProperties": False,
        },
    },
    "required": ["input_model"],
    "additionalProperties": False,
}


@dataclass
class PipelineConfig:
    input_model: RandomInputModel
    model_ref: dict | None
    low_model_ref: dict | None = None
    S: int = 1
    m: int = 2
    m_bar: list[int] = field(default_factory=lambda: [3])
    L: int = 10_000
    L_prime: int | None = None
    L_double_prime: int | None = None
    L_bar: int = 1_000_000
    pool: int = 10_000
    betas: list[float] = field(default_factory=lambda: [0.95])
    seed: int = 0
    qmc_seed: int = 0
    estimator: str = "rockafellar"
    ratio_min: float = 3.0
    trials: int = 20
    replace: bool = False
    budget: dict | None = None
    archive_path: Path | None = None
    report_path: Path | None = None
    base_dir: Path = Path(".")

    @property
    def n_terms(self) -> int:
        return cardinality_reduced(self.input_model.dimension, self.S, self.m)

    @property
    def n_design(self) -> int:
        return self.L_prime if self.L_prime is not None else 4 * self.n_terms

    def n_high(self, m_bar: int) -> int:
        return self.L_double_prime if self.L_double_prime is not None else 8 * (m_bar + 1)


def _input_model(d: dict) -> RandomInputModel:
    if "builtin" in d:
        return truss36_input_model() if d["builtin"] == "truss36" else composite_input_model()
    return RandomInputModel.from_dict(d)


def _model_ref_problems(name: str, ref: dict, N: int, base: Path) -> list[str]:
    problems = []
    if "builtin" in ref:
        if ref["builtin"] == "linear":
            w = ref.get("weights")
            if w is None:
                problems.append(f"{name}: builtin 'linear' needs 'weights'")
            elif len(w) != N:
                problems.append(f"{name}: {len(w)} weights for {N} inputs")
        elif N != 36:
            problems.append(f"{name}: builtin {ref['builtin']!r} needs 36 inputs, input model has {N}")
    elif "truss_file" in ref:
        path = base / ref["truss_file"]
        if not path.is_file():
            problems.append(f"{name}: truss file {path} does not exist")
        else:
            try:
                n = TrussModel.load(path).n_inputs
            except (ConfigError, ValueError, OSError) as exc:
                problems.append(f"{name}: invalid truss file {path}: {exc}")
            else:
                if n != N:
                    problems.append(f"{name}: truss file has {n} random areas, input model has {N}")
    else:
        argv = shlex.split(ref["command"])
        exe = argv[0] if argv else ""
        if not exe or (shutil.which(exe) is None and not (base / exe).is_file()):
            problems.append(f"{name}: command {exe!r} not found")
    return problems


def resolve_model(ref: dict, input_model: RandomInputModel, base: Path = Path(".")):
    """Build the evaluator a model reference names."""
    if "builtin" in ref:
        if ref["builtin"] == "linear":
            return linear_gaussian(input_model, ref["weights"], ref.get("offset", 0.0))
        fine, low = builtin_truss36()
        return TrussOutput(fine if ref["builtin"] == "truss36" else low, ref.get("output", "y1"))
    if "truss_file" in ref:
        return TrussOutput(TrussModel.load(base / ref["truss_file"]), ref.get("output", "y1"))
    argv = shlex.split(ref["command"])
    if not shutil.which(argv[0]) and (base / argv[0]).is_file():
        argv[0] = str(base / argv[0])
    return ExternalModel(tuple(argv), ref.get("timeout"), ref.get("batch_size"))


def problems_error(problems: list[str]) -> ConfigError:
    return ConfigError("\n  - ".join([f"{len(problems)} configuration problem(s):", *problems]), problems)


def parse_config(doc: dict, base_dir: Path = Path("."), command: str | None = None) -> PipelineConfig:
    """Schema plus semantic validation; raises ConfigError listing every problem."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    schema_problems = [
        f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}"
        for e in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    ]
    if schema_problems:
        raise problems_error(schema_problems)

    problems = []
    try:
        model = _input_model(doc["input_model"])
    except (ConfigError, ValueError, KeyError) as exc:
        raise ConfigError(f"input_model: {exc}", [f"input_model: {exc}"]) from None
    N = model.dimension
    basis = doc.get("basis", {})
    samples = doc.get("samples", {})
    m_bar = basis.get("m_bar", 3)
    trials = doc.get("trials", {})
    out = doc.get("output", {})
    cfg = PipelineConfig(
        input_model=model,
        model_ref=doc.get("model"),
        low_model_ref=doc.get("low_model"),
        S=basis.get("S", 1),
        m=basis.get("m", 2),
        m_bar=[m_bar] if isinstance(m_bar, int) else list(m_bar),
        L=samples.get("L", 10_000),
        L_prime=samples.get("L_prime"),
        L_double_prime=samples.get("L_double_prime"),
        L_bar=samples.get("L_bar", 1_000_000),
        pool=samples.get("pool", 10_000),
        betas=[doc["beta"]] if isinstance(doc.get("beta", []), (int, float)) else list(doc.get("beta", [0.95])),
        seed=doc.get("seed", 0),
        qmc_seed=doc.get("qmc_seed", 0),
        estimator=doc.get("estimator", "rockafellar"),
        ratio_min=doc.get("ratio_min", 3.0),
        trials=trials.get("K", 20),
        replace=trials.get("replace", False),
        budget=doc.get("budget"),
        archive_path=None if "archive" not in out else base_dir / out["archive"],
        report_path=None if "report" not in out else base_dir / out["report"],
        base_dir=base_dir,
    )

    if cfg.S > N:
        problems.append(f"basis: S = {cfg.S} exceeds the input dimension N = {N}")
    if cfg.m < cfg.S:
        problems.append(f"basis: m = {cfg.m} must be at least S = {cfg.S}")
    K = None
    if not problems:
        try:
            K = cfg.n_terms
        except ConfigError as exc:
            problems.append(f"basis: {exc}")
    if K is not None:
        if not cfg.n_design > K:
            problems.append(f"samples: need L' > L_(N,S,m): got L' = {cfg.n_design} <= {K}")
        if cfg.L_bar < 10 * K:
            problems.append(f"samples: L_bar = {cfg.L_bar} must be at least 10 * {K}")
    for b in cfg.betas:
        if not 0 < b < 1:
            problems.append(f"beta: {b} is not in (0, 1)")
        elif cfg.L * (1 - b) < 1 - 1e-9:
            problems.append(f"beta: {b} needs L >= 1/(1 - beta); got L = {cfg.L}")
    for mb in cfg.m_bar if cfg.low_model_ref is not None or command == "bifit" else []:
        nh = cfg.n_high(mb)
        if not nh > mb + 1:
            problems.append(f"samples: need L'' > m_bar + 1: got L'' = {nh} for m_bar = {mb}")
        if nh > cfg.n_design:
            problems.append(f"samples: L'' = {nh} exceeds L' = {cfg.n_design}")
    if command == "bifit" and len(cfg.m_bar) != 1:
        problems.append("basis: bifit needs a single m_bar")
    if command in ("bifit",) and cfg.low_model_ref is None:
        problems.append("low_model: required for bifit")
    if command == "trials" and not cfg.replace and cfg.trials * cfg.n_design > cfg.pool:
        problems.append(
            f"trials: pool of {cfg.pool} is smaller than K * L' = {cfg.trials} * {cfg.n_design}"
        )
    if cfg.model_ref is None:
        if command in ("fit", "bifit", "trials"):
            problems.append(f"model: required for {command}")
    else:
        problems += _model_ref_problems("model", cfg.model_ref, N, base_dir)
    if cfg.low_model_ref is not None:
        problems += _model_ref_problems("low_model", cfg.low_model_ref, N, base_dir)
    if cfg.budget is not None and min(cfg.budget.values()) <= 0:
        problems.append("budget: costs and total must be positive")
    if problems:
        raise problems_error(problems)
    return cfg


def load_config(path, command: str | None = None) -> PipelineConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(doc, path.parent, command)
