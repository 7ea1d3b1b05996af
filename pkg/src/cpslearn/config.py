"""Declarative pipeline configuration: validation and execution.

A pipeline config is a JSON document with these fields::

    {
      "schema_version": 1,
      "seed": 0,
      "environment": {"kind": "ode_watertank" | "csv" | "json", ...},
      "transforms": [{"kind": "sliding_window" | "select" | "explode"
                               | "standardize", ...}, ...],
      "io": {"inputs": [...], "outputs": [...]},
      "split_fraction": 0.8,
      "learner": {"kind": "regression_tree" | "linear"
                          | "incremental_linear" | "remote", ...},
      "metrics": ["mae", "mse", ...]
    }

Execution order: observe the environment, fit and apply the transforms,
split rows chronologically, learn on the leading part, evaluate on the rest.
Adaptive transforms are fitted on the full observed dataset, before the
split. Reports are written with sorted keys, so a config plus seed maps to
byte-identical report files.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import remote
from .dataset import Dataset
from .environments import DatasetStream, OdeEnvironment, OfflineEnvironment, WaterTankSystem
from .errors import PipelineError
from .learners import (
    MODEL_FILE_SUFFIX,
    IncrementalLinearLearner,
    LinearRegressionLearner,
    Model,
    RegressionTreeLearner,
    save_model,
)
from .metrics import REGISTRY
from .strategies import EvaluationReport, IoSpec, evaluate, learn_incremental, learn_offline
from .transforms import Explode, Select, SlidingWindow, Standardize, TransformChain

CONFIG_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1

ENVIRONMENT_KINDS = ("ode_watertank", "csv", "json")
TRANSFORM_KINDS = ("sliding_window", "select", "explode", "standardize")
LEARNER_KINDS = ("regression_tree", "linear", "incremental_linear", "remote")

_TOP_LEVEL_KEYS = {
    "schema_version",
    "seed",
    "environment",
    "transforms",
    "io",
    "split_fraction",
    "learner",
    "metrics",
    "output_dir",
}


class ConfigError(PipelineError):
    """A configuration field is missing, unknown, or invalid."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def load_config(path) -> dict:
    """Read a JSON config file.

    Raises:
        ConfigError: if the file is not valid JSON or not an object.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("<file>", "config root must be an object")
    return cfg


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_names(diags: list[str], field: str, value, allow_empty: bool = False) -> None:
    if not isinstance(value, list) or not all(isinstance(n, str) for n in value):
        diags.append(f"{field}: must be a list of column names")
    elif not value and not allow_empty:
        diags.append(f"{field}: must not be empty")


def _validate_environment(diags: list[str], spec) -> None:
    if not isinstance(spec, dict):
        diags.append("environment: must be an object")
        return
    kind = spec.get("kind")
    if kind not in ENVIRONMENT_KINDS:
        diags.append(f"environment.kind: unknown kind {kind!r} (known: {list(ENVIRONMENT_KINDS)})")
        return
    if kind == "ode_watertank":
        defaults = _WATERTANK_DEFAULTS
        for key, value in spec.items():
            if key != "kind" and key not in defaults:
                diags.append(f"environment.{key}: unknown parameter")
        for key in ("samples",):
            if key in spec and (not isinstance(spec[key], int) or spec[key] < 1):
                diags.append(f"environment.{key}: must be a positive integer")
        for key in ("dt", "substep", "area"):
            if key in spec and (not _is_number(spec[key]) or spec[key] <= 0):
                diags.append(f"environment.{key}: must be a positive number")
        for key in ("initial_level", "outflow_coeff", "inflow_gain"):
            if key in spec and not _is_number(spec[key]):
                diags.append(f"environment.{key}: must be a number")
        if "initial_level" in spec and _is_number(spec["initial_level"]) and spec["initial_level"] < 0:
            diags.append("environment.initial_level: must be non-negative")
    elif kind in ("csv", "json"):
        if not isinstance(spec.get("path"), str):
            diags.append("environment.path: must be a file path string")
        if kind == "csv":
            if "has_header" in spec and not isinstance(spec["has_header"], bool):
                diags.append("environment.has_header: must be a boolean")
            if "delimiter" in spec and (
                not isinstance(spec["delimiter"], str) or len(spec["delimiter"]) != 1
            ):
                diags.append("environment.delimiter: must be a single character")


def _validate_transform(diags: list[str], index: int, spec) -> None:
    field = f"transforms[{index}]"
    if not isinstance(spec, dict):
        diags.append(f"{field}: must be an object")
        return
    kind = spec.get("kind")
    if kind not in TRANSFORM_KINDS:
        diags.append(f"{field}.kind: unknown kind {kind!r} (known: {list(TRANSFORM_KINDS)})")
        return
    if kind == "sliding_window":
        size = spec.get("window_size")
        if not isinstance(size, int) or size < 1:
            diags.append(f"{field}.window_size: must be a positive integer")
    elif kind == "select":
        _check_names(diags, f"{field}.names", spec.get("names"), allow_empty=True)
    else:
        _check_names(diags, f"{field}.names", spec.get("names"))


def _validate_learner(diags: list[str], spec) -> None:
    if not isinstance(spec, dict):
        diags.append("learner: must be an object")
        return
    kind = spec.get("kind")
    if kind not in LEARNER_KINDS:
        diags.append(f"learner.kind: unknown kind {kind!r} (known: {list(LEARNER_KINDS)})")
        return
    if kind == "regression_tree":
        if "max_depth" in spec and (not isinstance(spec["max_depth"], int) or spec["max_depth"] < 0):
            diags.append("learner.max_depth: must be a non-negative integer")
        if "min_samples_leaf" in spec and (
            not isinstance(spec["min_samples_leaf"], int) or spec["min_samples_leaf"] < 1
        ):
            diags.append("learner.min_samples_leaf: must be a positive integer")
    elif kind == "incremental_linear":
        if "forgetting_factor" in spec and not (
            _is_number(spec["forgetting_factor"]) and 0 < spec["forgetting_factor"] <= 1
        ):
            diags.append("learner.forgetting_factor: must be in (0, 1]")
        if "regularization" in spec and not (
            _is_number(spec["regularization"]) and spec["regularization"] > 0
        ):
            diags.append("learner.regularization: must be positive")
        if "batch_size" in spec and (not isinstance(spec["batch_size"], int) or spec["batch_size"] < 1):
            diags.append("learner.batch_size: must be a positive integer")
    elif kind == "remote":
        address = spec.get("address")
        if not isinstance(address, str):
            diags.append("learner.address: must be a 'host:port' string")
        else:
            try:
                remote.parse_address(address)
            except ValueError:
                diags.append(f"learner.address: not a 'host:port' string: {address!r}")
        if "timeout" in spec and not (_is_number(spec["timeout"]) and spec["timeout"] > 0):
            diags.append("learner.timeout: must be a positive number")


def validate_config(cfg: dict) -> list[str]:
    """Schema plus cross-field validation, without executing anything.

    Returns a list of diagnostics; an empty list means the config is valid.
    """
    diags: list[str] = []
    for key in cfg:
        if key not in _TOP_LEVEL_KEYS:
            diags.append(f"{key}: unknown top-level field")
    if "schema_version" in cfg and cfg["schema_version"] != CONFIG_SCHEMA_VERSION:
        diags.append(f"schema_version: expected {CONFIG_SCHEMA_VERSION}, got {cfg['schema_version']}")
    if "seed" in cfg and not isinstance(cfg["seed"], int):
        diags.append("seed: must be an integer")
    if "output_dir" in cfg and not isinstance(cfg["output_dir"], str):
        diags.append("output_dir: must be a directory path string")

    for field in ("environment", "io", "learner", "metrics", "split_fraction"):
        if field not in cfg:
            diags.append(f"{field}: required field is missing")

    if "environment" in cfg:
        _validate_environment(diags, cfg["environment"])
    for index, spec in enumerate(cfg.get("transforms", []) or []):
        _validate_transform(diags, index, spec)
    if "transforms" in cfg and not isinstance(cfg["transforms"], list):
        diags.append("transforms: must be a list")

    io = cfg.get("io")
    if io is not None:
        if not isinstance(io, dict):
            diags.append("io: must be an object")
        else:
            _check_names(diags, "io.inputs", io.get("inputs"))
            _check_names(diags, "io.outputs", io.get("outputs"))
            if isinstance(io.get("outputs"), list) and len(io["outputs"]) != 1:
                diags.append("io.outputs: exactly one output column is supported")
            if isinstance(io.get("inputs"), list) and isinstance(io.get("outputs"), list):
                overlap = set(io["inputs"]) & set(io["outputs"])
                if overlap:
                    diags.append(f"io: inputs and outputs overlap: {sorted(overlap)}")

    fraction = cfg.get("split_fraction")
    if fraction is not None and not (_is_number(fraction) and 0 < fraction < 1):
        diags.append("split_fraction: must be a number in (0, 1)")

    if "learner" in cfg:
        _validate_learner(diags, cfg["learner"])

    names = cfg.get("metrics")
    if names is not None:
        if not isinstance(names, list) or not names:
            diags.append("metrics: must be a non-empty list of metric names")
        else:
            for name in names:
                if name not in REGISTRY:
                    diags.append(f"metrics: unknown metric {name!r} (known: {sorted(REGISTRY)})")
    return diags


_WATERTANK_DEFAULTS = {
    "samples": 250,
    "dt": 0.1,
    "substep": 1e-3,
    "initial_level": 1.0,
    "area": 5.0,
    "outflow_coeff": 0.5,
    "inflow_gain": 2.0,
}


def build_environment(spec: dict) -> OfflineEnvironment:
    kind = spec["kind"]
    if kind == "ode_watertank":
        params = {**_WATERTANK_DEFAULTS, **{k: v for k, v in spec.items() if k != "kind"}}
        system = WaterTankSystem(
            level=params["initial_level"],
            area=params["area"],
            outflow_coeff=params["outflow_coeff"],
            inflow_gain=params["inflow_gain"],
        )
        ode = OdeEnvironment(system, sample_period=params["dt"], substep=params["substep"])
        return OfflineEnvironment.from_dataset(ode.sample_trajectory(params["samples"]))
    if kind == "csv":
        return OfflineEnvironment.from_csv(
            spec["path"],
            has_header=spec.get("has_header", True),
            delimiter=spec.get("delimiter", ","),
        )
    if kind == "json":
        return OfflineEnvironment.from_json(spec["path"])
    raise ConfigError("environment.kind", f"unknown kind {kind!r}")


def build_transform(spec: dict, index: int):
    kind = spec["kind"]
    if kind == "sliding_window":
        return SlidingWindow(spec["window_size"])
    if kind == "select":
        return Select(spec["names"])
    if kind == "explode":
        return Explode(spec["names"])
    if kind == "standardize":
        return Standardize(spec["names"])
    raise ConfigError(f"transforms[{index}].kind", f"unknown kind {kind!r}")


class PipelineResult:
    """Everything a pipeline run produced."""

    def __init__(self, report: EvaluationReport, model: Model, seed: int):
        self.report = report
        self.model = model
        self.seed = seed

    def report_dict(self) -> dict:
        return {"schema_version": REPORT_SCHEMA_VERSION, **self.report.to_dict()}


def run_config(cfg: dict, seed_override: int | None = None) -> PipelineResult:
    """Execute a validated config: observe, transform, split, learn, evaluate.

    Raises:
        ConfigError: naming the offending field, if validation fails.
    """
    diagnostics = validate_config(cfg)
    if diagnostics:
        first = diagnostics[0]
        field, _, message = first.partition(": ")
        raise ConfigError(field, message or first)
    seed = seed_override if seed_override is not None else cfg.get("seed", 0)

    environment = build_environment(cfg["environment"])
    chain = TransformChain(
        [build_transform(spec, i) for i, spec in enumerate(cfg.get("transforms", []))]
    )
    observed = environment.observe()
    chain.fit(observed)
    transformed = chain.apply(observed)
    train, held_out = transformed.split(cfg["split_fraction"])

    io = IoSpec(cfg["io"]["inputs"], cfg["io"]["outputs"])
    learner_spec = cfg["learner"]
    kind = learner_spec["kind"]
    session = None
    try:
        if kind == "regression_tree":
            learner = RegressionTreeLearner(
                max_depth=learner_spec.get("max_depth", 5),
                min_samples_leaf=learner_spec.get("min_samples_leaf", 1),
            )
            model = learn_offline(OfflineEnvironment.from_dataset(train), None, io, learner)
        elif kind == "linear":
            model = learn_offline(
                OfflineEnvironment.from_dataset(train), None, io, LinearRegressionLearner()
            )
        elif kind == "incremental_linear":
            learner = IncrementalLinearLearner(
                forgetting_factor=learner_spec.get("forgetting_factor", 1.0),
                regularization=learner_spec.get("regularization", 1e-8),
            )
            stream = DatasetStream(train, learner_spec.get("batch_size", 32))
            model = learn_incremental(stream, None, io, learner)
        else:  # remote
            session = remote.connect(
                learner_spec["address"], timeout=learner_spec.get("timeout", remote.DEFAULT_TIMEOUT)
            )
            model = learn_offline(
                OfflineEnvironment.from_dataset(train),
                None,
                io,
                remote.RemoteLearnerClient(session),
            )

        report = evaluate(OfflineEnvironment.from_dataset(held_out), model, io, cfg["metrics"])
        if isinstance(model, remote.RemoteModel):
            model = model.fetch()  # persistable local copy of the remote artifact
    finally:
        if session is not None:
            session.close()
    return PipelineResult(report, model, seed)


def write_result(result: PipelineResult, out_dir) -> tuple[Path, Path]:
    """Write report.json and model.fcm.json into ``out_dir``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    model_path = out / f"model{MODEL_FILE_SUFFIX}"
    body = json.dumps(result.report_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"
    report_path.write_text(body, encoding="utf-8")
    save_model(result.model, model_path)
    return report_path, model_path


def watertank_config(learner: str = "tree", max_depth: int = 5, seed: int = 0) -> dict:
    """The built-in benchmark scenario as an explicit config.

    Simulates the water tank (250 samples at 0.1 s), windows three time
    steps, predicts the newest level from the five preceding window columns,
    trains on the leading 80% of rows, and reports MAE and MSE.
    """
    learners = {
        "tree": {"kind": "regression_tree", "max_depth": max_depth, "min_samples_leaf": 1},
        "linear": {"kind": "linear"},
        "incremental_linear": {
            "kind": "incremental_linear",
            "forgetting_factor": 1.0,
            "regularization": 1e-8,
            "batch_size": 32,
        },
    }
    if learner not in learners:
        raise ConfigError("learner", f"unknown learner {learner!r} (known: {sorted(learners)})")
    return {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "seed": seed,
        "environment": {"kind": "ode_watertank", **_WATERTANK_DEFAULTS},
        "transforms": [{"kind": "sliding_window", "window_size": 3}],
        "io": {"inputs": ["V_0", "x_0", "V_1", "x_1", "V_2"], "outputs": ["x_2"]},
        "split_fraction": 0.8,
        "learner": learners[learner],
        "metrics": ["mae", "mse"],
    }
