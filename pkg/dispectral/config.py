"""
Declarative TOML configuration of models and experiments.

A model file holds a [model] table:

    [model]
    kind = "pathwise"          # pathwise | two-block | custom-F
    r_blocks = 6
    n = 2496
    d = 2.0                    # or s = 8.15
    eta = 0.55

custom-F models give F (list of rows) and optionally proportions.

An experiment file adds the sweep, the methods and the outputs:

    methods = ["gmm", "svd"]
    runs_per_point = 20
    master_seed = 1

    [model]
    kind = "pathwise"
    r_blocks = 6
    n = 2500
    degrees = [2.0, 3.0]
    sweep = {start = 0.5, stop = 1.0, num = 10}

    [output]
    csv = "results.csv"
    summary = "summary.json"
"""

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dispectral.errors import ConfigError, ValidationError
from dispectral.presets import ModelKind, build_model, find_preset

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


EXPERIMENT_METHODS = ("gmm", "kmeans", "svd", "simpleherm")
MODEL_KEYS = {"kind", "r_blocks", "n", "s", "d", "eta", "F", "proportions"}
EXPERIMENT_MODEL_KEYS = {
    "kind",
    "r_blocks",
    "n",
    "sweep",
    "degrees",
    "s_values",
    "F",
    "proportions",
}
EXPERIMENT_KEYS = {"model", "methods", "runs_per_point", "master_seed", "output"}


def load_toml(file_path):
    try:
        with open(file_path, "rb") as file:
            return tomllib.load(file)
    except OSError as e:
        raise ConfigError(f"Cannot read config file {file_path}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{file_path}: {e}") from e


def _check_keys(table, allowed, where):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"Unknown keys in {where}: {', '.join(sorted(unknown))}.")


def _model_table(data, source):
    if "model" not in data or not isinstance(data["model"], dict):
        raise ConfigError(f"{source}: missing [model] table.")
    return data["model"]


def model_from_table(table, source="config", n=None):
    """Build an SbmModel from a [model] table; n overrides the table's n."""
    _check_keys(table, MODEL_KEYS, f"{source} [model]")
    try:
        kind = ModelKind(table.get("kind", "custom-F" if "F" in table else "pathwise"))
    except ValueError as e:
        raise ConfigError(f"{source}: {e}") from e
    size = n if n is not None else table.get("n")
    if size is None:
        raise ConfigError(f"{source}: [model] needs n.")
    try:
        return build_model(
            kind,
            n=int(size),
            r_blocks=int(table.get("r_blocks", 2)),
            s=table.get("s"),
            d=table.get("d"),
            eta=table.get("eta"),
            F=table.get("F"),
            proportions=table.get("proportions"),
        )
    except ValidationError as e:
        raise ConfigError(f"{source}: {e}") from e


def resolve_model(name_or_path, n=None):
    """A preset name (two-block, F1, F2, pathwise-k6-d2) or a model TOML file."""
    preset = find_preset(str(name_or_path))
    if preset is not None:
        return preset.build(n)
    path = Path(name_or_path)
    data = load_toml(path)
    return model_from_table(_model_table(data, path), source=str(path), n=n)


@dataclass(frozen=True)
class ExperimentModel:
    kind: ModelKind
    n: int
    r_blocks: int = 2
    sweep: tuple = ()
    degrees: tuple = ()
    s_values: tuple = ()
    F: tuple = None
    proportions: tuple = None


@dataclass(frozen=True)
class OutputPaths:
    csv: Path = Path("results.csv")
    summary: Path = Path("summary.json")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ExperimentModel
    methods: tuple = ("gmm",)
    runs_per_point: int = 20
    master_seed: int = 0
    output: OutputPaths = field(default_factory=OutputPaths)

    def validate(self):
        if self.runs_per_point < 1:
            raise ConfigError("runs_per_point must be at least 1.")
        if not self.methods:
            raise ConfigError("methods must not be empty.")
        unknown = set(self.methods) - set(EXPERIMENT_METHODS)
        if unknown:
            raise ConfigError(
                f"Unknown methods {', '.join(sorted(unknown))}; "
                f"expected a subset of {', '.join(EXPERIMENT_METHODS)}."
            )
        model = self.model
        if model.kind is ModelKind.CUSTOM_F:
            if model.F is None:
                raise ConfigError("A custom-F experiment needs F.")
            return
        if not model.sweep:
            raise ConfigError("The eta sweep is empty.")
        if any(not 0.5 <= eta <= 1 for eta in model.sweep):
            raise ConfigError("Every eta of the sweep must lie in [1/2, 1].")
        if bool(model.degrees) == bool(model.s_values):
            raise ConfigError("Give exactly one of degrees and s_values.")
        if model.kind is ModelKind.PATHWISE and model.r_blocks < 2:
            raise ConfigError("A pathwise experiment needs r_blocks >= 2.")


def _sweep(value):
    """{start, stop, num} (endpoints included) or an explicit list."""
    if value is None:
        return ()
    if isinstance(value, dict):
        _check_keys(value, {"start", "stop", "num"}, "[model] sweep")
        try:
            grid = np.linspace(value["start"], value["stop"], int(value["num"]))
            return tuple(float(eta) for eta in grid)
        except KeyError as e:
            raise ConfigError(f"sweep needs start, stop and num; missing {e}.") from e
    return tuple(float(eta) for eta in value)


def experiment_from_dict(data, source="config"):
    _check_keys(data, EXPERIMENT_KEYS, source)
    table = _model_table(data, source)
    _check_keys(table, EXPERIMENT_MODEL_KEYS, f"{source} [model]")
    try:
        kind = ModelKind(table.get("kind", "pathwise"))
    except ValueError as e:
        raise ConfigError(f"{source}: {e}") from e
    if "n" not in table:
        raise ConfigError(f"{source}: [model] needs n.")

    r_blocks = 2 if kind is ModelKind.TWO_BLOCK else int(table.get("r_blocks", 2))
    F = table.get("F")
    model = ExperimentModel(
        kind=kind,
        n=int(table["n"]),
        r_blocks=len(F) if F is not None else r_blocks,
        sweep=_sweep(table.get("sweep")),
        degrees=tuple(float(d) for d in table.get("degrees", ())),
        s_values=tuple(float(s) for s in table.get("s_values", ())),
        F=tuple(tuple(float(v) for v in row) for row in F) if F is not None else None,
        proportions=tuple(table["proportions"]) if "proportions" in table else None,
    )
    output = data.get("output", {})
    _check_keys(output, {"csv", "summary"}, f"{source} [output]")
    config = ExperimentConfig(
        model=model,
        methods=tuple(data.get("methods", ("gmm",))),
        runs_per_point=int(data.get("runs_per_point", 20)),
        master_seed=int(data.get("master_seed", 0)),
        output=OutputPaths(
            csv=Path(output.get("csv", "results.csv")),
            summary=Path(output.get("summary", "summary.json")),
        ),
    )
    config.validate()
    return config


def load_experiment(file_path):
    return experiment_from_dict(load_toml(file_path), source=str(file_path))
