"""Flat typed key-value experiment configuration.

The on-disk format is one ``key = value`` pair per line with dotted section
keys; ``#`` starts a comment line and blank lines are ignored. Every key has
a declared type, and parse errors name the offending key and line. The
resolved configuration hashes independently of key order, comments, and the
non-semantic keys (output directory, parallelism degree).
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

from .errors import ConfigurationError
from .evolution import EvolutionConfig
from .nn import TrainConfig

from . import data as data_mod
from .seeding import derive_seed

SEED_ENV_VAR = "NE_SGD_SEED"

DATASET_KINDS = ("two_moons", "blobs", "idx")

# keys that may change without changing any computed result
NON_SEMANTIC_KEYS = ("output.dir", "parallelism")


@dataclass(frozen=True)
class _Key:
    kind: str  # int | float | bool | str | points
    required: bool = False
    default: object = None


SCHEMA: dict[str, _Key] = {
    "seed": _Key("int", required=True),
    "output.dir": _Key("str", default="runs"),
    "parallelism": _Key("int", default=1),
    "dataset.kind": _Key("str", required=True),
    "dataset.n_samples": _Key("int", default=400),
    "dataset.noise_sigma": _Key("float", default=0.25),
    "dataset.centers": _Key("points", default=((-2.0, -2.0), (2.0, 2.0))),
    "dataset.sigma": _Key("float", default=0.5),
    "dataset.images": _Key("str", default=""),
    "dataset.labels": _Key("str", default=""),
    "dataset.split.train": _Key("float", default=0.6),
    "dataset.split.validation": _Key("float", default=0.2),
    "dataset.split.test": _Key("float", default=0.2),
    "dataset.normalize": _Key("bool", default=True),
    "architecture": _Key("str", required=True),
    "train.epochs_alpha": _Key("int", default=200),
    "train.epochs_beta": _Key("int", default=50),
    "train.batch_size": _Key("int", default=32),
    "train.lr_retained": _Key("float", required=True),
    "train.lr_reinit": _Key("float", required=True),
    "train.weight_decay": _Key("float", default=5e-4),
    "train.momentum": _Key("float", default=0.9),
    "evolution.population_size": _Key("int", default=5),
    "evolution.generations": _Key("int", default=10),
    "evolution.crossover_probability": _Key("float", default=0.9),
    "evolution.mutation_probability": _Key("float", default=0.1),
    "evolution.elitism": _Key("bool", default=True),
    "evolution.suppression": _Key("bool", default=True),
    "baseline.repeats": _Key("int", default=20),
}


@dataclass
class DatasetSpec:
    kind: str
    n_samples: int
    noise_sigma: float
    centers: tuple
    sigma: float
    images: str
    labels: str
    fractions: tuple[float, float, float]
    normalize: bool


@dataclass
class ExperimentConfig:
    seed: int
    architecture: tuple[int, ...]
    dataset: DatasetSpec
    train: TrainConfig
    evolution: EvolutionConfig
    output_dir: str
    parallelism: int
    baseline_repeats: int
    resolved: dict[str, str]  # canonical strings per key, for hashing


def parse_config_text(text: str) -> dict[str, "tuple[str, int]"]:
    """Raw key -> (value, line number) pairs."""
    pairs: dict[str, tuple[str, int]] = {}
    for lineno, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigurationError(f"line {lineno}: empty key")
        if key in pairs:
            raise ConfigurationError(
                f"line {lineno}: duplicate key {key!r} (first at line {pairs[key][1]})"
            )
        pairs[key] = (value, lineno)
    return pairs


def _convert(key: str, value: str, lineno: int, kind: str):
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "bool":
            lowered = value.lower()
            if lowered in ("true", "false"):
                return lowered == "true"
            raise ValueError(value)
        if kind == "str":
            return value
        if kind == "points":
            points = []
            for chunk in value.split(";"):
                coords = tuple(float(c) for c in chunk.split(","))
                if len(coords) < 1:
                    raise ValueError(chunk)
                points.append(coords)
            return tuple(points)
    except ValueError:
        raise ConfigurationError(
            f"line {lineno}: key {key!r} expects a {kind}, got {value!r}"
        ) from None
    raise ConfigurationError(f"unknown schema kind {kind!r} for key {key!r}")


def _canonical(kind: str, value) -> str:
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return repr(float(value))
    if kind == "points":
        return ";".join(",".join(repr(float(c)) for c in p) for p in value)
    return str(value)


def parse_architecture(text: str) -> tuple[int, ...]:
    try:
        widths = tuple(int(w) for w in text.split("-"))
    except ValueError:
        raise ConfigurationError(
            f"architecture must look like '2-32-32-2', got {text!r}"
        ) from None
    return widths


def resolve_config(pairs: dict[str, "tuple[str, int]"], env=None) -> ExperimentConfig:
    env = os.environ if env is None else env
    for key, (_, lineno) in pairs.items():
        if key not in SCHEMA:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")

    typed: dict[str, object] = {}
    for key, spec in SCHEMA.items():
        if key in pairs:
            value, lineno = pairs[key]
            typed[key] = _convert(key, value, lineno, spec.kind)
        elif spec.required:
            raise ConfigurationError(f"missing required key {key!r}")
        else:
            typed[key] = spec.default

    if SEED_ENV_VAR in env:
        try:
            typed["seed"] = int(env[SEED_ENV_VAR])
        except ValueError:
            raise ConfigurationError(
                f"environment variable {SEED_ENV_VAR} must be an integer, "
                f"got {env[SEED_ENV_VAR]!r}"
            ) from None

    kind = typed["dataset.kind"]
    if kind not in DATASET_KINDS:
        raise ConfigurationError(
            f"dataset.kind must be one of {DATASET_KINDS}, got {kind!r}"
        )
    if kind == "idx":
        for key in ("dataset.images", "dataset.labels"):
            if not typed[key]:
                raise ConfigurationError(f"dataset.kind = idx requires key {key!r}")

    fractions = (
        typed["dataset.split.train"],
        typed["dataset.split.validation"],
        typed["dataset.split.test"],
    )
    if any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(
            f"dataset.split.* must be positive and sum to 1, got {fractions}"
        )

    architecture = parse_architecture(typed["architecture"])
    seed = typed["seed"]

    train = TrainConfig(
        epochs_alpha=typed["train.epochs_alpha"],
        epochs_beta=typed["train.epochs_beta"],
        batch_size=typed["train.batch_size"],
        lr_retained=typed["train.lr_retained"],
        lr_reinit=typed["train.lr_reinit"],
        weight_decay=typed["train.weight_decay"],
        momentum=typed["train.momentum"],
        seed=seed,
    )
    evolution = EvolutionConfig(
        population_size=typed["evolution.population_size"],
        max_generations=typed["evolution.generations"],
        crossover_probability=typed["evolution.crossover_probability"],
        mutation_probability=typed["evolution.mutation_probability"],
        train=train,
        seed=seed,
        elitism=typed["evolution.elitism"],
        suppression_enabled=typed["evolution.suppression"],
    )
    if typed["baseline.repeats"] < 1:
        raise ConfigurationError("baseline.repeats must be >= 1")

    resolved = {key: _canonical(SCHEMA[key].kind, typed[key]) for key in SCHEMA}
    resolved["seed"] = str(typed["seed"])  # after any env override

    return ExperimentConfig(
        seed=seed,
        architecture=architecture,
        dataset=DatasetSpec(
            kind=kind,
            n_samples=typed["dataset.n_samples"],
            noise_sigma=typed["dataset.noise_sigma"],
            centers=typed["dataset.centers"],
            sigma=typed["dataset.sigma"],
            images=typed["dataset.images"],
            labels=typed["dataset.labels"],
            fractions=fractions,
            normalize=typed["dataset.normalize"],
        ),
        train=train,
        evolution=evolution,
        output_dir=typed["output.dir"],
        parallelism=typed["parallelism"],
        baseline_repeats=typed["baseline.repeats"],
        resolved=resolved,
    )


def load_experiment_config(path, env=None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return resolve_config(parse_config_text(fh.read()), env=env)


def config_hash(config: ExperimentConfig) -> str:
    """sha256 over sorted semantic key=value lines; key order never matters."""
    lines = [
        f"{key}={value}"
        for key, value in sorted(config.resolved.items())
        if key not in NON_SEMANTIC_KEYS
    ]
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def build_dataset(config: ExperimentConfig) -> data_mod.Dataset:
    """Generate or load the dataset, then split (and optionally normalize).

    Generation and split seeds derive from the master seed, so a new master
    seed redraws the data as well as the weights.
    """
    spec = config.dataset
    data_seed = derive_seed(config.seed, 0, 0, "dataset")
    if spec.kind == "two_moons":
        dataset = data_mod.generate_two_moons(spec.n_samples, spec.noise_sigma, data_seed)
    elif spec.kind == "blobs":
        dataset = data_mod.generate_blobs(spec.n_samples, list(spec.centers), spec.sigma, data_seed)
    else:
        dataset = data_mod.load_idx(spec.images, spec.labels)
    dataset = data_mod.split(dataset, spec.fractions, derive_seed(config.seed, 0, 0, "split"))
    if spec.normalize:
        dataset = data_mod.normalize(dataset)
    return dataset
