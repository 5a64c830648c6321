"""YAML experiment and suite files.

An experiment file mirrors ``ExperimentConfig``::

    dataset: {path: ../data/iris.csv, label_column: class}
    algorithm: kmeans
    cluster: {k: 3}          # k omitted -> number of true classes
    weighting: shap*lp       # or "unweighted", or {method: lp, p: 3}
    seed: 0
    forest: {n_trees: 100}

A suite file lists ``datasets``, ``algorithms``, ``weightings`` and ``seeds``;
their product is expanded into one experiment per row. Shared ``cluster`` and
``forest`` blocks apply to all rows; a dataset entry may override ``cluster``.
Relative dataset paths resolve against the config file's directory.
"""
from __future__ import annotations

from dataclasses import fields
from pathlib import Path
from typing import Optional

import yaml

from .cluster import ALGORITHMS, ClusterConfig
from .forest import ForestParams
from .pipeline import DatasetRef, ExperimentConfig
from .weights import WeightMethodSpec


class ConfigError(ValueError):
    pass


def _read(path) -> dict:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def _strict(cls, values: Optional[dict], what: str, drop=()):
    values = dict(values or {})
    allowed = {f.name for f in fields(cls)} - set(drop)
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from exc


def parse_weighting(value) -> Optional[WeightMethodSpec]:
    if value is None or value == "unweighted":
        return None
    if isinstance(value, str):
        try:
            return WeightMethodSpec.parse(value)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if isinstance(value, dict):
        value = dict(value)
        method = value.pop("method", None)
        if not isinstance(method, str):
            raise ConfigError("weighting mapping needs a 'method' string")
        unknown = set(value) - {"p", "bins", "variance_threshold"}
        if unknown:
            raise ConfigError(f"unknown weighting keys: {sorted(unknown)}")
        try:
            return WeightMethodSpec.parse(method, **value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"cannot interpret weighting {value!r}")


def parse_dataset(value, base: Optional[Path]) -> DatasetRef:
    if isinstance(value, str):
        value = {"path": value}
    if not isinstance(value, dict) or "path" not in value:
        raise ConfigError("dataset needs a 'path'")
    value = dict(value)
    path = Path(value["path"])
    if not path.is_absolute() and base is not None:
        path = base / path
    value["path"] = str(path)
    return _strict(DatasetRef, value, "dataset")


def _check_algorithm(name):
    if name not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {name!r}; choose from {list(ALGORITHMS)}")
    return name


def _seed(value) -> int:
    if not isinstance(value, int) or value < 0 or value >= 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {value!r}")
    return value


def _experiment(dataset: DatasetRef, algorithm, cluster: dict, weighting, seed, forest: dict,
                iterations) -> ExperimentConfig:
    cluster = dict(cluster or {})
    k_missing = "k" not in cluster
    ccfg = _strict(ClusterConfig, cluster, "cluster", drop=("seed",))
    return ExperimentConfig(
        dataset=dataset,
        algorithm=_check_algorithm(algorithm),
        cluster=ccfg,
        weighting=parse_weighting(weighting),
        seed=_seed(seed),
        forest=_strict(ForestParams, forest, "forest", drop=("seed",)),
        iterations=iterations,
        k_from_labels=k_missing,
    )


EXPERIMENT_KEYS = {"dataset", "algorithm", "cluster", "weighting", "seed", "forest", "iterations"}
SUITE_KEYS = {"datasets", "algorithms", "weightings", "seeds", "cluster", "forest", "iterations"}


def experiment_from_dict(d: dict, base: Optional[Path] = None) -> ExperimentConfig:
    unknown = set(d) - EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
    if "dataset" not in d:
        raise ConfigError("experiment needs a 'dataset'")
    return _experiment(parse_dataset(d["dataset"], base), d.get("algorithm", "kmeans"),
                       d.get("cluster"), d.get("weighting"), d.get("seed", 0), d.get("forest"),
                       d.get("iterations", 1))


def load_experiment(path) -> ExperimentConfig:
    return experiment_from_dict(_read(path), Path(path).resolve().parent)


def suite_from_dict(d: dict, base: Optional[Path] = None) -> list:
    unknown = set(d) - SUITE_KEYS
    if unknown:
        raise ConfigError(f"unknown suite keys: {sorted(unknown)}")
    suite = []
    for entry in d.get("datasets") or []:
        entry = {"path": entry} if isinstance(entry, str) else dict(entry)
        cluster = {**(d.get("cluster") or {}), **(entry.pop("cluster", None) or {})}
        ref = parse_dataset(entry, base)
        for algorithm in d.get("algorithms") or list(ALGORITHMS):
            for weighting in d.get("weightings") or ["unweighted"]:
                for seed in d.get("seeds") or [0]:
                    suite.append(_experiment(ref, algorithm, cluster, weighting, seed,
                                             d.get("forest"), d.get("iterations", 1)))
    return suite


def load_suite(path) -> list:
    return suite_from_dict(_read(path), Path(path).resolve().parent)
