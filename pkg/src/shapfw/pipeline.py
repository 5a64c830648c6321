"""Cluster -> weight -> transform -> recluster -> evaluate, plus the benchmark grid."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import weights as W
from .cluster import ALGORITHMS, NOISE, ClusterConfig, run_clustering
from .data import Dataset, apply_weights, load_dataset, normalize_weights, standardize
from .forest import ForestError, ForestParams, fit_forest
from .metrics import evaluate
from .shap import aggregate_to_weights, forest_shap

log = logging.getLogger(__name__)

STAGES = ("load", "initial_clustering", "weighting", "transform", "final_clustering", "evaluation")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class DatasetRef:
    path: str
    label_column: Optional[str] = "class"
    name: Optional[str] = None

    @property
    def display_name(self) -> str:
        return self.name or Path(self.path).stem


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetRef
    algorithm: str = "kmeans"
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    weighting: Optional[W.WeightMethodSpec] = None  # None = unweighted
    seed: int = 0
    forest: ForestParams = field(default_factory=ForestParams)
    iterations: int = 1
    k_from_labels: bool = False  # resolve k as the number of true classes

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")

    @property
    def weighting_name(self) -> str:
        return "unweighted" if self.weighting is None else self.weighting.name

    @property
    def key(self) -> tuple:
        return (self.dataset.display_name, self.algorithm, self.weighting_name, str(self.seed))

    def echo(self) -> dict:
        return {
            "dataset": asdict(self.dataset),
            "algorithm": self.algorithm,
            "cluster": asdict(self.cluster),
            "weighting": self.weighting_name,
            "weighting_params": None if self.weighting is None else _spec_params(self.weighting),
            "seed": self.seed,
            "forest": asdict(self.forest),
            "iterations": self.iterations,
        }


def _spec_params(spec: W.WeightMethodSpec) -> dict:
    return {"p": spec.p, "bins": spec.bins, "variance_threshold": spec.variance_threshold}


@dataclass
class RunReport:
    config: dict
    status: str = "ok"
    error: Optional[str] = None
    failed_stage: Optional[str] = None
    weight_vector: Optional[list] = None
    metrics: dict = field(default_factory=dict)
    initial_metrics: dict = field(default_factory=dict)
    labels_initial: Optional[list] = None
    labels_final: Optional[list] = None
    shap_local_accuracy: Optional[float] = None
    warnings: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def without_timings(self) -> dict:
        d = self.to_dict()
        d.pop("timings")
        return d


def prepare_dataset(ref: DatasetRef) -> Dataset:
    """Load and z-score a dataset; every clustering happens in this space."""
    raw = load_dataset(ref.path, ref.label_column, ref.display_name)
    return standardize(raw)[0]


def shap_weights(X, labels, params: ForestParams):
    """Fit the surrogate on non-noise rows and turn its attributions into weights.

    Returns ``(weights, max_local_accuracy_error)``.
    """
    labels = np.asarray(labels)
    keep = labels != NOISE
    forest = fit_forest(X[keep], labels[keep], params)
    tensor = forest_shap(forest, X[keep])
    err = tensor.max_local_accuracy_error(forest.predict_proba(X[keep]))
    return aggregate_to_weights(tensor), err


def method_weights(spec: W.WeightMethodSpec, X, labels):
    if spec.method == "lp":
        return W.lp_weights(X, labels, spec.p)
    if spec.method == "mrmr":
        return W.mrmr_weights(X, labels, spec.bins)
    if spec.method == "pca":
        return W.pca_weights(X, spec.variance_threshold)
    if spec.method == "ftest":
        return W.ftest_weights(X, labels)
    raise ValueError(f"method_weights does not handle {spec.method!r}")


def _cached(cache, key, fn):
    if cache is None:
        return fn()
    if key not in cache:
        cache[key] = fn()
    return cache[key]


def compute_weights(cfg: ExperimentConfig, X, labels, report: RunReport, cache=None, cache_key=()):
    spec = cfg.weighting
    parts = spec.parts if spec.method == "ensemble" else (spec,)
    vectors = []
    for part in parts:
        if part.method == "shap":
            forest_params = replace(cfg.forest, seed=cfg.seed)
            try:
                w, err = _cached(cache, cache_key + ("shap", forest_params),
                                 lambda: shap_weights(X, labels, forest_params))
            except ForestError as exc:
                msg = f"surrogate forest failed ({exc}); using uniform weights"
                log.warning(msg)
                report.warnings.append(msg)
                w, err = normalize_weights(np.zeros(X.shape[1])), None
            if err is not None:
                report.shap_local_accuracy = err
        else:
            w = _cached(cache, cache_key + (part.method, tuple(_spec_params(part).items())),
                        lambda part=part: method_weights(part, X, labels))
        vectors.append(np.asarray(w))
    return vectors[0] if len(vectors) == 1 else W.ensemble_weights(vectors)


def _stage(name, report, fn):
    t0 = time.perf_counter()
    try:
        return fn()
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        report.timings[name] = report.timings.get(name, 0.0) + time.perf_counter() - t0


def _clean_metrics(m: dict) -> dict:
    return {k: (None if v is None else float(v)) for k, v in m.items()}


def _resolve_cluster(cfg: ExperimentConfig, d: Dataset) -> ClusterConfig:
    ccfg = replace(cfg.cluster, seed=cfg.seed)
    if cfg.k_from_labels:
        # only the class count is read; the labels themselves never reach the clusterers
        if d.true_labels is None:
            raise StageError("load", ValueError("k is unset and the dataset has no labels"))
        ccfg = replace(ccfg, k=len(np.unique(d.true_labels)))
    return ccfg


def run_experiment(cfg: ExperimentConfig, dataset: Optional[Dataset] = None, cache=None) -> RunReport:
    """One weighting iteration (``cfg.iterations`` > 1 repeats it on the new labels).

    Raises ``StageError`` naming the failing stage.
    """
    report = RunReport(config=cfg.echo())
    d = dataset if dataset is not None else _stage("load", report, lambda: prepare_dataset(cfg.dataset))
    ccfg = _resolve_cluster(cfg, d)
    report.config["cluster"] = asdict(ccfg)
    X = d.features
    base_key = (d.name, cfg.algorithm, ccfg)

    y0 = _stage("initial_clustering", report,
                lambda: _cached(cache, base_key + ("Y0",), lambda: run_clustering(cfg.algorithm, X, ccfg)))
    report.labels_initial = y0.tolist()
    report.initial_metrics = _clean_metrics(
        _stage("evaluation", report, lambda: evaluate(X, y0, d.true_labels)))

    if cfg.weighting is None:
        report.labels_final = report.labels_initial
        report.metrics = dict(report.initial_metrics)
        return report

    labels, Xw, w = y0, X, None
    for it in range(cfg.iterations):
        key = base_key + (("iter", it),) if it else base_key
        w = _stage("weighting", report,
                   lambda: compute_weights(cfg, X, labels, report, cache if it == 0 else None, key))
        Xw = _stage("transform", report, lambda: apply_weights(d, w).features)
        labels = _stage("final_clustering", report, lambda: run_clustering(cfg.algorithm, Xw, ccfg))
    report.weight_vector = [float(v) for v in w]
    report.labels_final = labels.tolist()
    report.metrics = _clean_metrics(_stage("evaluation", report, lambda: evaluate(Xw, labels, d.true_labels)))
    return report


def experiment_weights(cfg: ExperimentConfig, dataset: Optional[Dataset] = None) -> np.ndarray:
    """Only the weight vector W of the first iteration (clusters once, no recluster)."""
    if cfg.weighting is None:
        raise ValueError("an unweighted config has no weight vector")
    report = RunReport(config=cfg.echo())
    d = dataset if dataset is not None else _stage("load", report, lambda: prepare_dataset(cfg.dataset))
    ccfg = _resolve_cluster(cfg, d)
    y0 = _stage("initial_clustering", report, lambda: run_clustering(cfg.algorithm, d.features, ccfg))
    return _stage("weighting", report, lambda: compute_weights(cfg, d.features, y0, report))


# --- benchmark grid -------------------------------------------------------

CSV_FIELDS = [
    "dataset", "algorithm", "weighting", "seed", "status",
    "ari", "silhouette", "nmi", "ch",
    "ari_0", "silhouette_0", "nmi_0", "ch_0",
    "shap_local_accuracy", "error",
]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return repr(v) if isinstance(v, float) else str(v)


def report_row(cfg: ExperimentConfig, report: RunReport) -> dict:
    row = dict(zip(("dataset", "algorithm", "weighting", "seed"), cfg.key))
    row["status"] = report.status
    for name in ("ari", "silhouette", "nmi", "ch"):
        row[name] = _fmt(report.metrics.get(name))
        row[name + "_0"] = _fmt(report.initial_metrics.get(name))
    row["shap_local_accuracy"] = _fmt(report.shap_local_accuracy)
    row["error"] = report.error or ""
    return row


def _safe_run(cfg, dataset, cache) -> RunReport:
    try:
        return run_experiment(cfg, dataset, cache)
    except StageError as exc:
        log.error("%s: %s", cfg.key, exc)
        return RunReport(config=cfg.echo(), status="failed", error=str(exc), failed_stage=exc.stage)


def _run_group(cfgs):
    """Configs sharing (dataset, algorithm, seed) reuse the dataset, Y0 and SHAP weights."""
    cache: dict = {}
    try:
        dataset = prepare_dataset(cfgs[0].dataset)
    except Exception as exc:
        err = StageError("load", exc)
        return [RunReport(config=c.echo(), status="failed", error=str(err), failed_stage="load") for c in cfgs]
    return [_safe_run(c, dataset, cache) for c in cfgs]


def _read_existing(csv_path: Path, json_path: Path):
    rows, reports = {}, {}
    if csv_path.exists():
        with open(csv_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                rows[(row["dataset"], row["algorithm"], row["weighting"], row["seed"])] = row
    if json_path.exists():
        for entry in json.loads(json_path.read_text(encoding="utf-8")):
            reports[tuple(entry["key"])] = entry["report"]
    return rows, reports


def run_benchmark(suite, out=None, jobs: int = 1, progress=None):
    """Run every config once; rows already present in ``out`` (CSV) are reused.

    Writes ``out`` and a JSON companion (same stem) with the full reports.
    Returns ``(rows, reports, n_executed)`` keyed and ordered like the suite.
    """
    suite = list(suite)
    keys = [c.key for c in suite]
    if len(set(keys)) != len(keys):
        raise ValueError("suite contains duplicate (dataset, algorithm, weighting, seed) keys")
    csv_path = Path(out) if out is not None else None
    json_path = csv_path.with_suffix(".json") if csv_path is not None else None
    rows, reports = _read_existing(csv_path, json_path) if csv_path is not None else ({}, {})

    todo = [c for c in suite if c.key not in rows]
    groups: dict = {}
    for c in todo:
        groups.setdefault((c.dataset, c.algorithm, c.seed, c.cluster, c.k_from_labels), []).append(c)
    group_list = list(groups.values())

    def consume(cfgs, results):
        for c, rep in zip(cfgs, results):
            rows[c.key] = report_row(c, rep)
            reports[c.key] = rep.to_dict()
            if progress:
                progress(c, rep)
        if csv_path is not None:
            _write_outputs(suite, rows, reports, csv_path, json_path)

    if jobs > 1 and len(group_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for cfgs, results in zip(group_list, pool.map(_run_group, group_list)):
                consume(cfgs, results)
    else:
        for cfgs in group_list:
            consume(cfgs, _run_group(cfgs))
    if csv_path is not None:
        _write_outputs(suite, rows, reports, csv_path, json_path)
    ordered_rows = [rows[k] for k in keys]
    ordered_reports = [reports.get(k) for k in keys]
    return ordered_rows, ordered_reports, len(todo)


def _write_outputs(suite, rows, reports, csv_path: Path, json_path: Path):
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    done = [c.key for c in suite if c.key in rows]
    tmp = csv_path.with_suffix(csv_path.suffix + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for k in done:
            writer.writerow({f: rows[k].get(f, "") for f in CSV_FIELDS})
    tmp.replace(csv_path)
    payload = [{"key": list(k), "report": reports.get(k)} for k in done]
    tmp = json_path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(payload, default=_json_default), encoding="utf-8")
    tmp.replace(json_path)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
