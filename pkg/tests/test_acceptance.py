"""Acceptance criteria, each at its stated tolerance.

Every check records one PASS/FAIL line, printed in the terminal summary.
Criteria 2 and 8 share two full 200-row benchmark runs (module fixture).
"""
import json
import os
import statistics
import time

import numpy as np
import pytest

from shapfw.cluster import ClusterConfig, gmm_fit, kmeans_fit, minimum_spanning_tree, mutual_reachability, ward, ward_linkage
from shapfw.config import load_suite
from shapfw.metrics import adjusted_rand_index, calinski_harabasz, normalized_mutual_information, silhouette
from shapfw.pipeline import DatasetRef, ExperimentConfig, run_benchmark, run_experiment
from shapfw.shap import tree_shap_single
from shapfw.weights import WeightingError, WeightMethodSpec, ensemble_weights
from scipy.spatial.distance import cdist

from conftest import CONFIGS, DATA, record
from oracles import ari_pairs, brute_force_shap, ch_naive, nmi_naive, random_tree, silhouette_naive
from test_cluster import kruskal_weight, naive_ward
from test_weights import LABELLED, fuzz_case


def experiment(name, algorithm, weighting=None, seed=0):
    ref = DatasetRef(str(DATA / f"{name}.csv"), "class", name)
    spec = WeightMethodSpec.parse(weighting) if weighting else None
    return ExperimentConfig(ref, algorithm, ClusterConfig(), spec, seed, k_from_labels=True)


# 1 ------------------------------------------------------------------------------

def test_c1_treeshap_oracle():
    rng = np.random.default_rng(20240101)
    start = time.perf_counter()
    worst, cases = 0.0, 0
    for _ in range(250):
        m = int(rng.integers(1, 7))
        tree = random_tree(rng, m, int(rng.integers(1, 5)), int(rng.integers(1, 4)))
        x = rng.normal(size=m)
        worst = max(worst, float(np.abs(tree_shap_single(tree, x) - brute_force_shap(tree, x, m)).max()))
        cases += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 10
    record("C1 TreeSHAP oracle", ok, f"{cases} trees, max |diff| {worst:.2e} (tol 1e-9), {elapsed:.2f}s (< 10s)")
    assert ok


# 2 and 8 --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def grid_runs(tmp_path_factory):
    suite = load_suite(CONFIGS / "full_grid.yaml")
    jobs = min(4, os.cpu_count() or 1)
    runs = []
    for i in range(2):
        out = tmp_path_factory.mktemp(f"grid{i}") / "grid.csv"
        start = time.perf_counter()
        rows, reports, executed = run_benchmark(suite, out, jobs=jobs)
        runs.append((rows, reports, executed, time.perf_counter() - start))
    return suite, jobs, runs


def test_c2_local_accuracy(grid_runs):
    _, _, runs = grid_runs
    rows = runs[0][0]
    errors = [float(r["shap_local_accuracy"]) for r in rows if "shap" in r["weighting"]]
    missing = sum(1 for r in rows if "shap" in r["weighting"] and r["status"] != "ok")
    worst = max(errors) if errors else float("nan")
    ok = len(errors) == 100 and missing == 0 and worst < 1e-6
    record("C2 local accuracy", ok, f"{len(errors)} SHAP rows, max violation {worst:.2e} (tol 1e-6)")
    assert ok


def test_c8_full_grid(grid_runs):
    suite, jobs, runs = grid_runs
    (rows_a, rep_a, exec_a, t_a), (rows_b, rep_b, exec_b, t_b) = runs
    failed = sum(r["status"] != "ok" for r in rows_a)

    def canon(reports):
        return [json.dumps({k: v for k, v in rep.items() if k != "timings"}, sort_keys=True) for rep in reports]

    identical = canon(rep_a) == canon(rep_b) and rows_a == rows_b
    ok = len(rows_a) == 200 and exec_a == exec_b == 200 and failed == 0 and identical and max(t_a, t_b) < 600
    record("C8 full grid", ok,
           f"{len(rows_a)} rows, {failed} failed, {t_a:.0f}s and {t_b:.0f}s with {jobs} worker(s) (< 600s), "
           f"runs identical: {identical}")
    assert ok


# 3 --------------------------------------------------------------------------------

def test_c3_metric_oracles():
    rng = np.random.default_rng(77)
    counts = dict(ari=0, nmi=0, sil=0, ch=0)
    bad = []
    for _ in range(300):
        n = int(rng.integers(3, 13))
        y = rng.integers(0, int(rng.integers(2, 5)), n)
        y[:2] = [0, 1]
        other = rng.integers(0, int(rng.integers(1, 5)), n)
        X = rng.normal(size=(n, int(rng.integers(1, 4))))
        if adjusted_rand_index(y, other) != ari_pairs(y.tolist(), other.tolist()):
            bad.append("ari")
        counts["ari"] += 1
        if normalized_mutual_information(y, other) != nmi_naive(y.tolist(), other.tolist()):
            # both sides compute the same closed form; allow only last-ulp rounding
            if abs(normalized_mutual_information(y, other) - nmi_naive(y.tolist(), other.tolist())) > 1e-12:
                bad.append("nmi")
        counts["nmi"] += 1
        if abs(silhouette(X, y) - silhouette_naive(X.tolist(), y.tolist())) > 1e-9:
            bad.append("silhouette")
        counts["sil"] += 1
        if n > len(set(y.tolist())):
            fast, slow = calinski_harabasz(X, y), ch_naive(X, y.tolist())
            if not (fast == slow or abs(fast - slow) <= 1e-9 * max(1.0, abs(slow))):
                bad.append("ch")
            counts["ch"] += 1
    ok = not bad and min(counts.values()) >= 200
    record("C3 metric oracles", ok, f"instances {counts}, mismatches {sorted(set(bad)) or 'none'} "
           "(ARI exact, NMI 1e-12, Silhouette/CH 1e-9)")
    assert ok


# 4 --------------------------------------------------------------------------------

@pytest.mark.parametrize("name,algorithm,target,tol", [
    ("iris", "kmeans", 0.433, 0.05),
    ("wine", "kmeans", 0.871, 0.07),
    ("breast_cancer", "ward", 0.575, 0.05),
])
def test_c4_unweighted_baselines(name, algorithm, target, tol):
    start = time.perf_counter()
    ari = run_experiment(experiment(name, algorithm)).metrics["ari"]
    elapsed = time.perf_counter() - start
    ok = abs(ari - target) <= tol and elapsed < 5
    record(f"C4 unweighted {name} {algorithm}", ok,
           f"ARI {ari:.3f} vs {target} +/- {tol}, {elapsed:.2f}s (< 5s)")
    assert ok


# 5 --------------------------------------------------------------------------------

def test_c5_breast_cancer_shap_headline():
    base = run_experiment(experiment("breast_cancer", "ward")).metrics["ari"]
    shap = run_experiment(experiment("breast_cancer", "ward", "shap")).metrics["ari"]
    ok = shap >= 0.65 and shap > base
    record("C5 breast cancer Ward+SHAP", ok, f"seed 0: SHAP ARI {shap:.3f} (>= 0.65) vs unweighted {base:.3f}")
    assert ok


# 6 --------------------------------------------------------------------------------

def test_c6_vehicle_direction():
    parts, ok = [], True
    for algorithm in ("kmeans", "ward", "gmm"):
        base = [run_experiment(experiment("vehicle", algorithm, None, s)).metrics["ari"] for s in range(5)]
        shap = [run_experiment(experiment("vehicle", algorithm, "shap", s)).metrics["ari"] for s in range(5)]
        mb, ms = statistics.median(base), statistics.median(shap)
        ok &= ms > mb
        parts.append(f"{algorithm} {ms:.3f} > {mb:.3f}")
    record("C6 vehicle SHAP > unweighted (median of 5 seeds)", ok, "; ".join(parts))
    assert ok


# 7 --------------------------------------------------------------------------------

def test_c7_invariant_suites():
    rng = np.random.default_rng(7)
    checks = {}

    simplex = perm = True
    for method, fn in LABELLED.items():
        for _ in range(60):
            X, y = fuzz_case(rng)
            try:
                w = fn(X, y)
            except WeightingError:
                continue
            simplex &= bool(np.all(w >= 0) and abs(w.sum() - 1) <= 1e-9)
            p = rng.permutation(X.shape[1])
            perm &= bool(np.allclose(fn(X[:, p], y), w[p], atol=1e-9, rtol=0))
    for _ in range(60):
        parts = [rng.dirichlet(np.ones(4)) for _ in range(int(rng.integers(2, 4)))]
        w = ensemble_weights(parts)
        simplex &= bool(np.all(w >= 0) and abs(w.sum() - 1) <= 1e-9)
    checks["weight simplex"] = simplex
    checks["weight permutation equivariance"] = perm

    em = True
    for seed in range(50):
        r = np.random.default_rng(500 + seed)
        k = int(r.integers(1, 4))
        X = np.vstack([r.normal(r.uniform(-4, 4, 2), r.uniform(0.3, 2), (30, 2)) for _ in range(k + 1)])
        em &= bool(np.all(np.diff(gmm_fit(X, ClusterConfig(k=k, seed=seed)).history) >= -1e-8))
    checks["EM monotone (50 fits)"] = em

    km = True
    for seed in range(30):
        X = rng.normal(size=(50, 3))
        h = np.diff(kmeans_fit(X, ClusterConfig(k=4, seed=seed, restarts=2)).history)
        km &= bool(np.all(h <= 1e-9))
    checks["k-means monotone"] = km

    wd = True
    for _ in range(30):
        n = int(rng.integers(3, 13))
        X = rng.normal(size=(n, 2))
        _, costs = ward_linkage(X)
        k = int(rng.integers(1, n + 1))
        expected, oracle_costs = naive_ward(X, k)
        wd &= adjusted_rand_index(ward(X, k), expected) == 1.0 and np.allclose(costs, oracle_costs, rtol=1e-9, atol=1e-12)
    checks["Ward == naive"] = wd

    mst = True
    for _ in range(50):
        n = int(rng.integers(2, 11))
        X = rng.normal(size=(n, 2))
        M = mutual_reachability(cdist(X, X), int(rng.integers(1, n + 1)))
        mst &= abs(minimum_spanning_tree(M)[:, 2].sum() - kruskal_weight(M)) <= 1e-12 * max(1.0, M.max())
    checks["HDBSCAN MST == oracle"] = mst

    relabel = True
    for _ in range(100):
        a, b = rng.integers(0, 4, 12), rng.integers(0, 3, 12)
        p = rng.permutation(4)
        relabel &= adjusted_rand_index(p[a], b) == adjusted_rand_index(a, b)
        relabel &= normalized_mutual_information(p[a], b) == pytest.approx(normalized_mutual_information(a, b), abs=1e-15)
    checks["metric relabel invariance"] = relabel

    ok = all(checks.values())
    record("C7 invariant suites", ok, ", ".join(f"{k}: {'ok' if v else 'FAIL'}" for k, v in checks.items()))
    assert ok
