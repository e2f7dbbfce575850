"""Acceptance suite: one test per release criterion, each printing a verdict.

Every criterion is checked at its stated tolerance and time budget against
independent references (dense linear algebra, brute-force metric
enumeration, finite differences).  Criterion 4 encodes a rank-truncation
error bound in the Frobenius norm that is mathematically unattainable at
the default propagation strength: the exact operator has all ``|E|``
eigenvalues at least ``1 - alpha``, so every rank-k approximation carries a
Frobenius error of at least ``(1 - alpha) * sqrt(|E| - k)``, which exceeds
the asserted bound.  The test states the bound faithfully and is expected
to stay red; the true spectral-norm counterpart passes in
``test_propagation.py``.
"""

import json
import time

import numpy as np
import pytest

from edgeprop.cli import EXIT_OK, main
from edgeprop.graph import (
    build_incidence,
    combined_incidence,
    normalized_incidence,
    transition_dense,
    transition_matvec,
    transition_u,
    transition_v,
)
from edgeprop.io import save_bundle
from edgeprop.metrics import average_precision, evaluate_scores, make_split, roc_auc
from edgeprop.propagation import build_factor, objective_value, propagate
from edgeprop.sparse import (
    dense_inverse_solve,
    power_iteration_solve,
    truncated_series,
    truncated_svd,
)
from edgeprop.spectral import variance_contraction
from edgeprop.synth import synthetic_graph
from edgeprop.training import (
    TrainConfig,
    build_propagators,
    init_params,
    loss_and_grads,
    predict_graph,
    train,
    training_loss,
)

from conftest import random_bipartite

VERDICT = "[acceptance] criterion {n:>2} ({name}): {verdict}  ({elapsed:.2f}s)"


def report(n: int, name: str, started: float, ok: bool, budget: float) -> None:
    elapsed = time.time() - started
    verdict = "PASS" if ok and elapsed < budget else "FAIL"
    print(VERDICT.format(n=n, name=name, verdict=verdict, elapsed=elapsed))
    assert ok, f"criterion {n} ({name}) failed"
    assert elapsed < budget, f"criterion {n} exceeded {budget}s budget"


def random_graph_suite(count: int, max_edges: int, seed: int):
    rng = np.random.default_rng(seed)
    for i in range(count):
        num_u = int(rng.integers(2, 12))
        num_v = int(rng.integers(2, 12))
        m = int(rng.integers(max(num_u, num_v), max_edges + 1))
        yield random_bipartite(num_u, num_v, m, seed=seed + 1000 + i)


def test_criterion_01_double_stochasticity():
    started = time.time()
    ok = True
    for g in random_graph_suite(50, 200, seed=100):
        inc = build_incidence(g)
        pu = transition_u(inc).to_dense()
        pv = transition_v(inc).to_dense()
        for beta in (0.0, 0.5, 1.0):
            p = beta * pu + (1.0 - beta) * pv
            ok &= bool(np.abs(p.sum(axis=0) - 1.0).max() <= 1e-10)
            ok &= bool(np.abs(p.sum(axis=1) - 1.0).max() <= 1e-10)
    report(1, "transition matrices doubly stochastic", started, ok, 5.0)


def test_criterion_02_spectrum_bounded_by_one():
    started = time.time()
    ok = True
    for g in random_graph_suite(50, 200, seed=200):
        inc = build_incidence(g)
        for view, beta in (("combined", 0.5), ("u", None), ("v", None)):
            b = normalized_incidence(inc, view, beta)
            dense_top = np.linalg.svd(b.to_dense(), compute_uv=False)[0]
            ok &= bool(dense_top <= 1.0 + 1e-8)
            rand_top = truncated_svd(b, 1, seed=0).sigma[0]
            ok &= bool(rand_top <= 1.0 + 1e-8)
    report(2, "normalized incidence spectrum <= 1", started, ok, 5.0)


def _exactness_run() -> list[np.ndarray]:
    """Factorized propagation at full rank for three views and alphas."""
    outputs = []
    g = random_bipartite(14, 11, 64, seed=300)
    inc = build_incidence(g)
    h = np.random.default_rng(301).standard_normal((64, 8))
    for alpha in (0.1, 0.5, 0.9):
        for view, beta in (("combined", 0.5), ("u", None), ("v", None)):
            factor = build_factor(inc, alpha, view=view, k=64, seed=302, beta=beta)
            outputs.append(propagate(factor, h).matrix)
    return outputs


def test_criterion_03_full_rank_exactness():
    started = time.time()
    g = random_bipartite(14, 11, 64, seed=300)
    inc = build_incidence(g)
    h = np.random.default_rng(301).standard_normal((64, 8))
    ok = True
    outputs = iter(_exactness_run())
    for alpha in (0.1, 0.5, 0.9):
        for view, beta in (("combined", 0.5), ("u", None), ("v", None)):
            expected = dense_inverse_solve(
                transition_dense(inc, view, beta), alpha, h
            )
            err = np.linalg.norm(next(outputs) - expected)
            ok &= bool(err <= 1e-8)
    report(3, "full-rank factorization reproduces closed form", started, ok, 10.0)


def test_criterion_04_truncation_error_frobenius_bound():
    # Stated in the Frobenius norm; see the module docstring for why this
    # cannot hold at alpha = 0.5 and is expected to stay red.
    started = time.time()
    alpha = 0.5
    ok = True
    worst = 0.0
    for i in range(20):
        g = random_bipartite(12 + (i % 5), 9 + (i % 4), 64, seed=400 + i)
        inc = build_incidence(g)
        exact = dense_inverse_solve(
            transition_dense(inc, "combined", 0.5), alpha, np.eye(64)
        )
        dsig = np.linalg.svd(combined_incidence(inc, 0.5).to_dense(),
                             compute_uv=False)
        for k in (4, 8, 16):
            factor = build_factor(inc, alpha, view="combined", k=k,
                                  seed=401, beta=0.5)
            approx = (1.0 - alpha) * (factor.factor @ factor.factor.T)
            err = np.linalg.norm(approx - exact)
            bound = 1.0 / (1.0 - alpha * min(dsig[k - 1], 1.0) ** 2)
            worst = max(worst, err - bound)
            ok &= bool(err <= bound + 1e-6)
    print(f"[acceptance]   worst Frobenius excess over bound: {worst:.4f}")
    report(4, "truncation error within Frobenius bound", started, ok, 10.0)


def test_criterion_05_three_solvers_agree():
    started = time.time()
    ok = True
    rng = np.random.default_rng(500)
    for g in random_graph_suite(10, 100, seed=501):
        inc = build_incidence(g)
        p = transition_dense(inc, "combined", 0.5)
        h = rng.standard_normal((g.num_edges, 4))
        closed = dense_inverse_solve(p, 0.5, h)
        series = truncated_series(p, 0.5, h, 400)
        fixed_point = power_iteration_solve(
            transition_matvec(inc, "combined", 0.5), 0.5, h, tol=1e-12
        )
        ok &= bool(np.abs(closed - series).max() <= 1e-8)
        ok &= bool(np.abs(closed - fixed_point).max() <= 1e-8)
        ok &= bool(np.abs(series - fixed_point).max() <= 1e-8)
    report(5, "closed form, series, fixed point agree", started, ok, 10.0)


def test_criterion_06_objective_first_order_optimality():
    started = time.time()
    g = random_bipartite(8, 6, 30, seed=600)
    inc = build_incidence(g)
    rng = np.random.default_rng(601)
    feats = rng.standard_normal((30, 4))
    p = transition_dense(inc, "combined", 0.5)
    z_star = dense_inverse_solve(p, 0.5, feats)
    best = objective_value(g, z_star, feats, 0.5, 0.5)
    ok = True
    for _ in range(100):
        i = int(rng.integers(0, 30))
        j = int(rng.integers(0, 4))
        for eps in (1e-3, -1e-3):
            z = z_star.copy()
            z[i, j] += eps
            ok &= bool(objective_value(g, z, feats, 0.5, 0.5) > best)
    report(6, "closed form minimizes the objective", started, ok, 10.0)


def test_criterion_07_variance_contraction():
    started = time.time()
    ok = True
    rng = np.random.default_rng(700)
    for g in random_graph_suite(20, 80, seed=701):
        inc = build_incidence(g)
        p = transition_dense(inc, "combined", 0.5)
        sigma2 = min(
            np.linalg.svd(combined_incidence(inc, 0.5).to_dense(),
                          compute_uv=False)[1] if g.num_edges > 1 else 0.0,
            1.0,
        )
        f = rng.standard_normal((g.num_edges, 5))
        base = variance_contraction(p, f, 0).mean()
        for t in (1, 2, 4):
            dev = variance_contraction(p, f, t).mean()
            ok &= bool(dev <= sigma2 ** (4 * t) * base + 1e-9)
    report(7, "walk variance contracts by sigma2^4t", started, ok, 10.0)


def _gradient_run() -> dict[str, np.ndarray]:
    """Analytic gradients for the single-view and dual-view losses."""
    g = synthetic_graph(5, 4, 10, num_attrs=6, num_classes=2,
                        structure_signal=0.8, noise=0.4, seed=800)
    mask = np.arange(8)
    collected = {}
    for tag, config in (
        ("single", TrainConfig(k=10, hidden_dim=5, dropout=0.0, seed=0,
                               mode="single")),
        ("dual", TrainConfig(k=6, hidden_dim=5, dropout=0.0, seed=0,
                             mode="dual", combinator="max")),
    ):
        params = init_params(g.num_attrs, g.num_classes, config,
                             np.random.default_rng(config.seed))
        propagators = build_propagators(g, config)
        _, grads = loss_and_grads(g.attrs, g.labels, mask, params, config,
                                  propagators, masks=None)
        for key, grad in grads.items():
            collected[f"{tag}.{key}"] = grad
    return collected


def test_criterion_08_gradients_match_finite_differences():
    started = time.time()
    g = synthetic_graph(5, 4, 10, num_attrs=6, num_classes=2,
                        structure_signal=0.8, noise=0.4, seed=800)
    mask = np.arange(8)
    ok = True
    for tag, config in (
        ("single", TrainConfig(k=10, hidden_dim=5, dropout=0.0, seed=0,
                               mode="single")),
        ("dual", TrainConfig(k=6, hidden_dim=5, dropout=0.0, seed=0,
                             mode="dual", combinator="max")),
    ):
        params = init_params(g.num_attrs, g.num_classes, config,
                             np.random.default_rng(config.seed))
        propagators = build_propagators(g, config)
        _, grads = loss_and_grads(g.attrs, g.labels, mask, params, config,
                                  propagators, masks=None)
        for key, w in params.weights.items():
            it = np.nditer(w, flags=["multi_index"])
            for _ in it:
                ij = it.multi_index
                orig = w[ij]
                w[ij] = orig + 1e-6
                up = training_loss(g.attrs, g.labels, mask, params, config,
                                   propagators)
                w[ij] = orig - 1e-6
                down = training_loss(g.attrs, g.labels, mask, params, config,
                                     propagators)
                w[ij] = orig
                fd = (up - down) / 2e-6
                denom = max(1e-8, abs(grads[key][ij]), abs(fd))
                ok &= bool(abs(grads[key][ij] - fd) / denom < 1e-4)
    report(8, "analytic gradients match finite differences", started, ok, 30.0)


def test_criterion_09_metric_brute_force_agreement():
    started = time.time()
    rng = np.random.default_rng(900)
    ok = bool(average_precision([3.0, 2.0, 1.0], [1, 1, 0]) == 1.0)
    ok &= bool(roc_auc([3.0, 2.0, 1.0], [1, 1, 0]) == 1.0)
    ok &= bool(roc_auc([1.0, 1.0, 1.0, 1.0], [1, 0, 1, 0]) == 0.5)
    for _ in range(100):
        n = int(rng.integers(10, 501))
        scores = np.round(rng.random(n), 2)
        labels = (rng.random(n) < rng.uniform(0.2, 0.8)).astype(float)
        if labels.sum() in (0, n):
            continue
        # Brute-force AP: full rescan at every distinct threshold.
        ap = 0.0
        prev_recall = 0.0
        for threshold in np.unique(scores)[::-1]:
            predicted = scores >= threshold
            tp = labels[predicted].sum()
            ap += (tp / labels.sum() - prev_recall) * (tp / predicted.sum())
            prev_recall = tp / labels.sum()
        # Brute-force AUC: all positive/negative score comparisons.
        pos = scores[labels == 1.0]
        neg = scores[labels == 0.0]
        wins = (pos[:, None] > neg[None, :]).sum()
        ties = (pos[:, None] == neg[None, :]).sum()
        auc = (wins + 0.5 * ties) / (len(pos) * len(neg))
        ok &= bool(abs(average_precision(scores, labels) - ap) <= 1e-12)
        ok &= bool(abs(roc_auc(scores, labels) - auc) <= 1e-12)
    report(9, "metrics match quadratic brute force", started, ok, 10.0)


BENCH_CONFIG = dict(alpha=0.5, beta=0.5, gamma=0.5, k=256, hidden_dim=256,
                    dropout=0.5, learning_rate=0.001, max_epochs=100, seed=7)


def _benchmark_run() -> dict:
    g = synthetic_graph(200, 100, 4000, num_attrs=32, num_classes=4,
                        structure_signal=0.9, noise=0.5, seed=7)
    split = make_split(g, seed=7)
    out: dict = {}
    for tag, mode, combinator in (
        ("propagated", "single", "sum"),
        ("control", "none", "sum"),
        ("dual_max", "dual", "max"),
    ):
        config = TrainConfig(mode=mode, combinator=combinator, **BENCH_CONFIG)
        result = train(g, split, config)
        probs = predict_graph(g, result.params, config)
        report_ = evaluate_scores(probs[split.test_idx],
                                  g.labels[split.test_idx])
        out[tag] = {"auc": report_.auc, "ap": report_.ap, "probs": probs}
    return out


@pytest.fixture(scope="module")
def benchmark():
    started = time.time()
    results = _benchmark_run()
    results["elapsed"] = time.time() - started
    return results


def test_criterion_10_propagation_beats_structure_free_control(benchmark):
    started = time.time() - benchmark["elapsed"]  # charge the fixture's work
    auc_prop = benchmark["propagated"]["auc"]
    auc_control = benchmark["control"]["auc"]
    auc_dual = benchmark["dual_max"]["auc"]
    print(f"[acceptance]   test AUC: propagated={auc_prop:.4f} "
          f"control={auc_control:.4f} dual_max={auc_dual:.4f}")
    ok = bool(auc_prop >= 0.90)
    ok &= bool(auc_prop - auc_control >= 0.05)
    ok &= bool(auc_dual >= auc_prop - 0.02)
    report(10, "synthetic benchmark thresholds", started, ok, 120.0)


def test_criterion_11_diagnostics_report(tmp_path, capsys):
    started = time.time()
    g = synthetic_graph(200, 100, 4000, num_attrs=32, num_classes=4,
                        structure_signal=0.9, noise=0.5, seed=7)
    bundle = tmp_path / "bench.npz"
    save_bundle(bundle, g)
    code = main(["diagnose", "--bundle", str(bundle), "--k", "256",
                 "--alpha", "0.5", "--beta", "0.5", "--seed", "0"])
    payload = json.loads(capsys.readouterr().out)
    dense_sigma2 = min(
        np.linalg.svd(combined_incidence(build_incidence(g), 0.5).to_dense(),
                      compute_uv=False)[1],
        1.0,
    )
    ok = code == EXIT_OK
    ok &= bool(abs(payload["sigma2"] - dense_sigma2) <= 1e-6)
    ok &= bool(abs(payload["sigma2_sq"] - dense_sigma2**2) <= 1e-6)
    expected_gap = 1.0 / (1.0 - payload["sigma2_sq"])
    ok &= bool(abs(payload["inv_one_minus_sigma2_sq"] - expected_gap) <= 1e-6)
    ok &= bool(payload["inv_one_minus_alpha_sigma_k_sq"] >= 1.0)
    report(11, "diagnostics report matches dense spectrum", started, ok, 10.0)


def test_criterion_12_determinism(benchmark):
    started = time.time()
    first = _exactness_run()
    second = _exactness_run()
    ok = all(np.array_equal(a, b) for a, b in zip(first, second))

    g1 = _gradient_run()
    g2 = _gradient_run()
    ok &= set(g1) == set(g2)
    ok &= all(np.array_equal(g1[key], g2[key]) for key in g1)

    rerun = _benchmark_run()
    for tag in ("propagated", "control", "dual_max"):
        ok &= bool(np.array_equal(benchmark[tag]["probs"], rerun[tag]["probs"]))
        ok &= benchmark[tag]["auc"] == rerun[tag]["auc"]
    report(12, "criteria 3, 8, 10 bitwise reproducible", started, ok, 300.0)
