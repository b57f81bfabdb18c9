"""Acceptance criteria, one test per criterion.

Each test appends a ``PASS``/``FAIL`` line with the measured numbers to the
``acceptance criteria`` section of the pytest terminal summary, then asserts.
Criterion 6 trains 40 models and takes a few hours on one core; criterion 8
only runs with ``TOPOHEDGE_FULL_SCALE=1``.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import pdist, squareform

from topohedge import trainer
from topohedge.cli import main
from topohedge.cliquet import CliquetSpec, payout_series
from topohedge.evaluator import evaluate
from topohedge.heston import HestonParams, simulate_paths
from topohedge.network import init_params
from topohedge.tda import rips_persistence_0d
from topohedge.trainer import TrainConfig, build_feature_batch, simulate_batch, train

from conftest import ACCEPTANCE_LINES
from gradcheck import loss_gradient_check


def report(number, ok, text):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


# -- 1: simulator moments ---------------------------------------------------

def test_c1_simulator_moments():
    p = HestonParams()
    n = 50_000
    t0 = time.perf_counter()
    paths = simulate_paths(p, n, 240, 1 / 240, seed=2024)
    elapsed = time.perf_counter() - t0
    horizon = 240 / 240
    vT, ratio = paths.variance[:, -1], paths.spot[:, -1] / p.s0
    v_ref = p.theta + (p.v0 - p.theta) * math.exp(-p.kappa * horizon)
    s_ref = math.exp(p.mu * horizon)
    z_v = abs(vT.mean() - v_ref) / (vT.std(ddof=1) / math.sqrt(n))
    z_s = abs(ratio.mean() - s_ref) / (ratio.std(ddof=1) / math.sqrt(n))
    ok = z_v < 3 and z_s < 3 and elapsed < 30
    report(1, ok, f"E[v_T] off by {z_v:.2f} SE, E[S_T/s0] off by {z_s:.2f} SE (limit 3); "
                  f"{elapsed:.1f}s (limit 30s)")
    assert ok


# -- 2: persistence oracle --------------------------------------------------

def _union_find_deaths(points):
    """Kruskal filtration: every merge of two components records one death."""
    n = len(points)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy, dz = (points[i][k] - points[j][k] for k in range(3))
            edges.append((math.sqrt(dx * dx + dy * dy + dz * dz), i, j))
    edges.sort()
    deaths = []
    for w, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            if w > 0:
                deaths.append(w)
    return tuple(sorted(deaths))


def test_c2_persistence_oracle():
    rng = np.random.default_rng(7)
    clouds = rng.normal(size=(1000, 15, 3))
    t0 = time.perf_counter()
    diagrams = [rips_persistence_0d(c).deaths for c in clouds]
    elapsed = time.perf_counter() - t0
    exact = sum(d == _union_find_deaths(c.tolist()) for d, c in zip(diagrams, clouds))
    worst = 0.0
    for d, c in zip(diagrams, clouds):
        mst = np.sort(minimum_spanning_tree(squareform(pdist(c))).data)
        worst = max(worst, float(np.max(np.abs(np.asarray(d) - mst))))
    ok = exact == 1000 and worst <= 1e-12 and elapsed < 5
    report(2, ok, f"{exact}/1000 exact union-find matches, max MST deviation {worst:.1e} (limit 1e-12); "
                  f"{elapsed:.2f}s (limit 5s)")
    assert ok


# -- 3: gradient suite ------------------------------------------------------

def _shrunken_case(seed):
    cfg = TrainConfig(episode_steps=10, cliquet=CliquetSpec(period=5), window_size=4)
    params = init_params(5, seed, width=4, n_cells=4)
    paths = simulate_batch(cfg, 500 + seed, 4)
    feats = build_feature_batch(paths.spot, paths.variance, cfg.cliquet, True, cfg.window_size)
    liability = payout_series(paths.spot, cfg.cliquet)[:, -1]
    return params, feats, paths.spot, liability


def test_c3_gradient_suite():
    t0 = time.perf_counter()
    errors = [loss_gradient_check(*_shrunken_case(seed), gamma=1000.0) for seed in range(20)]
    elapsed = time.perf_counter() - t0
    worst = max(errors)
    ok = worst < 1e-5 and elapsed < 60
    report(3, ok, f"worst relative error over 20 seeds {worst:.2e} (limit 1e-5); {elapsed:.1f}s (limit 60s)")
    assert ok


# -- 4: cliquet oracle ------------------------------------------------------

def _direct_payout(x, cap, period):
    total = 0.0
    for i in range(period, len(x), period):
        total += min(x[i] / x[i - period] - 1.0, cap)
    return max(total, 0.0)


def test_c4_cliquet_oracle():
    spec = CliquetSpec()
    paths = simulate_paths(HestonParams(), 10_000, 240, 1 / 240, seed=99)
    series = payout_series(paths.spot, spec)[:, -1]
    direct = np.array([_direct_payout(row.tolist(), spec.cap, spec.period) for row in paths.spot])
    worst = float(np.max(np.abs(series - direct)))
    rising = 1.1 ** (np.arange(241) / 20)  # 10% per period, capped every time
    capped = float(payout_series(rising, spec)[-1])
    ok = worst <= 1e-12 and abs(capped - 0.42) <= 1e-15
    report(4, ok, f"max deviation over 10,000 paths {worst:.1e} (limit 1e-12); "
                  f"all-capped payout {capped!r} vs 0.42 (limit 1e-15, see ledger on exactness)")
    assert ok


# -- 5: training efficacy ---------------------------------------------------

@pytest.mark.slow
def test_c5_training_efficacy():
    cfg = TrainConfig(batch_size=20, steps=500, use_tda=True, seed=0)
    t0 = time.perf_counter()
    params, _ = train(cfg, log_every=0)
    test = simulate_batch(cfg, trainer.test_seed(cfg.seed), 5000)
    trained = evaluate(params, test, cfg.cliquet, True, cfg.window_size)
    elapsed = time.perf_counter() - t0
    zero = float(payout_series(test.spot, cfg.cliquet)[:, -1].std())
    ratio = trained.pnl_std / zero
    ok = ratio < 0.6 and elapsed < 900
    report(5, ok, f"trained pnl_std {trained.pnl_std:.4g} vs zero policy {zero:.4g}, ratio {ratio:.3f} "
                  f"(limit 0.6); {elapsed:.0f}s (limit 900s)")
    assert ok


# -- 6: relative ordering ---------------------------------------------------

@pytest.mark.slow
def test_c6_relative_ordering():
    base = TrainConfig(steps=500)
    test = simulate_batch(base, trainer.test_seed(10_000), 5000)
    results = {}
    for bs in (20, 200):
        for seed in range(10):
            row = {}
            for use_tda in (False, True):
                cfg = replace(base, batch_size=bs, use_tda=use_tda, seed=seed)
                params, _ = train(cfg, log_every=0)
                row["tda" if use_tda else "no_tda"] = evaluate(params, test, cfg.cliquet, use_tda).pnl_std
            results[f"b{bs}_seed{seed}"] = row
    wins = {bs: sum(results[f"b{bs}_seed{s}"]["tda"] <= results[f"b{bs}_seed{s}"]["no_tda"]
                    for s in range(10)) for bs in (20, 200)}
    ok = all(w >= 7 for w in wins.values())
    detail = "; ".join(
        f"{k} tda {v['tda']:.4g} / no_tda {v['no_tda']:.4g}" for k, v in results.items()
    )
    report(6, ok, f"TDA <= non-TDA in {wins[20]}/10 seeds at batch 20 and {wins[200]}/10 at batch 200 "
                  f"(limit 7/10 each)")
    ACCEPTANCE_LINES.append(f"    per-seed pnl_std: {detail}")
    assert ok


# -- 7: determinism ---------------------------------------------------------

def test_c7_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    TrainConfig(batch_size=6, steps=4, seed=11, episode_steps=60).save(cfg)
    outputs = []
    for run, workers in enumerate(("1", "3")):
        d = tmp_path / f"run{run}"
        d.mkdir()
        cmds = [
            ["simulate", "--config", str(cfg), "--out", str(d / "paths.csv"), "--paths", "8", "--seed", "5"],
            ["features", "--config", str(cfg), "--paths", str(d / "paths.csv"), "--out", str(d / "feat.csv")],
            ["train", "--config", str(cfg), "--tda", "on", "--workers", workers,
             "--out-model", str(d / "model.json"), "--log", str(d / "log.csv")],
            ["eval", "--model", str(d / "model.json"), "--paths", str(d / "paths.csv"),
             "--report", str(d / "report.json"), "--per-path", str(d / "per_path.csv"),
             "--hist", str(d / "hist.csv")],
            ["plot", "--hist", str(d / "hist.csv"), "--out", str(d / "hist.svg")],
            ["plot", "--log", str(d / "log.csv"), "--out", str(d / "log.svg")],
        ]
        codes = [main(c) for c in cmds]
        assert codes == [0] * len(cmds), codes
        outputs.append({f.name: f.read_bytes() for f in sorted(d.iterdir())})
    first, second = outputs
    differing = [name for name in first if first[name] != second.get(name)]
    ok = not differing and first.keys() == second.keys()
    report(7, ok, f"{len(first)} CLI outputs byte-identical across repeats, workers 1 vs 3 "
                  f"(differing: {differing or 'none'})")
    assert ok


# -- 8: full-scale reference ------------------------------------------------

@pytest.mark.full_scale
def test_c8_full_scale_reference():
    cfg = TrainConfig(batch_size=1000, steps=5300, use_tda=True, seed=0, chunk_size=250)
    params, _ = train(cfg, log_every=100)
    test = simulate_batch(cfg, trainer.test_seed(cfg.seed), 50_000)
    std = evaluate(params, test, cfg.cliquet, True).pnl_std
    ok = 0.01 <= std <= 0.05
    report(8, ok, f"full-scale pnl_std {std:.4g} (band [0.01, 0.05], reference 2.1e-02)")
    assert ok
