"""The four-model comparison: {small, large batch} x {without, with} TDA features."""

from __future__ import annotations

import logging
from dataclasses import replace

from .evaluator import EvalReport, compare_models, evaluate
from .trainer import TrainConfig, simulate_batch, test_seed, train

log = logging.getLogger(__name__)


def label(batch_size: int, use_tda: bool) -> str:
    return f"{'tda' if use_tda else 'no_tda'}_b{batch_size}"


def run_protocol(base: TrainConfig, batch_sizes=(20, 1000), steps: int | None = None,
                 test_paths: int = 50_000, test_set_seed: int | None = None):
    """Train and evaluate all four configurations on one shared test set.

    Every model starts from ``base.seed`` and sees the same training paths
    for its batch size; the test set is drawn from a seed disjoint from the
    training streams.

    Returns
    -------
    reports : dict label -> EvalReport
    logs : dict label -> list of training log rows
    params : dict label -> PolicyParams
    table : list of dict, sorted by pnl_std
    """
    seed = test_seed(base.seed) if test_set_seed is None else test_set_seed
    paths = simulate_batch(base, seed, test_paths)
    reports: dict[str, EvalReport] = {}
    logs, params = {}, {}
    for bs in batch_sizes:
        for use_tda in (False, True):
            cfg = replace(base, batch_size=bs, use_tda=use_tda,
                          steps=base.steps if steps is None else steps)
            name = label(bs, use_tda)
            log.info("training %s for %d steps", name, cfg.steps)
            p, rows = train(cfg, log_every=0)
            reports[name] = evaluate(p, paths, cfg.cliquet, use_tda, cfg.window_size)
            logs[name], params[name] = rows, p
            log.info("%s pnl_std %.4g", name, reports[name].pnl_std)
    table = compare_models(list(reports.values()), list(reports))
    return reports, logs, params, table
