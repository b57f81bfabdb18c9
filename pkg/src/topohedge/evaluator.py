"""Out-of-sample evaluation of trained policies and model comparison."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .cliquet import CliquetSpec
from .errors import ConfigurationError
from .heston import PathSet
from .network import PolicyParams
from .trainer import HedgeOutcome, hedge_outcome

HIST_BINS = 100


@dataclass
class EvalReport:
    n_paths: int
    pnl_mean: float
    pnl_std: float
    pnl_min: float
    pnl_max: float
    histogram: dict  # {"edges": [...], "counts": [...]}
    mean_abs_trade: float
    turnover: float
    outcome: HedgeOutcome | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("outcome")
        return d

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load_json(cls, path) -> "EvalReport":
        return cls(**json.loads(Path(path).read_text()))

    def save_per_path(self, path) -> None:
        if self.outcome is None:
            raise ValueError("report carries no per-path data")
        o = self.outcome
        with open(path, "w", newline="") as fh:
            fh.write("path_id,pnl,liability,error\n")
            for p, (pnl, liab, err) in enumerate(zip(o.pnl, o.liability, o.error)):
                fh.write(f"{p},{float(pnl)!r},{float(liab)!r},{float(err)!r}\n")

    def save_histogram(self, path) -> None:
        edges, counts = self.histogram["edges"], self.histogram["counts"]
        with open(path, "w", newline="") as fh:
            fh.write("bin_left,bin_right,count\n")
            for i, c in enumerate(counts):
                fh.write(f"{edges[i]!r},{edges[i + 1]!r},{c}\n")


def summarize(outcome: HedgeOutcome, bins: int = HIST_BINS) -> EvalReport:
    err = outcome.error
    lo, hi = float(err.min()), float(err.max())
    counts, edges = np.histogram(err, bins=bins, range=(lo, hi) if hi > lo else None)
    actions = outcome.actions
    prev = np.concatenate([np.zeros((actions.shape[0], 1)), actions[:, :-1]], axis=1)
    return EvalReport(
        n_paths=int(err.size),
        pnl_mean=float(err.mean()),
        pnl_std=float(err.std()),
        pnl_min=lo,
        pnl_max=hi,
        histogram={"edges": edges.tolist(), "counts": counts.tolist()},
        mean_abs_trade=float(np.mean(np.abs(actions))),
        turnover=float(np.mean(np.abs(actions - prev))),
        outcome=outcome,
    )


def evaluate(params: PolicyParams, paths: PathSet, spec: CliquetSpec, use_tda: bool,
             window_size: int = 15, bins: int = HIST_BINS) -> EvalReport:
    """Hedge every path with ``params`` and summarise the errors ``pnl - liability``.

    Features and PnL go through the same functions the trainer uses.
    ``turnover`` is the mean ``|delta_t - delta_{t-1}|`` starting from a flat book.
    """
    expected = 5 if use_tda else 3
    if params.feature_dim != expected:
        raise ConfigurationError(
            f"policy takes {params.feature_dim} features but use_tda={use_tda} gives {expected}"
        )
    return summarize(hedge_outcome(params, paths, spec, use_tda, window_size), bins)


def rolling_mean(series, window: int) -> np.ndarray:
    """Trailing mean over the last ``min(t + 1, window)`` values."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        return x.copy()
    out = np.empty_like(x)
    head = min(window - 1, x.size)
    out[:head] = np.cumsum(x[:head]) / np.arange(1, head + 1)
    if x.size >= window:
        out[window - 1 :] = sliding_window_view(x, window).mean(axis=1)
    return out


def compare_models(reports: list[EvalReport], labels: list[str]) -> list[dict]:
    """Rows ``(label, pnl_std, pnl_min, mean_abs_trade)`` sorted by ascending ``pnl_std``."""
    if len(reports) < 2:
        raise ValueError("compare_models needs at least two reports")
    if len(labels) != len(reports):
        raise ValueError("one label per report is required")
    rows = [
        {"label": lab, "pnl_std": r.pnl_std, "pnl_min": r.pnl_min, "mean_abs_trade": r.mean_abs_trade}
        for lab, r in zip(labels, reports)
    ]
    return sorted(rows, key=lambda row: row["pnl_std"])
