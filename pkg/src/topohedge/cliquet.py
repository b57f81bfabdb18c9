"""Capped cumulative cliquet payout.

The payout at step ``t`` sums the capped returns of every completed reset
period, ``min(x_i / x_{i - period} - 1, cap)`` for ``i = period, 2 * period,
...``, and floors the total at zero. A period's return only enters once the
period has ended, so the running payout is piecewise constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError, ShapeError


@dataclass(frozen=True)
class CliquetSpec:
    cap: float = 0.035
    period: int = 20
    floor_at_zero: bool = True

    def validate(self, episode_steps: int | None = None) -> None:
        if not (math.isfinite(self.cap) and self.cap > 0):
            raise ParameterDomainError(f"cap must be > 0, got {self.cap}")
        if self.period < 1:
            raise ParameterDomainError(f"period must be >= 1, got {self.period}")
        if episode_steps is not None and episode_steps % self.period:
            raise ParameterDomainError(
                f"period {self.period} does not divide episode length {episode_steps}"
            )


def cliquet_payout(spot_path, t: int, spec: CliquetSpec) -> float:
    """Payout after ``t`` steps of a single path, computed term by term."""
    spec.validate()
    x = np.asarray(spot_path, dtype=float)
    if x.ndim != 1:
        raise ShapeError("spot_path must be one-dimensional")
    if t < 0 or t > x.shape[0] - 1:
        raise IndexError(f"step {t} outside path of length {x.shape[0]}")
    total = 0.0
    for i in range(spec.period, t + 1, spec.period):
        total += min(x[i] / x[i - spec.period] - 1.0, spec.cap)
    return max(total, 0.0) if spec.floor_at_zero else total


def payout_series(spot, spec: CliquetSpec) -> np.ndarray:
    """Running payout ``psi_t`` for ``t = 0..T``.

    Accepts a single path ``(T+1,)`` or a batch ``(n_paths, T+1)`` and returns
    an array of the same shape.
    """
    spec.validate()
    x = np.asarray(spot, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] < 1:
        raise ShapeError("spot must have shape (T+1,) or (n_paths, T+1)")
    n_cols = x.shape[1]
    resets = x[:, :: spec.period]
    capped = np.minimum(resets[:, 1:] / resets[:, :-1] - 1.0, spec.cap)
    # cumulative capped sum after k completed periods, k = 0..n_complete
    cum = np.zeros((x.shape[0], capped.shape[1] + 1))
    for k in range(capped.shape[1]):
        cum[:, k + 1] = cum[:, k] + capped[:, k]
    if spec.floor_at_zero:
        cum = np.maximum(cum, 0.0)
    completed = np.arange(n_cols) // spec.period
    out = cum[:, completed]
    return out[0] if single else out
