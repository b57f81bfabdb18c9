"""Heston path simulation with log-Euler spot and full-truncation variance.

Each path draws from its own Philox stream keyed by ``(seed, path_id)`` so a
path is a pure function of the seed and its index, independent of how many
other paths are generated alongside it or in which order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, ParameterDomainError, ShapeError

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class HestonParams:
    mu: float = 0.02
    v0: float = 0.025
    kappa: float = 2.5
    theta: float = 0.02
    xi: float = 0.6
    rho: float = -0.5
    s0: float = 1.0

    def validate(self) -> None:
        vals = (self.mu, self.v0, self.kappa, self.theta, self.xi, self.rho, self.s0)
        if not all(math.isfinite(x) for x in vals):
            raise ParameterDomainError("Heston parameters must be finite")
        for name in ("v0", "theta", "xi", "kappa"):
            if getattr(self, name) < 0:
                raise ParameterDomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not -1.0 <= self.rho <= 1.0:
            raise ParameterDomainError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.s0 <= 0:
            raise ParameterDomainError(f"s0 must be > 0, got {self.s0}")


@dataclass
class PathSet:
    spot: np.ndarray  # (n_paths, n_steps + 1)
    variance: np.ndarray  # (n_paths, n_steps + 1), raw full-truncation state
    dt: float
    seed: int

    @property
    def n_paths(self) -> int:
        return self.spot.shape[0]

    @property
    def n_steps(self) -> int:
        return self.spot.shape[1] - 1

    def to_csv(self, path: str | Path) -> None:
        """Write ``path_id,step,spot,variance`` rows with round-trip float formatting."""
        with open(path, "w", newline="") as fh:
            fh.write("path_id,step,spot,variance\n")
            for p in range(self.n_paths):
                s_row, v_row = self.spot[p], self.variance[p]
                fh.writelines(
                    f"{p},{t},{float(s_row[t])!r},{float(v_row[t])!r}\n"
                    for t in range(s_row.shape[0])
                )

    @classmethod
    def from_csv(cls, path: str | Path, dt: float = 1.0 / 240, seed: int = -1) -> "PathSet":
        """Read a CSV written by :meth:`to_csv`; ``dt`` and ``seed`` are not stored in the file."""
        rows = []
        with open(path, newline="") as fh:
            header = fh.readline()
            if header.strip() != "path_id,step,spot,variance":
                raise ShapeError(f"unexpected PathSet header: {header.strip()!r}")
            for rec in csv.reader(fh):
                rows.append((int(rec[0]), int(rec[1]), float(rec[2]), float(rec[3])))
        if not rows:
            raise EmptyInputError(f"no path rows in {path}")
        n_paths = max(r[0] for r in rows) + 1
        n_cols = max(r[1] for r in rows) + 1
        if len(rows) != n_paths * n_cols:
            raise ShapeError("PathSet CSV is not a full path x step grid")
        spot = np.empty((n_paths, n_cols))
        var = np.empty((n_paths, n_cols))
        for p, t, s, v in rows:
            spot[p, t] = s
            var[p, t] = v
        return cls(spot=spot, variance=var, dt=dt, seed=seed)


def path_rng(seed: int, path_id: int) -> np.random.Generator:
    """Counter-based generator for one path."""
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, path_id & _MASK64]))


def correlated_normals(
    rng: np.random.Generator, rho: float, size: int | tuple[int, ...] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Draw standard normals ``(z_s, z_v)`` with ``Corr(z_s, z_v) = rho``.

    Uses ``z_v = rho * z_s + sqrt(1 - rho**2) * z_perp``; at ``|rho| = 1`` the
    second factor is exactly zero so ``z_v = rho * z_s`` bit for bit.
    """
    if not -1.0 <= rho <= 1.0:
        raise ParameterDomainError(f"rho must lie in [-1, 1], got {rho}")
    z_s = rng.standard_normal(size)
    z_perp = rng.standard_normal(size)
    z_v = rho * z_s + math.sqrt(1.0 - rho * rho) * z_perp
    return z_s, z_v


def _draw_increments(seed: int, n_paths: int, n_steps: int, rho: float):
    z_s = np.empty((n_paths, n_steps))
    z_v = np.empty((n_paths, n_steps))
    for p in range(n_paths):
        z_s[p], z_v[p] = correlated_normals(path_rng(seed, p), rho, n_steps)
    return z_s, z_v


def simulate_paths(
    params: HestonParams, n_paths: int, n_steps: int, dt: float, seed: int
) -> PathSet:
    """Simulate Heston spot/variance paths.

    Parameters
    ----------
    params : HestonParams
    n_paths : int
        Number of independent paths (>= 1).
    n_steps : int
        Number of time steps; the result has ``n_steps + 1`` columns.
    dt : float
        Step length in years.
    seed : int
        Root seed; path ``p`` uses the Philox key ``(seed, p)``.

    Returns
    -------
    PathSet
    """
    params.validate()
    if n_paths < 1:
        raise EmptyInputError("n_paths must be >= 1")
    if n_steps < 0:
        raise ParameterDomainError("n_steps must be >= 0")
    if not dt > 0:
        raise ParameterDomainError("dt must be > 0")

    spot = np.empty((n_paths, n_steps + 1))
    var = np.empty((n_paths, n_steps + 1))
    spot[:, 0] = params.s0
    var[:, 0] = params.v0
    if n_steps == 0:
        return PathSet(spot, var, dt, seed)

    z_s, z_v = _draw_increments(seed, n_paths, n_steps, params.rho)
    sqdt = math.sqrt(dt)
    log_s = np.full(n_paths, math.log(params.s0))
    v = var[:, 0].copy()
    for t in range(n_steps):
        v_pos = np.maximum(v, 0.0)
        vol = np.sqrt(v_pos)
        log_s = log_s + (params.mu - 0.5 * v_pos) * dt + vol * sqdt * z_s[:, t]
        v = v + params.kappa * (params.theta - v_pos) * dt + params.xi * vol * sqdt * z_v[:, t]
        spot[:, t + 1] = np.exp(log_s)
        var[:, t + 1] = v
    return PathSet(spot, var, dt, seed)
