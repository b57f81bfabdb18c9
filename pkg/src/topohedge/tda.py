"""Zero-dimensional Vietoris-Rips persistence on rolling 3-D windows.

In dimension zero every bar is born at 0 and dies when its component merges
into another one as the scale grows, so the finite deaths are exactly the
edge weights of a Euclidean minimum spanning tree. Single windows go through
a vectorised Prim over a stack of distance matrices; the rolling features use
a compiled Prim that computes distances on the fly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import EmptyInputError, ShapeError



@dataclass(frozen=True)
class PersistenceDiagram:
    """Finite deaths of a 0-dim diagram, ascending; all births are 0."""

    deaths: tuple[float, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.deaths)


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    """Euclidean distance matrices for ``(..., k, 3)`` point arrays.

    The squared distance is accumulated coordinate by coordinate in a fixed
    order so every caller sees bit-identical values.
    """
    diff = points[..., :, None, :] - points[..., None, :, :]
    sq = diff[..., 0] * diff[..., 0]
    for c in range(1, points.shape[-1]):
        sq = sq + diff[..., c] * diff[..., c]
    return np.sqrt(sq)


def mst_edge_weights(dist: np.ndarray) -> np.ndarray:
    """Prim's algorithm over a stack of distance matrices.

    Parameters
    ----------
    dist : ndarray, shape (n, k, k)

    Returns
    -------
    ndarray, shape (n, k - 1)
        MST edge weights of each matrix in the order Prim adds them.
    """
    n, k, _ = dist.shape
    out = np.empty((n, max(k - 1, 0)))
    if k < 2:
        return out
    rows = np.arange(n)
    in_tree = np.zeros((n, k), dtype=bool)
    in_tree[:, 0] = True
    best = dist[:, 0, :].copy()
    best[:, 0] = np.inf
    for j in range(k - 1):
        nxt = np.argmin(best, axis=1)
        out[:, j] = best[rows, nxt]
        in_tree[rows, nxt] = True
        best = np.minimum(best, dist[rows, nxt, :])
        best[in_tree] = np.inf
    return out


def _as_points(window) -> np.ndarray:
    pts = np.asarray(window, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise EmptyInputError("window must contain at least one point")
    if not np.all(np.isfinite(pts)):
        raise ValueError("window coordinates must be finite")
    return pts


def rips_persistence_0d(window) -> PersistenceDiagram:
    """Persistence diagram of the Rips filtration of one point window.

    Zero-length bars (coincident points) and the infinite bar are dropped.
    """
    pts = _as_points(window)
    weights = mst_edge_weights(pairwise_distances(pts)[None])[0]
    weights = np.sort(weights[weights > 0])
    return PersistenceDiagram(tuple(float(w) for w in weights))


def diagram_norms(diagram: PersistenceDiagram) -> tuple[float, float]:
    """L1 and L2 norms of the bar lengths (death minus a zero birth)."""
    d = np.asarray(diagram.deaths, dtype=float)
    if d.size == 0:
        return 0.0, 0.0
    return float(d.sum()), float(np.sqrt(np.sum(d * d)))


def rolling_tda_batch(
    points: np.ndarray, window_size: int, scale: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Rolling L1/L2 diagram norms for a batch of 3-D trajectories.

    Parameters
    ----------
    points : ndarray, shape (n_paths, n_times, 3)
    window_size : int
        Points per window (>= 2). Outputs before the first full window are 0.
    scale : ndarray of shape (3,), optional
        Per-coordinate multipliers applied before distances are taken.

    Returns
    -------
    l1, l2 : ndarray, shape (n_paths, n_times)
    """
    if window_size < 2:
        raise ValueError("window_size must be >= 2")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 3:
        raise ShapeError("points must have shape (n_paths, n_times, dim)")
    if scale is not None:
        pts = pts * np.asarray(scale, dtype=float)
    n_paths, n_times, _ = pts.shape
    l1 = np.zeros((n_paths, n_times))
    l2 = np.zeros((n_paths, n_times))
    if n_times >= window_size:
        _rolling_norms(np.ascontiguousarray(pts), window_size, l1, l2)
    return l1, l2


@numba.njit(cache=True)
def _rolling_norms(pts, k, l1, l2):  # pragma: no cover - compiled
    n_paths, n_times, dim = pts.shape
    best = np.empty(k)
    done = np.zeros(k, dtype=np.bool_)
    for p in range(n_paths):
        for end in range(k - 1, n_times):
            s = end - k + 1
            for j in range(k):
                best[j] = np.inf
                done[j] = False
            cur = 0
            done[0] = True
            t1 = 0.0
            t2 = 0.0
            for _ in range(k - 1):
                nxt = -1
                nxt_d = np.inf
                for j in range(k):
                    if done[j]:
                        continue
                    sq = 0.0
                    for c in range(dim):
                        diff = pts[p, s + cur, c] - pts[p, s + j, c]
                        sq = sq + diff * diff
                    d = np.sqrt(sq)
                    if d < best[j]:
                        best[j] = d
                    if best[j] < nxt_d:
                        nxt_d = best[j]
                        nxt = j
                done[nxt] = True
                cur = nxt
                t1 += nxt_d
                t2 += nxt_d * nxt_d
            l1[p, end] = t1
            l2[p, end] = np.sqrt(t2)


def rolling_tda_features(spot, variance, payout, window_size: int = 15, scale=None):
    """Rolling ``(l1_t, l2_t)`` for one path's (spot, variance, payout) cloud."""
    s = np.asarray(spot, dtype=float)
    v = np.asarray(variance, dtype=float)
    p = np.asarray(payout, dtype=float)
    if not (s.ndim == v.ndim == p.ndim == 1) or not (s.shape == v.shape == p.shape):
        raise ShapeError("spot, variance and payout must be 1-D series of equal length")
    l1, l2 = rolling_tda_batch(np.stack([s, v, p], axis=-1)[None], window_size, scale)
    return l1[0], l2[0]
