"""Recurrent hedging policy: dual dense encoders, stacked LSTM cells, linear head.

At every step the feature vector and the previous action are encoded by two
separate affine maps, summed and squashed with tanh. The result runs through
``n_cells`` stacked LSTM cells and the top hidden state is mapped to a single
position in the spot. Gate layout inside each cell's packed weight matrix is
``[input, forget, output, candidate]``; the matrix acts on ``[x, h_prev]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, NumericError, ShapeError

WIDTH = 32
N_CELLS = 4
SUPPORTED_FEATURE_DIMS = (3, 5)


def _sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


@dataclass
class PolicyParams:
    feature_dim: int
    width: int
    n_cells: int
    tensors: dict[str, np.ndarray]

    @staticmethod
    def tensor_shapes(feature_dim: int, width: int, n_cells: int) -> dict[str, tuple[int, ...]]:
        shapes = {
            "feat_W": (feature_dim, width),
            "feat_b": (width,),
            "act_W": (1, width),
            "act_b": (width,),
        }
        for k in range(n_cells):
            shapes[f"lstm{k}_W"] = (2 * width, 4 * width)
            shapes[f"lstm{k}_b"] = (4 * width,)
        shapes["head_W"] = (width, 1)
        shapes["head_b"] = (1,)
        return shapes

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            self.feature_dim, self.width, self.n_cells,
            {k: v.copy() for k, v in self.tensors.items()},
        )

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def check(self) -> None:
        expected = self.tensor_shapes(self.feature_dim, self.width, self.n_cells)
        if list(expected) != list(self.tensors):
            raise ShapeError("parameter tensor names do not match the architecture")
        for name, shape in expected.items():
            arr = self.tensors[name]
            if arr.shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"{name} contains non-finite values")

    def to_dict(self) -> dict:
        return {
            "feature_dim": self.feature_dim,
            "width": self.width,
            "n_cells": self.n_cells,
            "tensors": {
                name: {"shape": list(arr.shape), "data": arr.tolist()}
                for name, arr in self.tensors.items()
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PolicyParams":
        tensors = {}
        for name, entry in doc["tensors"].items():
            arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
            tensors[name] = arr
        params = cls(int(doc["feature_dim"]), int(doc["width"]), int(doc["n_cells"]), tensors)
        params.check()
        return params

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        Path(path).write_text(json.dumps(doc))

    @classmethod
    def load(cls, path: str | Path) -> "PolicyParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class PolicyState:
    """Hidden and cell vectors of every LSTM cell; leading axis is the cell index."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, n_cells: int, width: int, batch: tuple[int, ...] = ()) -> "PolicyState":
        shape = (n_cells, *batch, width)
        return cls(np.zeros(shape), np.zeros(shape))


def init_params(
    feature_dim: int, seed: int, width: int = WIDTH, n_cells: int = N_CELLS,
    allow_any_dim: bool = False,
) -> PolicyParams:
    """Glorot-uniform weights, zero biases, forget-gate biases set to 1."""
    if not allow_any_dim and feature_dim not in SUPPORTED_FEATURE_DIMS:
        raise ConfigurationError(
            f"feature_dim must be one of {SUPPORTED_FEATURE_DIMS}, got {feature_dim}"
        )
    if feature_dim < 1 or width < 1 or n_cells < 1:
        raise ConfigurationError("feature_dim, width and n_cells must be positive")
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in PolicyParams.tensor_shapes(feature_dim, width, n_cells).items():
        if len(shape) == 2:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            tensors[name] = rng.uniform(-bound, bound, size=shape)
        else:
            tensors[name] = np.zeros(shape)
    for k in range(n_cells):
        tensors[f"lstm{k}_b"][width : 2 * width] = 1.0
    return PolicyParams(feature_dim, width, n_cells, tensors)


def _step(params: PolicyParams, x, a_prev, h, c, cache=None):
    """One time step for a batch. ``x``: (B, F), ``a_prev``: (B,), ``h``/``c``: (cells, B, w)."""
    T = params.tensors
    w = params.width
    z0 = x @ T["feat_W"] + T["feat_b"] + a_prev[:, None] * T["act_W"][0] + T["act_b"]
    inp = np.tanh(z0)
    if cache is not None:
        cache["h0"] = inp
    h_new = np.empty_like(h)
    c_new = np.empty_like(c)
    for k in range(params.n_cells):
        zin = np.concatenate([inp, h[k]], axis=1)
        pre = zin @ T[f"lstm{k}_W"] + T[f"lstm{k}_b"]
        sig = _sigmoid(pre[:, : 3 * w])
        g = np.tanh(pre[:, 3 * w :])
        i, f, o = sig[:, :w], sig[:, w : 2 * w], sig[:, 2 * w :]
        c_new[k] = f * c[k] + i * g
        tc = np.tanh(c_new[k])
        h_new[k] = o * tc
        if cache is not None:
            cache["zin"].append(zin)
            cache["sig"].append(sig)
            cache["g"].append(g)
            cache["c_prev"].append(c[k])
            cache["tc"].append(tc)
        inp = h_new[k]
    action = inp @ T["head_W"][:, 0] + T["head_b"][0]
    return action, h_new, c_new


def _check_inputs(params: PolicyParams, x: np.ndarray) -> None:
    if x.shape[-1] != params.feature_dim:
        raise ShapeError(f"expected {params.feature_dim} features, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise NumericError("features contain non-finite values")


def policy_step(params: PolicyParams, features, prev_action: float, state: PolicyState):
    """Advance one path by one step; returns ``(action, new_state)``."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 1:
        raise ShapeError("features must be a vector")
    _check_inputs(params, x)
    if not np.isfinite(prev_action):
        raise NumericError("prev_action is not finite")
    if state.h.shape != (params.n_cells, params.width):
        raise ShapeError("state does not match the network")
    action, h, c = _step(
        params, x[None, :], np.array([float(prev_action)]), state.h[:, None, :], state.c[:, None, :]
    )
    return float(action[0]), PolicyState(h[:, 0, :], c[:, 0, :])


def forward(params: PolicyParams, features: np.ndarray, initial_action: float = 0.0,
            keep_cache: bool = False):
    """Unroll the policy over a batch of episodes.

    Parameters
    ----------
    features : ndarray, shape (B, T, F)

    Returns
    -------
    actions : ndarray, shape (B, T)
    cache : dict or None
        Intermediates needed by :func:`backward` when ``keep_cache`` is set.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 3:
        raise ShapeError("features must have shape (B, T, F)")
    _check_inputs(params, x)
    B, n_t, _ = x.shape
    state = PolicyState.zeros(params.n_cells, params.width, (B,))
    h, c = state.h, state.c
    a_prev = np.full(B, float(initial_action))
    actions = np.empty((B, n_t))
    cache = None
    if keep_cache:
        cache = {"x": x, "a_prev": [], "steps": []}
    for t in range(n_t):
        step_cache = None
        if keep_cache:
            step_cache = {"zin": [], "sig": [], "g": [], "c_prev": [], "tc": []}
            cache["a_prev"].append(a_prev)
        a_prev, h, c = _step(params, x[:, t, :], a_prev, h, c, step_cache)
        if keep_cache:
            step_cache["h_top"] = h[-1]
            cache["steps"].append(step_cache)
        actions[:, t] = a_prev
    return actions, cache


def backward(params: PolicyParams, cache: dict, d_actions: np.ndarray) -> dict[str, np.ndarray]:
    """Backpropagate ``dL/d(actions)`` of shape (B, T) through the unrolled episode.

    Each action also feeds the next step's action encoder, so the adjoint of
    step ``t`` collects a contribution from step ``t + 1``.
    """
    T = params.tensors
    w = params.width
    grads = params.zeros_like()
    x = cache["x"]
    B, n_t, _ = x.shape
    dh_next = np.zeros((params.n_cells, B, w))
    dc_next = np.zeros((params.n_cells, B, w))
    da_carry = np.zeros(B)
    head_w = T["head_W"][:, 0]
    act_w = T["act_W"][0]
    for t in range(n_t - 1, -1, -1):
        sc = cache["steps"][t]
        da = d_actions[:, t] + da_carry
        grads["head_W"][:, 0] += sc["h_top"].T @ da
        grads["head_b"][0] += da.sum()
        dinp = da[:, None] * head_w
        for k in range(params.n_cells - 1, -1, -1):
            sig, g, tc = sc["sig"][k], sc["g"][k], sc["tc"][k]
            i, f, o = sig[:, :w], sig[:, w : 2 * w], sig[:, 2 * w :]
            dh = dinp + dh_next[k]
            dc = dh * o * (1.0 - tc * tc) + dc_next[k]
            dpre = np.empty((B, 4 * w))
            dpre[:, :w] = dc * g * i * (1.0 - i)
            dpre[:, w : 2 * w] = dc * sc["c_prev"][k] * f * (1.0 - f)
            dpre[:, 2 * w : 3 * w] = dh * tc * o * (1.0 - o)
            dpre[:, 3 * w :] = dc * i * (1.0 - g * g)
            dc_next[k] = dc * f
            grads[f"lstm{k}_W"] += sc["zin"][k].T @ dpre
            grads[f"lstm{k}_b"] += dpre.sum(axis=0)
            dzin = dpre @ T[f"lstm{k}_W"].T
            dinp = dzin[:, :w]
            dh_next[k] = dzin[:, w:]
        h0 = sc["zin"][0][:, :w]
        dz0 = dinp * (1.0 - h0 * h0)
        a_prev = cache["a_prev"][t]
        grads["feat_W"] += x[:, t, :].T @ dz0
        grads["feat_b"] += dz0.sum(axis=0)
        grads["act_W"][0] += a_prev @ dz0
        grads["act_b"] += dz0.sum(axis=0)
        da_carry = dz0 @ act_w
    return grads


def unroll_episode(params: PolicyParams, feature_matrix, initial_action: float = 0.0) -> np.ndarray:
    """Actions ``delta_0 .. delta_{T-1}`` for one episode of shape (T, F)."""
    x = np.asarray(feature_matrix, dtype=float)
    if x.ndim != 2:
        raise ShapeError("feature_matrix must have shape (T, F)")
    actions, _ = forward(params, x[None], initial_action)
    return actions[0]
