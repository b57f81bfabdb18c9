"""Feature assembly, hedged PnL, variance loss, Adam and the training loop."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .cliquet import CliquetSpec, payout_series
from .errors import ConfigurationError, DegenerateBatchError, NumericDivergenceError, ShapeError
from .heston import HestonParams, PathSet, simulate_paths
from .network import PolicyParams, backward, forward, init_params
from .tda import rolling_tda_batch

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_HESTON_KEYS = ("mu", "v0", "kappa", "theta", "xi", "rho", "s0", "dt")
_TOP_KEYS = (
    "batch_size", "steps", "gamma", "use_tda", "learning_rate", "seed",
    "window_size", "episode_steps", "heston", "cliquet",
)


@dataclass
class TrainConfig:
    batch_size: int = 20
    steps: int = 5300
    gamma: float = 1000.0
    use_tda: bool = True
    learning_rate: float = 1e-3
    seed: int = 0
    window_size: int = 15
    episode_steps: int = 240
    heston: HestonParams = field(default_factory=HestonParams)
    dt: float = 1.0 / 240
    cliquet: CliquetSpec = field(default_factory=CliquetSpec)
    # runtime knobs, not part of the config file
    clip_norm: float | None = None
    chunk_size: int = 250
    workers: int = 1

    @property
    def feature_dim(self) -> int:
        return 5 if self.use_tda else 3

    def validate(self) -> None:
        if self.batch_size < 2:
            raise ConfigurationError("batch_size must be >= 2 (the loss is a variance)")
        if self.steps < 0:
            raise ConfigurationError("steps must be >= 0")
        if not self.gamma > 0:
            raise ConfigurationError("gamma must be > 0")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be > 0")
        if self.window_size < 2:
            raise ConfigurationError("window_size must be >= 2")
        if self.episode_steps < 1:
            raise ConfigurationError("episode_steps must be >= 1")
        if not self.dt > 0:
            raise ConfigurationError("dt must be > 0")
        if self.chunk_size < 1 or self.workers < 1:
            raise ConfigurationError("chunk_size and workers must be >= 1")
        self.heston.validate()
        self.cliquet.validate(self.episode_steps)

    def to_dict(self) -> dict:
        h = self.heston
        return {
            "batch_size": self.batch_size,
            "steps": self.steps,
            "gamma": self.gamma,
            "use_tda": self.use_tda,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "window_size": self.window_size,
            "episode_steps": self.episode_steps,
            "heston": {
                "mu": h.mu, "v0": h.v0, "kappa": h.kappa, "theta": h.theta,
                "xi": h.xi, "rho": h.rho, "s0": h.s0, "dt": self.dt,
            },
            "cliquet": {"cap": self.cliquet.cap, "period": self.cliquet.period},
        }

    @classmethod
    def from_dict(cls, doc: dict, **overrides) -> "TrainConfig":
        unknown = set(doc) - set(_TOP_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        kw = {k: doc[k] for k in _TOP_KEYS[:8] if k in doc}
        heston = dict(doc.get("heston", {}))
        bad = set(heston) - set(_HESTON_KEYS)
        if bad:
            raise ConfigurationError(f"unknown heston keys: {sorted(bad)}")
        if "dt" in heston:
            kw["dt"] = float(heston.pop("dt"))
        kw["heston"] = HestonParams(**{k: float(v) for k, v in heston.items()})
        cliq = dict(doc.get("cliquet", {}))
        if set(cliq) - {"cap", "period"}:
            raise ConfigurationError(f"unknown cliquet keys: {sorted(set(cliq) - {'cap', 'period'})}")
        kw["cliquet"] = CliquetSpec(
            cap=float(cliq.get("cap", CliquetSpec.cap)), period=int(cliq.get("period", CliquetSpec.period))
        )
        kw.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(**kw)
        for f in fields(cfg):
            if f.name in ("batch_size", "steps", "seed", "window_size", "episode_steps"):
                setattr(cfg, f.name, int(getattr(cfg, f.name)))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path, **overrides) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()), **overrides)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass
class HedgeOutcome:
    pnl: np.ndarray
    liability: np.ndarray
    actions: np.ndarray

    @property
    def error(self) -> np.ndarray:
        return self.pnl - self.liability


# -- seeds -----------------------------------------------------------------

def batch_seed(seed: int, step: int) -> int:
    """Path seed for training step ``step``."""
    return int(np.random.SeedSequence([seed, 0x7472, step]).generate_state(1, np.uint64)[0])


def test_seed(seed: int) -> int:
    """Path seed for the out-of-sample test set of a run seeded with ``seed``."""
    return int(np.random.SeedSequence([seed, 0x7465]).generate_state(1, np.uint64)[0])


# -- features and PnL -------------------------------------------------------

def build_feature_batch(spot, variance, spec: CliquetSpec, use_tda: bool, window_size: int = 15,
                        scale=None) -> np.ndarray:
    """Feature tensor ``(B, T, F)`` for spot/variance arrays of shape ``(B, T+1)``.

    Row ``t`` holds ``(S_t, v_t, psi_t)`` and, with TDA, the rolling L1/L2
    norms of the window ending at ``t``. The terminal time ``T`` is not a
    decision time and is dropped.
    """
    s = np.asarray(spot, dtype=float)
    v = np.asarray(variance, dtype=float)
    if s.ndim != 2 or s.shape != v.shape:
        raise ShapeError("spot and variance must share shape (B, T+1)")
    psi = payout_series(s, spec)
    cols = [s, v, psi]
    if use_tda:
        l1, l2 = rolling_tda_batch(np.stack(cols, axis=-1), window_size, scale)
        cols += [l1, l2]
    return np.stack(cols, axis=-1)[:, :-1, :]


def build_features(spot, variance, spec: CliquetSpec, use_tda: bool, window_size: int = 15,
                   scale=None) -> np.ndarray:
    """Feature matrix ``(T, F)`` for one path."""
    s = np.asarray(spot, dtype=float)
    v = np.asarray(variance, dtype=float)
    if s.ndim != 1 or s.shape != v.shape:
        raise ShapeError("spot and variance must be 1-D series of equal length")
    return build_feature_batch(s[None], v[None], spec, use_tda, window_size, scale)[0]


def hedge_pnl(spot, actions):
    """Self-financing gains ``sum_t delta_t * (S_{t+1} - S_t)``, no costs or financing.

    Works on one path or along the last axis of a batch.
    """
    s = np.asarray(spot, dtype=float)
    a = np.asarray(actions, dtype=float)
    if a.shape[-1] != s.shape[-1] - 1 or a.shape[:-1] != s.shape[:-1]:
        raise ShapeError(f"actions {a.shape} do not match spot {s.shape}")
    out = np.sum(a * np.diff(s, axis=-1), axis=-1)
    return float(out) if out.ndim == 0 else out


def variance_loss(errors, gamma: float) -> float:
    """``gamma`` times the population variance of the hedging errors."""
    e = np.asarray(errors, dtype=float)
    if e.ndim != 1 or e.shape[0] < 2:
        raise DegenerateBatchError("variance loss needs at least 2 errors")
    d = e - e.mean()
    return float(gamma * np.mean(d * d))


# -- gradients --------------------------------------------------------------

def _chunks(n: int, size: int) -> list[slice]:
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]


def loss_and_grads(params: PolicyParams, features: np.ndarray, spot: np.ndarray,
                   liability: np.ndarray, gamma: float, chunk_size: int = 250,
                   workers: int = 1):
    """Variance loss of a batch and its gradient w.r.t. every parameter tensor.

    The batch is split into fixed chunks independent of ``workers``; chunk
    gradients are summed in chunk order, so the result does not depend on
    how many threads run.

    Returns
    -------
    loss : float
    grads : dict of ndarray
    outcome : HedgeOutcome
    """
    n = features.shape[0]
    if n < 2:
        raise DegenerateBatchError("batch must contain at least 2 paths")
    d_spot = np.diff(spot, axis=-1)
    parts = _chunks(n, chunk_size)

    def run(fn, items):
        if workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(fn, items))
        return [fn(it) for it in items]

    if len(parts) == 1:
        actions, cache = forward(params, features, keep_cache=True)
        caches = [cache]
    else:
        actions = np.concatenate(run(lambda sl: forward(params, features[sl])[0], parts))
        caches = None
    pnl = np.sum(actions * d_spot, axis=-1)
    err = pnl - liability
    loss = variance_loss(err, gamma)
    d_err = (2.0 * gamma / n) * (err - err.mean())
    d_actions = d_err[:, None] * d_spot

    def chunk_grads(i):
        sl = parts[i]
        cache = caches[i] if caches is not None else forward(params, features[sl], keep_cache=True)[1]
        return backward(params, cache, d_actions[sl])

    per_chunk = run(chunk_grads, list(range(len(parts))))
    grads = per_chunk[0]
    for g in per_chunk[1:]:
        for k in grads:
            grads[k] += g[k]
    return loss, grads, HedgeOutcome(pnl=pnl, liability=liability, actions=actions)


# -- optimizer --------------------------------------------------------------

def init_moments(params: PolicyParams | dict) -> dict:
    tensors = params.tensors if isinstance(params, PolicyParams) else params
    return {
        "m": {k: np.zeros_like(v) for k, v in tensors.items()},
        "v": {k: np.zeros_like(v) for k, v in tensors.items()},
    }


def adam_update(params: dict, grads: dict, moments: dict, step_index: int, learning_rate: float):
    """One bias-corrected Adam step; ``step_index`` counts from 1.

    Returns new ``(params, moments)`` dicts; inputs are not modified.
    """
    if set(params) != set(grads):
        raise ShapeError("params and grads have different tensor names")
    b1t = 1.0 - ADAM_BETA1 ** step_index
    b2t = 1.0 - ADAM_BETA2 ** step_index
    new_p, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ShapeError(f"{k}: gradient shape {g.shape} != parameter shape {p.shape}")
        m = ADAM_BETA1 * moments["m"][k] + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * moments["v"][k] + (1.0 - ADAM_BETA2) * g * g
        new_p[k] = p - learning_rate * (m / b1t) / (np.sqrt(v / b2t) + ADAM_EPS)
        new_m[k], new_v[k] = m, v
    return new_p, {"m": new_m, "v": new_v}


# -- training loop ----------------------------------------------------------

def simulate_batch(config: TrainConfig, seed: int, n_paths: int) -> PathSet:
    return simulate_paths(config.heston, n_paths, config.episode_steps, config.dt, seed)


def hedge_outcome(params: PolicyParams, paths: PathSet, spec: CliquetSpec, use_tda: bool,
                  window_size: int = 15, chunk_size: int = 5000) -> HedgeOutcome:
    """Run the policy on every path of a PathSet; no gradients."""
    actions = np.empty((paths.n_paths, paths.n_steps))
    for sl in _chunks(paths.n_paths, chunk_size):
        feats = build_feature_batch(paths.spot[sl], paths.variance[sl], spec, use_tda, window_size)
        actions[sl] = forward(params, feats)[0]
    pnl = hedge_pnl(paths.spot, actions)
    liability = payout_series(paths.spot, spec)[:, -1]
    return HedgeOutcome(pnl=np.atleast_1d(pnl), liability=liability, actions=actions)


def _global_norm(grads: dict) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def train_step(params: PolicyParams, moments: dict, config: TrainConfig, step: int):
    """One gradient step on a freshly simulated batch.

    ``step`` is the 0-based step index; it selects the batch seed and the
    Adam bias correction. Returns ``(params, moments, metrics)``.
    """
    paths = simulate_batch(config, batch_seed(config.seed, step), config.batch_size)
    feats = build_feature_batch(
        paths.spot, paths.variance, config.cliquet, config.use_tda, config.window_size
    )
    liability = payout_series(paths.spot, config.cliquet)[:, -1]
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported below
        loss, grads, outcome = loss_and_grads(
            params, feats, paths.spot, liability, config.gamma, config.chunk_size, config.workers
        )
    if not math.isfinite(loss):
        raise NumericDivergenceError(step, "loss")
    norm = _global_norm(grads)
    if not math.isfinite(norm):
        raise NumericDivergenceError(step, "gradient")
    if config.clip_norm is not None and norm > config.clip_norm:
        grads = {k: g * (config.clip_norm / norm) for k, g in grads.items()}
    new_tensors, moments = adam_update(params.tensors, grads, moments, step + 1, config.learning_rate)
    new_params = PolicyParams(params.feature_dim, params.width, params.n_cells, new_tensors)
    metrics = {
        "step": step,
        "loss": loss,
        "mean_abs_trade": float(np.mean(np.abs(outcome.actions))),
    }
    return new_params, moments, metrics


def save_checkpoint(path, params: PolicyParams, config: TrainConfig, moments: dict | None = None,
                    step: int = 0) -> None:
    extra = {"config": config.to_dict(), "step": step}
    if moments is not None:
        extra["adam"] = {
            "m": {k: v.tolist() for k, v in moments["m"].items()},
            "v": {k: v.tolist() for k, v in moments["v"].items()},
        }
    params.save(path, extra)


def load_checkpoint(path):
    """Return ``(params, moments or None, next_step, config dict or None)``."""
    doc = json.loads(Path(path).read_text())
    params = PolicyParams.from_dict(doc)
    moments = None
    if "adam" in doc:
        moments = {
            part: {k: np.array(v, dtype=np.float64).reshape(params[k].shape)
                   for k, v in doc["adam"][part].items()}
            for part in ("m", "v")
        }
    return params, moments, int(doc.get("step", 0)), doc.get("config")


def write_log(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("step,loss,mean_abs_trade\n")
        for r in rows:
            fh.write(f"{r['step']},{r['loss']!r},{r['mean_abs_trade']!r}\n")


def read_log(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {"step": int(r["step"]), "loss": float(r["loss"]), "mean_abs_trade": float(r["mean_abs_trade"])}
            for r in csv.DictReader(fh)
        ]


def train(config: TrainConfig, params: PolicyParams | None = None, *, checkpoint_path=None,
          checkpoint_every: int = 0, resume_from=None, log_every: int = 100):
    """Run ``config.steps`` training steps.

    Parameters
    ----------
    params : PolicyParams, optional
        Starting point; defaults to ``init_params(config.feature_dim, config.seed)``.
    checkpoint_path, checkpoint_every
        Write a resumable checkpoint every ``checkpoint_every`` steps (0 = never).
    resume_from : path, optional
        Continue from a checkpoint written by this function; the returned log
        only covers the resumed steps.

    Returns
    -------
    params : PolicyParams
    log_rows : list of dict with keys ``step, loss, mean_abs_trade``
    """
    config.validate()
    start = 0
    moments = None
    if resume_from is not None:
        params, moments, start, _ = load_checkpoint(resume_from)
    if params is None:
        params = init_params(config.feature_dim, config.seed)
    if params.feature_dim != config.feature_dim:
        raise ConfigurationError(
            f"network expects {params.feature_dim} features, config gives {config.feature_dim}"
        )
    if moments is None:
        moments = init_moments(params)
    rows = []
    for step in range(start, config.steps):
        params, moments, metrics = train_step(params, moments, config, step)
        rows.append(metrics)
        if log_every and (step + 1) % log_every == 0:
            log.info("step %d loss %.6g mean|delta| %.4f", step, metrics["loss"], metrics["mean_abs_trade"])
        if checkpoint_path and checkpoint_every and (step + 1) % checkpoint_every == 0:
            save_checkpoint(checkpoint_path, params, config, moments, step + 1)
    return params, rows
