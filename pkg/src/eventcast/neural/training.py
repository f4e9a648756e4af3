"""Loss, optimizer, and the training loop.

Cross-entropy is taken in base 2 and the positive class is weighted by
the inverse of its share of the training labels, so a rare-event day
contributes as much gradient as the common background days.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import NetSpec, backward, forward, init_params, predict_proba

_CLAMP = 1e-12
_LN2 = np.log(2.0)


class TrainingDiverged(RuntimeError):
    """Raised when an epoch produces a non-finite training loss."""


def _clamped(p):
    return np.clip(np.asarray(p, dtype=float), _CLAMP, 1.0 - _CLAMP)


def bce(y, p) -> float:
    """Mean binary cross-entropy in bits; p clamped away from {0,1}."""
    y = np.asarray(y, dtype=float)
    q = _clamped(p)
    terms = y * np.log2(q) + (1.0 - y) * np.log2(1.0 - q)
    return float(-np.mean(terms))


def weighted_bce(y, p, alpha) -> float:
    """Class-weighted cross-entropy in bits.

    alpha is the positive-class fraction of the training labels; the
    positive term is scaled by (1 - alpha) and the negative term by
    alpha.  alpha = 0.5 gives exactly half the unweighted loss.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    y = np.asarray(y, dtype=float)
    q = _clamped(p)
    terms = (1.0 - alpha) * (y * np.log2(q)) + alpha * ((1.0 - y) * np.log2(1.0 - q))
    return float(-np.mean(terms))


def logit_gradient(y, p, alpha) -> np.ndarray:
    """d(weighted_bce)/d(logit) per row, mean-reduced over the batch."""
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    n = y.shape[0]
    return (alpha * (1.0 - y) * p - (1.0 - alpha) * y * (1.0 - p)) / (n * _LN2)


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-4
    decay: float = 1e-6
    batch_size: int = 32
    epochs: int = 100
    momentum: float = 0.9

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.decay < 0 or not 0.0 <= self.momentum < 1.0:
            raise ValueError("decay must be >= 0 and momentum in [0,1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch size and epochs must be >= 1")


class NesterovSGD:
    """SGD with an inverse-time rate schedule and Nesterov momentum.

    The caller evaluates gradients at the look-ahead point theta + mu*v;
    step() then applies v <- mu*v - lr_t*g and theta <- theta + v with
    lr_t = lr / (1 + decay * iteration), iteration counting from 0.
    """

    def __init__(self, config: OptimizerConfig, params: dict):
        self.config = config
        self.velocity = {k: np.zeros_like(v) for k, v in params.items()}
        self.iteration = 0

    def lookahead(self, params: dict) -> dict:
        mu = self.config.momentum
        if mu == 0.0:
            return params
        return {k: params[k] + mu * self.velocity[k] for k in params}

    def step(self, params: dict, grads: dict) -> None:
        lr_t = self.config.learning_rate / (
            1.0 + self.config.decay * self.iteration)
        mu = self.config.momentum
        for k in params:
            v = mu * self.velocity[k] - lr_t * grads[k]
            self.velocity[k] = v
            params[k] += v
        self.iteration += 1


def train_net(spec: NetSpec, X, y, alpha, opt: OptimizerConfig, seed,
              shuffle=True):
    """Train to convergence or abort on divergence.

    Returns (params, per-epoch training losses).  Deterministic in seed:
    one generator drives initialization then the per-epoch shuffles.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = X.shape[0]
    if n < 1:
        raise ValueError("no training rows")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    params = init_params(spec, X.shape[1:], rng)
    sgd = NesterovSGD(opt, params)
    losses: list[float] = []
    for epoch in range(opt.epochs):
        order = rng.permutation(n) if shuffle else np.arange(n)
        for start in range(0, n, opt.batch_size):
            rows = order[start:start + opt.batch_size]
            look = sgd.lookahead(params)
            p, cache = forward(spec, look, X[rows])
            dz = logit_gradient(y[rows], p, alpha)
            grads = backward(spec, look, cache, dz)
            sgd.step(params, grads)
        loss = weighted_bce(y, predict_proba(spec, params, X), alpha)
        if not np.isfinite(loss):
            raise TrainingDiverged(
                f"non-finite training loss at epoch {epoch + 1}/{opt.epochs}")
        losses.append(loss)
    return params, losses
