"""AdaGrad minibatch loop shared by the CRF and BiLSTM-CRF trainers."""
from __future__ import annotations

import logging
from typing import Callable, Sequence

import numpy as np

from .errors import NonFiniteLoss

log = logging.getLogger(__name__)


class AdaGrad:
    """Per-coordinate step ``lr * g / (sqrt(sum g^2) + eps)``."""

    def __init__(self, params: dict[str, np.ndarray], lr: float, eps: float = 1e-8):
        self.lr = lr
        self.eps = eps
        self.accum = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for k, p in params.items():
            g = grads[k]
            acc = self.accum[k]
            acc += g * g
            p -= self.lr * g / (np.sqrt(acc) + self.eps)


def minibatch_adagrad(
    params: dict[str, np.ndarray],
    data: Sequence,
    loss_and_grad: Callable[[list, float], tuple[float, dict[str, np.ndarray]]],
    config,
) -> list[float]:
    """Run ``config.epochs`` passes, updating ``params`` in place.

    ``loss_and_grad(batch, wd)`` must return the batch loss including
    ``wd/2 * |w|^2`` and the matching gradient. Each batch gets ``|B|/N`` of the
    configured weight decay so an epoch covers the full objective once. Returns
    the per-epoch loss averaged over examples.
    """
    rng = np.random.default_rng(config.seed)
    n = len(data)
    opt = AdaGrad(params, config.learning_rate)
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        for b, lo in enumerate(range(0, n, config.batch_size)):
            batch = [data[i] for i in order[lo:lo + config.batch_size]]
            loss, grads = loss_and_grad(batch, config.weight_decay * len(batch) / n)
            if not np.isfinite(loss):
                worst = max((float(np.abs(p).max(initial=0.0)) for p in params.values()), default=0.0)
                raise NonFiniteLoss(f"epoch {epoch + 1}, batch {b}: loss={loss}, max |param|={worst:.3g}")
            opt.step(params, grads)
            total += loss
        trace.append(total / max(n, 1))
        log.info("epoch %d loss %.6f", epoch + 1, trace[-1])
    return trace
