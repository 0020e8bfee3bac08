"""Adam, plateau learning-rate decay, and early stopping."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError


class Adam:
    """Bias-corrected Adam over a fixed parameter list."""

    def __init__(self, params, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise InvalidInputError("learning rate must be positive")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads) -> None:
        if len(grads) != len(self.params):
            raise InvalidInputError("gradient list does not match parameters")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience``
    consecutive epochs without a validation-loss improvement of at least
    ``min_delta``; the wait counter resets after each decay."""

    def __init__(self, lr: float, factor: float = 0.25, patience: int = 5,
                 min_delta: float = 1e-4):
        if not 0.0 < factor < 1.0:
            raise InvalidInputError("factor must be in (0,1)")
        if patience < 1:
            raise InvalidInputError("patience must be >= 1")
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.min_delta = min_delta
        self.best = np.inf
        self.wait = 0

    def step(self, val_loss: float) -> float:
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.wait = 0
        else:
            self.wait += 1
            if self.wait >= self.patience:
                self.lr *= self.factor
                self.wait = 0
        return self.lr


class EarlyStopping:
    """Stop after ``patience`` epochs without improvement; remembers which
    epoch was best so the trainer can restore that snapshot."""

    def __init__(self, patience: int = 15, min_delta: float = 1e-4):
        if patience < 1:
            raise InvalidInputError("patience must be >= 1")
        self.patience = patience
        self.min_delta = min_delta
        self.best = np.inf
        self.best_epoch = -1
        self.wait = 0
        self._epoch = -1

    def step(self, val_loss: float) -> bool:
        """Returns True when training should stop."""
        self._epoch += 1
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.best_epoch = self._epoch
            self.wait = 0
            return False
        self.wait += 1
        return self.wait >= self.patience

    @property
    def improved(self) -> bool:
        return self.wait == 0
