"""SGD with momentum and decoupled-into-gradient weight decay."""

from __future__ import annotations

import numpy as np


def sgd_step(param, grad, velocity, lr, momentum=0.9, weight_decay=1e-3):
    """One in-place update: g' = g + wd*w; v' = m*v + g'; w' = w - lr*v'."""
    if velocity.shape != param.shape:
        raise ValueError(f"velocity shape {velocity.shape} != param shape {param.shape}")
    g = grad + weight_decay * param
    velocity *= momentum
    velocity += g
    param -= lr * velocity


class SGD:
    """Momentum optimizer over a list of parameter tensors."""

    def __init__(self, params, lr, momentum=0.9, weight_decay=1e-3):
        if not lr > 0:
            raise ValueError(f"lr must be > 0, got {lr}")
        self.params = list(params)
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        for p, v in zip(self.params, self.velocity):
            if p.grad is None:
                continue
            sgd_step(p.data, p.grad, v, self.lr, self.momentum, self.weight_decay)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()
