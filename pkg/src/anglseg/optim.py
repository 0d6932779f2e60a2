"""Momentum SGD and the polynomial learning-rate schedule."""

import numpy as np


class OptimError(RuntimeError):
    """Raised when a step would apply a non-finite gradient."""


def poly_lr(base_lr, iteration, total_iterations, power=0.9):
    """base_lr * (1 - iteration/total)^power; base_lr at 0, zero at the end."""
    frac = 1.0 - iteration / total_iterations
    return base_lr * frac ** power


class SgdMomentum:
    """In-place momentum SGD over a named parameter set.

    Velocity follows v = momentum*v + (grad + weight_decay*w) and the update
    is w -= lr*v, so weight decay is exactly an additive gradient term.
    Gradients are cleared after a successful step; a NaN or Inf gradient
    aborts the step before any parameter is touched.
    """

    def __init__(self, params, lr, momentum=0.9, weight_decay=0.0):
        self.params = dict(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        for name, p in self.params.items():
            if p.grad is None:
                raise OptimError(f"parameter '{name}' has no gradient; "
                                 "run backward() before step()")
            if not np.isfinite(p.grad).all():
                raise OptimError(f"non-finite gradient in parameter '{name}' "
                                 f"(|grad|max={np.abs(p.grad).max()})")
        for name, p in self.params.items():
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            v = self.velocity[name]
            v *= self.momentum
            v += g
            p.data -= p.data.dtype.type(lr) * v
        self.zero_grad()

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def grad_norms(self):
        """Per-parameter L2 gradient norms, for divergence diagnostics."""
        return {name: (float(np.linalg.norm(p.grad)) if p.grad is not None else None)
                for name, p in self.params.items()}
