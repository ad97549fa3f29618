"""Central finite-difference gradient verification."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import ops
from .tensor import Tape, Tensor, no_grad


def grad_check(fn: Callable[..., Tensor], inputs: Sequence[Tensor], eps: float = 1e-6,
               max_checks: int | None = None, seed: int = 0) -> float:
    """Largest elementwise relative error between tape and finite-difference grads.

    The scalar objective is ``sum(fn(*inputs) * R)`` for a fixed random ``R``,
    which exercises every output element.  Relative error is
    ``|a - n| / max(1, |a|, |n|)``.  With ``max_checks`` only that many
    randomly chosen elements per input are perturbed.
    """
    for t in inputs:
        if t.dtype != np.float64:
            raise TypeError("grad_check requires float64 inputs; build them under double_precision()")
    rng = np.random.default_rng(seed)
    saved_flags = [t.requires_grad for t in inputs]
    saved_grads = [t.grad for t in inputs]
    try:
        for t in inputs:
            t.requires_grad = True
            t.grad = None
        with Tape() as tape:
            out = fn(*inputs)
            weights = rng.standard_normal(out.shape)
            loss = ops.sum(ops.mul(out, Tensor(weights, dtype=np.float64)))
        tape.backward(loss)
        analytic = [np.zeros(t.shape) if t.grad is None else t.grad.copy() for t in inputs]

        def objective() -> float:
            with no_grad():
                return float((fn(*inputs).data * weights).sum())

        worst = 0.0
        for t, grad in zip(inputs, analytic):
            flat = t.data.reshape(-1)
            if max_checks is None or max_checks >= flat.size:
                picks = range(flat.size)
            else:
                picks = np.sort(rng.choice(flat.size, size=max_checks, replace=False))
            for i in picks:
                orig = flat[i]
                flat[i] = orig + eps
                plus = objective()
                flat[i] = orig - eps
                minus = objective()
                flat[i] = orig
                numeric = (plus - minus) / (2 * eps)
                a = grad.reshape(-1)[i]
                err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
                worst = max(worst, err)
        return worst
    finally:
        for t, flag, g in zip(inputs, saved_flags, saved_grads):
            t.requires_grad = flag
            t.grad = g
