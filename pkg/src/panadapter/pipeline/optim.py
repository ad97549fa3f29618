"""Adam with global-norm clipping; never touches frozen parameters."""

from __future__ import annotations

import math

import numpy as np

from ..gradcore import Parameter


class Adam:
    def __init__(self, params: list[Parameter], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = [p for p in params if p.trainable]
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m = {p.name or str(i): np.zeros_like(p.data) for i, p in enumerate(self.params)}
        self.v = {k: np.zeros_like(m) for k, m in self.m.items()}

    def _key(self, i: int, p: Parameter) -> str:
        return p.name or str(i)

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for i, p in enumerate(self.params):
            if not p.trainable or p.grad is None:
                continue
            key = self._key(i, p)
            g = p.grad
            m = self.m[key]
            v = self.v[key]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data = p.data - (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.data.dtype)

    def state(self) -> dict:
        return {"t": self.t, "m": dict(self.m), "v": dict(self.v)}

    def load_state(self, state: dict) -> None:
        self.t = int(state["t"])
        for key in self.m:
            self.m[key] = np.array(state["m"][key], dtype=self.m[key].dtype)
            self.v[key] = np.array(state["v"][key], dtype=self.v[key].dtype)


def clip_grad_norm(params: list[Parameter], max_norm: float) -> float:
    """Rescale grads in place so their global L2 norm is at most ``max_norm``."""
    grads = [p.grad for p in params if p.trainable and p.grad is not None]
    total = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            if p.trainable and p.grad is not None:
                p.grad = p.grad * np.asarray(scale, dtype=p.grad.dtype)
    return total


class DivergenceError(RuntimeError):
    pass


def batch_schedule(n: int, steps: int, batch: int, seed: int) -> list[np.ndarray]:
    """Index batches drawn from concatenated seeded permutations of ``range(n)``."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xBA7C]))
    batch = min(batch, n)
    pool = np.array([], dtype=np.int64)
    out = []
    for _ in range(steps):
        while len(pool) < batch:
            pool = np.concatenate([pool, rng.permutation(n)])
        out.append(pool[:batch])
        pool = pool[batch:]
    return out


def run_optimizer(params: list[Parameter], loss_at, n: int, steps: int, batch: int, lr: float,
                  seed: int, clip: float = 1.0, optimizer: Adam | None = None,
                  on_step=None) -> tuple[list[float], Adam]:
    """Minimise ``loss_at(indices)`` (a scalar Tensor built on the active tape).

    Aborts with :class:`DivergenceError` if the loss or a forward value is
    non-finite.
    """
    from ..gradcore import Tape

    params = [p for p in params if p.trainable]
    opt = optimizer or Adam(params, lr=lr)
    history = []
    for step, idx in enumerate(batch_schedule(n, steps, batch, seed)):
        for p in params:
            p.grad = None
        try:
            with Tape() as tape:
                loss = loss_at(idx)
        except FloatingPointError as exc:
            raise DivergenceError(f"non-finite forward at step {step}: {exc}") from exc
        value = loss.item()
        if not math.isfinite(value):
            raise DivergenceError(f"loss became {value} at step {step}")
        tape.backward(loss)
        clip_grad_norm(params, clip)
        opt.step()
        history.append(value)
        if on_step is not None:
            on_step(step, value)
    return history, opt
