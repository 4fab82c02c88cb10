"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .autodiff import Tensor


def max_relative_error(fn: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-6,
                       seed_grad: np.ndarray | None = None, max_entries: int | None = None,
                       rng: np.random.Generator | None = None) -> float:
    """Compare analytic and numeric gradients of sum(seed * fn()) w.r.t. `params`.

    Error per entry is |a - n| / max(1, |a|); the maximum over checked entries is returned.
    """
    out = fn()
    seed = np.ones_like(out.data) if seed_grad is None else seed_grad
    for p in params:
        p.zero_grad()
    out.backward(seed.copy())
    analytic = [p.grad.copy() for p in params]

    def objective():
        return float(np.sum(fn().data * seed))

    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = (rng or np.random.default_rng(0)).choice(flat.size, max_entries, replace=False)
        for k in idx:
            old = flat[k]
            flat[k] = old + eps
            up = objective()
            flat[k] = old - eps
            down = objective()
            flat[k] = old
            num = (up - down) / (2 * eps)
            ana = a.reshape(-1)[k]
            worst = max(worst, abs(ana - num) / max(1.0, abs(ana)))
    for p in params:
        p.zero_grad()
    return worst
