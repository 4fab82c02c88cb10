"""Inverted dropout with per-sequence variational masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad


@dataclass
class DropoutPlan:
    embedding: float = 0.5
    hidden: float = 0.2
    recurrent: float = 0.4

    def scaled(self, factor: float) -> "DropoutPlan":
        return DropoutPlan(self.embedding * factor, self.hidden * factor, self.recurrent * factor)


class Dropout:
    """Samples masks from an owned generator; identity when not training."""

    def __init__(self, plan: DropoutPlan, rng: np.random.Generator):
        self.plan = plan
        self.rng = rng
        self.training = False

    def mask(self, shape, rate: float) -> np.ndarray | None:
        if not self.training or rate <= 0:
            return None
        keep = 1.0 - rate
        return (self.rng.random(shape) < keep) / keep

    def apply(self, x: ad.Tensor, rate: float, shared_axis: int | None = None) -> ad.Tensor:
        """Drop units of `x`; with `shared_axis` one mask is reused along that axis."""
        shape = list(x.shape)
        if shared_axis is not None:
            shape[shared_axis] = 1
        m = self.mask(tuple(shape), rate)
        return x if m is None else ad.mul(x, m)

    def recurrent_mask(self, batch: int, hidden: int) -> np.ndarray | None:
        """One mask per sequence, applied to h_{t-1} at every timestep."""
        return self.mask((batch, hidden), self.plan.recurrent)
