"""Named parameter registry, Adam, and the step-decayed learning rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, parameter


class TrainingError(RuntimeError):
    pass


@dataclass
class AdamSlots:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


class ParameterStore:
    """Ordered name -> parameter map with per-parameter Adam slots."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.slots: dict[str, AdamSlots] = {}
        self.frozen: dict[str, Tensor] = {}  # checkpointed but never updated

    def add(self, name: str, value) -> Tensor:
        if name in self.params:
            raise KeyError(f"parameter {name!r} registered twice")
        p = parameter(value, name=name)
        self.params[name] = p
        self.slots[name] = AdamSlots(np.zeros_like(p.data), np.zeros_like(p.data))
        return p

    def add_frozen(self, name: str, value) -> Tensor:
        if name in self.params or name in self.frozen:
            raise KeyError(f"parameter {name!r} registered twice")
        t = Tensor(np.array(value, dtype=np.float64), name=name)
        self.frozen[name] = t
        return t

    def adopt(self, name: str, p: Tensor) -> Tensor:
        """Register an existing parameter object (e.g. one owned by another store)."""
        if name in self.params:
            if self.params[name] is p:
                return p
            raise KeyError(f"parameter {name!r} registered twice")
        self.params[name] = p
        self.slots[name] = AdamSlots(np.zeros_like(p.data), np.zeros_like(p.data))
        return p

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def items(self):
        return self.params.items()

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def num_values(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.data for k, p in self.params.items()}

    def full_state(self) -> dict[str, np.ndarray]:
        return {**self.state(), **{k: t.data for k, t in self.frozen.items()}}

    def load_state(self, state: dict[str, np.ndarray], strict: bool = True):
        for name, p in list(self.params.items()) + list(self.frozen.items()):
            if name not in state:
                if strict:
                    raise KeyError(f"missing parameter {name!r}")
                continue
            value = np.asarray(state[name])
            if value.shape != p.data.shape:
                raise ValueError(f"parameter {name!r}: shape {value.shape} != {p.data.shape}")
            p.data[...] = value


@dataclass
class Adam:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = None

    def step(self, store: ParameterStore, lr: float) -> ParameterStore:
        """Apply one bias-corrected Adam update, then zero all gradients."""
        grads = {}
        for name, p in store.items():
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient in parameter {name!r}")
            grads[name] = g
        if self.clip_norm is not None:
            total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if total > self.clip_norm:
                grads = {k: g * (self.clip_norm / total) for k, g in grads.items()}
        for name, p in store.items():
            s = store.slots[name]
            g = grads[name]
            s.step += 1
            s.m = self.beta1 * s.m + (1 - self.beta1) * g
            s.v = self.beta2 * s.v + (1 - self.beta2) * g * g
            mhat = s.m / (1 - self.beta1 ** s.step)
            vhat = s.v / (1 - self.beta2 ** s.step)
            p.data -= lr * mhat / (np.sqrt(vhat) + self.eps)
        store.zero_grad()
        return store


def lr_schedule(step: int, base_lr: float = 1e-3, decay: float = 1e-3, every: int = 100) -> float:
    """`base_lr` shrunk by the factor (1 - decay) once per `every` steps."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return base_lr * (1.0 - decay) ** (step // every)


@dataclass
class LRSchedule:
    base_lr: float = 1e-3
    decay: float = 1e-3
    every: int = 100

    def __call__(self, step: int) -> float:
        return lr_schedule(step, self.base_lr, self.decay, self.every)
