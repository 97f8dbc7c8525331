"""LARS, cosine annealing, EMA tracking and early stopping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .encoder import is_bias


@dataclass
class LARSConfig:
    base_lr: float = 0.1
    trust_coefficient: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 1e-6
    exclude_bias_from_adaptation: bool = False

    def __post_init__(self):
        if not self.base_lr >= 0:
            raise ValueError(f"base_lr must be >= 0, got {self.base_lr}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not self.trust_coefficient > 0:
            raise ValueError(f"trust_coefficient must be > 0, got {self.trust_coefficient}")


@dataclass
class EMAConfig:
    momentum: float = 0.99

    def __post_init__(self):
        if not 0 <= self.momentum < 1:
            raise ValueError(f"EMA momentum must lie in [0, 1), got {self.momentum}")


def cosine_lr(epoch: int, base_lr: float = 0.1, t_max: int = 10) -> float:
    """Closed-form cosine annealing; keeps following the cosine past ``t_max``."""
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * epoch / t_max))


@dataclass
class LARSState:
    buffers: dict[str, np.ndarray] = field(default_factory=dict)


def lars_step(params: dict, grads: dict, cfg: LARSConfig, state: LARSState, lr: float, exclude=None) -> None:
    """One in-place LARS update of ``params``.

    ``exclude(name)`` decides which tensors skip the trust-ratio adaptation;
    by default biases do when ``cfg.exclude_bias_from_adaptation`` is set.
    """
    if exclude is None:
        exclude = is_bias if cfg.exclude_bias_from_adaptation else (lambda name: False)
    for name, w in params.items():
        g = grads[name]
        if g.shape != w.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {w.shape}")
        g = g + cfg.weight_decay * w
        ratio = 1.0
        if not exclude(name):
            w_norm = np.linalg.norm(w)
            g_norm = np.linalg.norm(g)
            if w_norm > 0 and g_norm > 0:
                ratio = cfg.trust_coefficient * w_norm / g_norm
        buf = state.buffers.get(name)
        if buf is None:
            buf = np.zeros_like(w)
        buf = cfg.momentum * buf + (ratio * lr) * g
        state.buffers[name] = buf
        w -= buf


def ema_update(teacher: dict, student: dict, m: float) -> None:
    """teacher <- m * teacher + (1 - m) * student, in place, for every teacher tensor."""
    for name, t in teacher.items():
        s = student[name]
        if s.shape != t.shape:
            raise ValueError(f"{name}: teacher shape {t.shape} != student shape {s.shape}")
        t *= m
        t += (1.0 - m) * s


@dataclass
class EarlyStopper:
    """Stop once the monitored value has not improved for ``patience`` consecutive epochs."""

    patience: int = 10
    best: float = math.inf
    best_epoch: int = -1
    bad_epochs: int = 0

    def update(self, epoch: int, value: float) -> bool:
        """Record ``value``; return True when training should stop."""
        if value < self.best:
            self.best, self.best_epoch, self.bad_epochs = value, epoch, 0
        else:
            self.bad_epochs += 1
        return self.bad_epochs >= self.patience
