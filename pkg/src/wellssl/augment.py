"""Stochastic views of an interval: jittering and window slicing."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

DEFAULT_SIGMA = 0.03
WINDOW_SIZES = tuple(range(25, 95, 5))
# best window sizes per selection criterion
BYOL_WINDOW = 85
BT_WINDOW_ARI = 50
BT_WINDOW_GEO = 65


class AugmentConfigError(ValueError):
    pass


class Kind(str, Enum):
    JITTER = "jitter"
    WINDOW_SLICE = "window_slice"


class SigmaMode(str, Enum):
    FIXED = "fixed"
    PER_FEATURE = "per_feature"
    PER_BATCH = "per_batch"


@dataclass(frozen=True)
class AugmentSpec:
    kind: Kind = Kind.WINDOW_SLICE
    sigma_mode: SigmaMode = SigmaMode.FIXED
    sigma: float = DEFAULT_SIGMA
    window_size: int = BT_WINDOW_ARI
    strict_grid: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "sigma_mode", SigmaMode(self.sigma_mode))
        if self.sigma < 0:
            raise AugmentConfigError(f"jitter sigma must be >= 0, got {self.sigma}")
        if self.kind is Kind.WINDOW_SLICE and self.strict_grid and self.window_size not in WINDOW_SIZES:
            raise AugmentConfigError(f"window_size must be one of 25, 30, ..., 90; got {self.window_size}")


def resolve_sigma(x: np.ndarray, spec: AugmentSpec, batch_std: np.ndarray | None = None) -> np.ndarray:
    """Per-feature noise scale for one interval."""
    d = x.shape[-1]
    if spec.sigma_mode is SigmaMode.FIXED:
        sigma = np.full(d, spec.sigma)
    elif spec.sigma_mode is SigmaMode.PER_FEATURE:
        sigma = x.std(axis=0)
    else:
        if batch_std is None:
            raise AugmentConfigError("per-batch sigma requires the batch std from the caller")
        sigma = np.asarray(batch_std, dtype=float)
    if np.any(sigma < 0):
        raise AugmentConfigError("negative jitter sigma")
    return sigma


def jitter(x, spec: AugmentSpec, rng: np.random.Generator, batch_std=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    sigma = resolve_sigma(x, spec, batch_std)
    return x + rng.standard_normal(x.shape) * sigma


def resample(segment: np.ndarray, length: int) -> np.ndarray:
    """Linearly interpolate each column of ``segment`` onto ``length`` evenly spaced points."""
    w = segment.shape[0]
    if w == length:
        return segment.copy()
    pos = np.linspace(0.0, w - 1, length)
    lo = np.minimum(np.floor(pos).astype(int), w - 2)
    frac = (pos - lo)[:, None]
    return segment[lo] + frac * (segment[lo + 1] - segment[lo])


def window_slice(x, w: int, rng: np.random.Generator, start: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    l = x.shape[0]
    if not 2 <= w <= l:
        raise AugmentConfigError(f"window size must lie in [2, {l}], got {w}")
    s = int(rng.integers(0, l - w + 1)) if start is None else start
    return resample(x[s : s + w], l)


def batch_std(batch: np.ndarray) -> np.ndarray:
    """Per-feature std pooled over every row of every interval in the batch."""
    return batch.reshape(-1, batch.shape[-1]).std(axis=0)


def default_pair_specs(method: str, window_size: int | None = None) -> tuple[AugmentSpec, AugmentSpec]:
    if method == "byol":
        w = BYOL_WINDOW if window_size is None else window_size
        return (
            AugmentSpec(Kind.WINDOW_SLICE, window_size=w),
            AugmentSpec(Kind.JITTER, sigma_mode=SigmaMode.PER_BATCH),
        )
    if method == "barlow_twins":
        w = BT_WINDOW_ARI if window_size is None else window_size
        spec = AugmentSpec(Kind.WINDOW_SLICE, window_size=w)
        return spec, spec
    raise AugmentConfigError(f"unknown method {method!r}")


def apply(x: np.ndarray, spec: AugmentSpec, rng: np.random.Generator, batch_sigma=None) -> np.ndarray:
    if spec.kind is Kind.JITTER:
        return jitter(x, spec, rng, batch_sigma)
    return window_slice(x, spec.window_size, rng)


def make_view_pair(x, method: str, specs=None, rng=None, batch_sigma=None):
    """Two augmented views of one interval (values matrix or Interval)."""
    x = getattr(x, "values", x)
    specs = specs or default_pair_specs(method)
    if batch_sigma is None and any(s.sigma_mode is SigmaMode.PER_BATCH for s in specs if s.kind is Kind.JITTER):
        batch_sigma = x.std(axis=0)
    return apply(x, specs[0], rng, batch_sigma), apply(x, specs[1], rng, batch_sigma)


def item_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    """Independent stream for one batch item, derived from (seed, epoch, item index)."""
    return np.random.default_rng([seed, epoch, index])


def make_view_batch(batch: np.ndarray, specs, seed: int, epoch: int, indices) -> tuple[np.ndarray, np.ndarray]:
    """Views for a (N, l, d) batch; item i draws from ``item_rng(seed, epoch, indices[i])``."""
    sigma = batch_std(batch)
    va = np.empty_like(batch)
    vb = np.empty_like(batch)
    for i, (x, idx) in enumerate(zip(batch, indices)):
        rng = item_rng(seed, epoch, int(idx))
        va[i] = apply(x, specs[0], rng, sigma)
        vb[i] = apply(x, specs[1], rng, sigma)
    return va, vb
