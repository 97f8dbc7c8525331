"""Seeded synthetic well-log datasets with planted regimes, gaps and sensor errors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import FEATURES
from .ingest import WellLogTable

# (baseline mean, within-regime std) per feature
BASELINE = {"DRHO": (0.02, 0.01), "DENS": (2.4, 0.05), "GR": (75.0, 15.0), "DTC": (90.0, 10.0)}
# features that carry the regime signal; GR is normalized per (well, formation) so a GR shift would vanish
SIGNAL_FEATURES = ("DRHO", "DENS", "DTC")
BIT_SIZE = 8.5
DEPTH_STEP = 0.1524


@dataclass
class SynthConfig:
    n_wells: int = 40
    samples_per_well: int = 1000
    n_regimes: int = 4
    regime_separation: float = 6.0
    missing_rate: float = 0.1
    sensor_error_rate: float = 0.02
    well_offset: float = 0.5
    ar_coefficient: float = 0.9
    formation_block: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.n_regimes < 2:
            raise ValueError("n_regimes must be >= 2")
        if self.regime_separation < 0:
            raise ValueError("regime_separation must be >= 0")
        if not 0 <= self.missing_rate < 1:
            raise ValueError("missing_rate must lie in [0, 1)")
        if not 0 <= self.sensor_error_rate <= 1:
            raise ValueError("sensor_error_rate must lie in [0, 1]")
        if self.n_wells < 1 or self.samples_per_well < 2:
            raise ValueError("need at least one well with two samples")
        if not 0 <= self.ar_coefficient < 1:
            raise ValueError("ar_coefficient must lie in [0, 1)")


def regime_directions(n_regimes: int, dim: int = len(SIGNAL_FEATURES), seed: int = 0) -> np.ndarray:
    """Unit-free regime mean offsets whose closest pair is exactly 1 apart.

    Vertices of a regular simplex; if it needs more than ``dim`` axes it is
    projected onto a seeded random ``dim``-dimensional subspace first.
    """
    centered = np.eye(n_regimes) - 1.0 / n_regimes
    # orthonormal coordinates of the (n_regimes - 1)-dim simplex
    u, s, _ = np.linalg.svd(centered)
    coords = u[:, : n_regimes - 1] * s[: n_regimes - 1]
    if coords.shape[1] > dim:
        q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((coords.shape[1], dim)))
        coords = coords @ q
    else:
        coords = np.pad(coords, ((0, 0), (0, dim - coords.shape[1])))
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    return coords / dist[~np.eye(n_regimes, dtype=bool)].min()


def _ar1(rng, n, phi, mean, std):
    eps = rng.standard_normal(n) * std * np.sqrt(1.0 - phi * phi)
    x = np.empty(n)
    x[0] = rng.standard_normal() * std
    for t in range(1, n):
        x[t] = phi * x[t - 1] + eps[t]
    return x + mean


def generate(cfg: SynthConfig) -> list[WellLogTable]:
    rng = np.random.default_rng(cfg.seed)
    dirs = regime_directions(cfg.n_regimes, seed=cfg.seed)
    regimes = rng.permutation(np.arange(cfg.n_wells) % cfg.n_regimes)
    n = cfg.samples_per_well
    tables = []
    for w in range(cfg.n_wells):
        regime = int(regimes[w])
        curves, mask = {}, {}
        for name in FEATURES:
            base, std = BASELINE[name]
            mean = base + cfg.well_offset * std * rng.standard_normal()
            if name in SIGNAL_FEATURES:
                mean += cfg.regime_separation * std * dirs[regime, SIGNAL_FEATURES.index(name)]
            x = _ar1(rng, n, cfg.ar_coefficient, mean, std)
            present = rng.random(n) >= cfg.missing_rate
            if not present.any():
                present[0] = True
            curves[name] = np.where(present, x, np.nan)
            mask[name] = present
        bs = np.full(n, BIT_SIZE)
        cali = BIT_SIZE + np.clip(rng.normal(0.0, 0.05, n), -0.3, 0.3)
        err = rng.random(n) < cfg.sensor_error_rate
        cali[err] = BIT_SIZE + rng.choice([-1.0, 1.0], err.sum()) * rng.uniform(0.5, 2.0, err.sum())
        curves["CALI"], curves["BS"] = cali, bs
        mask["CALI"] = mask["BS"] = np.ones(n, dtype=bool)
        top = 1000.0 + 10.0 * rng.integers(0, 200)
        blocks = np.arange(n) // cfg.formation_block
        tables.append(
            WellLogTable(
                well_id=f"W{w:03d}",
                depth=top + DEPTH_STEP * np.arange(n),
                curves=curves,
                mask=mask,
                formation=np.where(blocks % 2 == 0, "FM_A", "FM_B").astype(object),
                geo_class=np.full(n, regime, dtype=np.int64),
            )
        )
    return tables
