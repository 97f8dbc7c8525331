"""BYOL and Barlow Twins objectives and the training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import augment
from .ingest import IntervalSet, stack
from .encoder import EncoderParams, NumericError, backward, forward, init_params
from .optim import EarlyStopper, EMAConfig, LARSConfig, LARSState, cosine_lr, ema_update, lars_step

log = logging.getLogger(__name__)

METHODS = ("byol", "barlow_twins")
HEAD_DIMS = {"byol": (4096, 256), "barlow_twins": (2048, 2048)}
BATCH_SIZES = {"byol": 64, "barlow_twins": 2048}


class TrainConfigError(ValueError):
    pass


# ---------------------------------------------------------------- losses


def byol_loss(q: np.ndarray, z: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over rows of ||q/|q| - z/|z|||^2. Returns (loss, dloss/dq); z is treated as constant."""
    q = np.atleast_2d(q)
    z = np.atleast_2d(z)
    if q.shape != z.shape:
        raise ValueError(f"q {q.shape} and z {z.shape} differ in shape")
    qn = np.linalg.norm(q, axis=1, keepdims=True)
    zn = np.linalg.norm(z, axis=1, keepdims=True)
    for name, norms in (("q", qn), ("z", zn)):
        bad = np.flatnonzero(norms[:, 0] == 0)
        if bad.size:
            raise NumericError(f"{name} row {int(bad[0])} has zero norm")
    qb, zb = q / qn, z / zn
    cos = np.sum(qb * zb, axis=1, keepdims=True)
    n = q.shape[0]
    loss = float(np.mean(np.sum((qb - zb) ** 2, axis=1)))
    # d/dq of (2 - 2 cos) per row
    dq = -2.0 * (zb - cos * qb) / qn / n
    return loss, dq


def byol_row_losses(q, z) -> np.ndarray:
    q, z = np.atleast_2d(q), np.atleast_2d(z)
    qb = q / np.linalg.norm(q, axis=1, keepdims=True)
    zb = z / np.linalg.norm(z, axis=1, keepdims=True)
    return np.sum((qb - zb) ** 2, axis=1)


def _standardize(z: np.ndarray, eps: float):
    mu = z.mean(axis=0)
    zc = z - mu
    scale = np.sqrt((zc**2).mean(axis=0) + eps)
    return zc / scale, (zc, scale)


def _standardize_backward(dy: np.ndarray, cache) -> np.ndarray:
    zc, scale = cache
    return (dy - dy.mean(axis=0) - zc * (dy * zc).mean(axis=0) / scale**2) / scale


def cross_correlation(za: np.ndarray, zb: np.ndarray, eps_std: float = 1e-9):
    """Batch cross-correlation of column-standardized embeddings, C = Za^T Zb / N.

    Columns are standardized with population statistics and sqrt(var + eps_std).
    Returns (C, cache) where the cache feeds :func:`cross_correlation_backward`.
    """
    if za.shape != zb.shape:
        raise ValueError(f"view shapes differ: {za.shape} vs {zb.shape}")
    n = za.shape[0]
    if n < 2:
        raise ValueError("cross-correlation needs a batch of at least 2 rows")
    ya, ca = _standardize(za, eps_std)
    yb, cb = _standardize(zb, eps_std)
    return ya.T @ yb / n, (ya, yb, ca, cb)


def cross_correlation_backward(dC: np.ndarray, cache):
    ya, yb, ca, cb = cache
    n = ya.shape[0]
    dya = yb @ dC.T / n
    dyb = ya @ dC / n
    return _standardize_backward(dya, ca), _standardize_backward(dyb, cb)


def barlow_twins_loss(C: np.ndarray, lam: float = 5e-3) -> tuple[float, np.ndarray]:
    """sum_i (1 - C_ii)^2 + lam * sum_{i != j} C_ij^2, with its gradient w.r.t. C."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"C must be square, got {C.shape}")
    diag = np.diag(C)
    off = C - np.diag(diag)
    loss = float(np.sum((1.0 - diag) ** 2) + lam * np.sum(off**2))
    dC = 2.0 * lam * off
    dC[np.diag_indices_from(dC)] = -2.0 * (1.0 - diag)
    return loss, dC


# ---------------------------------------------------------------- objectives


def barlow_twins_objective(params: EncoderParams, va, vb, lam=5e-3, eps_std=1e-9):
    """Total Barlow Twins loss for two view batches and its parameter gradients."""
    n = len(va)
    out, caches = forward(params, np.concatenate([va, vb]), upto="projector")
    C, cc = cross_correlation(out[:n], out[n:], eps_std)
    loss, dC = barlow_twins_loss(C, lam)
    dza, dzb = cross_correlation_backward(dC, cc)
    return loss, backward(params, np.concatenate([dza, dzb]), caches)


def byol_symmetric_loss(student: EncoderParams, teacher: EncoderParams, va, vb):
    """byol_loss(q_A, z_B) + byol_loss(q_B, z_A) and gradients for the student only.

    Teacher outputs are constants (stop-gradient); the teacher is only ever
    moved by :func:`~wellssl.optim.ema_update`.
    """
    if not student.has_predictor:
        raise TrainConfigError("BYOL student needs a predictor head")
    n = len(va)
    both = np.concatenate([va, vb])
    q, caches = forward(student, both, upto="predictor")
    z, _ = forward(teacher, both, upto="projector")
    l1, dq_a = byol_loss(q[:n], z[n:])
    l2, dq_b = byol_loss(q[n:], z[:n])
    return l1 + l2, backward(student, np.concatenate([dq_a, dq_b]), caches)


def projector_std(params: EncoderParams, x: np.ndarray) -> np.ndarray:
    """Per-dimension std of projector outputs over a batch (collapse diagnostic)."""
    out, _ = forward(params, x, upto="projector")
    return out.std(axis=0)


# ---------------------------------------------------------------- training


@dataclass
class TrainConfig:
    method: str = "barlow_twins"
    batch_size: int | None = None
    max_epochs: int = 100
    patience: int = 10
    hidden_size: int = 64
    head_hidden: int | None = None
    head_out: int | None = None
    bt_lambda: float = 5e-3
    eps_std: float = 1e-9
    lars: LARSConfig = field(default_factory=LARSConfig)
    ema: EMAConfig = field(default_factory=EMAConfig)
    cosine_t_max: int = 10
    augment_kind: str | None = None
    window_size: int | None = None
    sigma_mode: str | None = None
    sigma: float = augment.DEFAULT_SIGMA
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise TrainConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        hid, out = HEAD_DIMS[self.method]
        self.head_hidden = hid if self.head_hidden is None else self.head_hidden
        self.head_out = out if self.head_out is None else self.head_out
        self.batch_size = BATCH_SIZES[self.method] if self.batch_size is None else self.batch_size
        min_batch = 2 if self.method == "barlow_twins" else 1
        if self.batch_size < min_batch:
            raise TrainConfigError(f"batch_size must be >= {min_batch} for {self.method}")
        if not self.bt_lambda > 0:
            raise TrainConfigError("bt_lambda must be > 0")
        if not 0 < self.val_fraction < 1:
            raise TrainConfigError("val_fraction must lie in (0, 1)")
        if self.max_epochs < 1 or self.patience < 1:
            raise TrainConfigError("max_epochs and patience must be >= 1")
        try:
            self.view_specs()
        except ValueError as exc:
            raise TrainConfigError(str(exc)) from exc

    def view_specs(self):
        """Augmentation pair. ``augment_kind`` None keeps the method's pairing;
        "window_slice" or "jitter" applies that transformation to both views."""
        if self.augment_kind is None:
            a, b = augment.default_pair_specs(self.method, self.window_size)
            if self.sigma_mode is not None and b.kind is augment.Kind.JITTER:
                b = augment.AugmentSpec(b.kind, augment.SigmaMode(self.sigma_mode), self.sigma)
            return a, b
        kind = augment.Kind(self.augment_kind)
        if kind is augment.Kind.JITTER:
            spec = augment.AugmentSpec(kind, augment.SigmaMode(self.sigma_mode or "fixed"), self.sigma)
        else:
            w = augment.default_pair_specs(self.method, self.window_size)[0].window_size
            spec = augment.AugmentSpec(kind, window_size=w)
        return spec, spec


@dataclass
class TrainResult:
    params: EncoderParams
    teacher: EncoderParams | None
    history: list[dict]
    best_epoch: int
    train_wells: list[str]
    val_wells: list[str]


def split_by_well(well_ids, val_fraction: float, seed: int):
    """Seeded well-level split; returns (train indices, val indices, train wells, val wells)."""
    wells = sorted(set(well_ids))
    order = np.random.default_rng([seed, 7]).permutation(len(wells))
    n_val = int(round(val_fraction * len(wells)))
    n_val = min(max(n_val, 1), len(wells) - 1) if len(wells) > 1 else 0
    val_wells = sorted(wells[i] for i in order[:n_val])
    train_wells = sorted(wells[i] for i in order[n_val:])
    vset = set(val_wells)
    train_idx = np.array([i for i, w in enumerate(well_ids) if w not in vset], dtype=int)
    val_idx = np.array([i for i, w in enumerate(well_ids) if w in vset], dtype=int)
    return train_idx, val_idx, train_wells, val_wells


def _chunks(idx: np.ndarray, size: int, min_size: int):
    """Split into consecutive batches; a trailing batch below ``min_size`` merges into its predecessor."""
    parts = [idx[i : i + size] for i in range(0, len(idx), size)]
    if len(parts) > 1 and len(parts[-1]) < min_size:
        parts[-2] = np.concatenate([parts[-2], parts.pop()])
    return parts


class Trainer:
    def __init__(self, cfg: TrainConfig, input_size: int = 4):
        self.cfg = cfg
        self.specs = cfg.view_specs()
        self.student = init_params(
            input_size, cfg.hidden_size, cfg.head_hidden, cfg.head_out,
            predictor=cfg.method == "byol", rng=np.random.default_rng([cfg.seed, 1]),
        )
        self.teacher = self.student.without_predictor() if cfg.method == "byol" else None
        self.state = LARSState()
        self.min_batch = 2 if cfg.method == "barlow_twins" else 1

    def objective(self, va, vb):
        if self.cfg.method == "byol":
            return byol_symmetric_loss(self.student, self.teacher, va, vb)
        return barlow_twins_objective(self.student, va, vb, self.cfg.bt_lambda, self.cfg.eps_std)

    def step(self, va, vb, lr: float) -> float:
        loss, grads = self.objective(va, vb)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite training loss {loss}")
        lars_step(self.student.tensors, grads, self.cfg.lars, self.state, lr)
        if self.teacher is not None:
            ema_update(self.teacher.tensors, self.student.tensors, self.cfg.ema.momentum)
        return loss

    def run_epoch(self, data: np.ndarray, train_idx: np.ndarray, epoch: int, lr: float) -> float:
        order = train_idx[np.random.default_rng([self.cfg.seed, 2, epoch]).permutation(len(train_idx))]
        total, count = 0.0, 0
        for batch in _chunks(order, self.cfg.batch_size, self.min_batch):
            va, vb = augment.make_view_batch(data[batch], self.specs, self.cfg.seed, epoch, batch)
            total += self.step(va, vb, lr) * len(batch)
            count += len(batch)
        return total / count

    def validation_loss(self, data: np.ndarray, val_idx: np.ndarray) -> float:
        # epoch 0 stream: the same views every epoch
        total, count = 0.0, 0
        for batch in _chunks(val_idx, self.cfg.batch_size, self.min_batch):
            va, vb = augment.make_view_batch(data[batch], self.specs, self.cfg.seed, 0, batch)
            loss, _ = self.objective(va, vb)
            total += loss * len(batch)
            count += len(batch)
        return total / count


def train(intervals, cfg: TrainConfig, callback=None) -> TrainResult:
    """Train an encoder on a list of Intervals (or an IntervalSet) with well-level validation.

    Stops after ``cfg.patience`` epochs without validation improvement and
    returns the best-validation parameters together with the full history.
    """
    if isinstance(intervals, IntervalSet):
        values, well_ids = intervals.values, list(intervals.well_ids)
    else:
        values, well_ids = stack(intervals), [iv.well_id for iv in intervals]
    train_idx, val_idx, train_wells, val_wells = split_by_well(well_ids, cfg.val_fraction, cfg.seed)
    if len(train_idx) == 0 or len(val_idx) == 0:
        raise TrainConfigError("train/val split by well left an empty side; need intervals from >= 2 wells")
    trainer = Trainer(cfg, values.shape[2])
    if len(train_idx) < trainer.min_batch or len(val_idx) < trainer.min_batch:
        raise TrainConfigError("too few intervals for a single batch")

    stopper = EarlyStopper(cfg.patience)
    history = []
    best = (trainer.student.copy(), trainer.teacher.copy() if trainer.teacher else None)
    for epoch in range(1, cfg.max_epochs + 1):
        lr = cosine_lr(epoch - 1, cfg.lars.base_lr, cfg.cosine_t_max)
        train_loss = trainer.run_epoch(values, train_idx, epoch, lr)
        val_loss = trainer.validation_loss(values, val_idx)
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss, "lr": lr})
        log.info("epoch %d  train %.6g  val %.6g  lr %.4g", epoch, train_loss, val_loss, lr)
        improved = val_loss < stopper.best
        stop = stopper.update(epoch, val_loss)
        if improved:
            best = (trainer.student.copy(), trainer.teacher.copy() if trainer.teacher else None)
        if callback is not None:
            callback(epoch, trainer, history[-1])
        if stop:
            break
    return TrainResult(best[0], best[1], history, stopper.best_epoch, train_wells, val_wells)


def write_history(history: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_loss,lr\n")
        for h in history:
            fh.write(f"{h['epoch']},{h['train_loss']!r},{h['val_loss']!r},{h['lr']!r}\n")
