"""Run configuration: JSON files, ``section.key=value`` overrides, validation.

Every key has a typed default below. Unknown keys and ill-typed values are
rejected with the dotted path of the offending entry.
"""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

from . import INTERVAL_LENGTH, augment, ssl, synth
from .optim import EMAConfig, LARSConfig


class ConfigError(ValueError):
    pass


@dataclass
class DataSection:
    n_wells: int = 40
    samples_per_well: int = 1000
    n_regimes: int = 4
    regime_separation: float = 6.0
    missing_rate: float = 0.1
    sensor_error_rate: float = 0.02
    well_offset: float = 0.5
    interval_length: int = INTERVAL_LENGTH
    stride: int = 100
    # stride of the separate training-interval file; None trains on the evaluation intervals
    train_stride: typing.Optional[int] = None


@dataclass
class AugmentSection:
    # None keeps each method's own view pairing
    kind: typing.Optional[str] = None
    window_size: typing.Optional[int] = None
    jitter_sigma: float = augment.DEFAULT_SIGMA
    sigma_mode: typing.Optional[str] = None


@dataclass
class EncoderSection:
    hidden_size: int = 64
    head_hidden: typing.Optional[int] = None
    head_out: typing.Optional[int] = None


@dataclass
class OptimSection:
    base_lr: float = 0.1
    trust_coefficient: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 1e-6
    exclude_bias_from_adaptation: bool = False
    ema_momentum: float = 0.99
    cosine_t_max: int = 10


@dataclass
class SSLSection:
    method: str = "barlow_twins"
    # desk-scale default; None means the method's full-scale batch size
    batch_size: typing.Optional[int] = 256
    max_epochs: int = 100
    patience: int = 10
    bt_lambda: float = 5e-3
    eps_std: float = 1e-9
    val_fraction: float = 0.1


@dataclass
class EvalSection:
    # None: number of distinct ground-truth classes
    k: typing.Optional[int] = None
    tasks: typing.List[str] = field(default_factory=lambda: ["geo", "well", "binary"])
    probes: typing.List[str] = field(default_factory=lambda: ["linear", "fc3"])
    probe_seeds: typing.List[int] = field(default_factory=lambda: [0, 1, 2])
    n_pairs: int = 2000
    test_fraction: float = 0.3


@dataclass
class PathsSection:
    root: str = "run"
    dataset: str = "synth.csv"
    intervals: str = "intervals.bin"
    train_intervals: str = "train_intervals.bin"
    checkpoint: str = "checkpoint.bin"
    history: str = "history.csv"
    embeddings: str = "embeddings.csv"
    cluster_metrics: str = "cluster_metrics.csv"
    assignments: str = "assignments.csv"
    probe_metrics: str = "probe_metrics.csv"
    effective_config: str = "effective_config.json"


@dataclass
class RunConfig:
    seed: int = 0
    data: DataSection = field(default_factory=DataSection)
    augment: AugmentSection = field(default_factory=AugmentSection)
    encoder: EncoderSection = field(default_factory=EncoderSection)
    optim: OptimSection = field(default_factory=OptimSection)
    ssl: SSLSection = field(default_factory=SSLSection)
    eval: EvalSection = field(default_factory=EvalSection)
    paths: PathsSection = field(default_factory=PathsSection)

    # -------------------------------------------------------- conversions

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def path(self, name: str) -> Path:
        """Resolve a path entry; relative entries live under ``paths.root``."""
        p = Path(getattr(self.paths, name))
        return p if p.is_absolute() else Path(self.paths.root) / p

    def synth_config(self) -> synth.SynthConfig:
        d = self.data
        return synth.SynthConfig(
            n_wells=d.n_wells, samples_per_well=d.samples_per_well, n_regimes=d.n_regimes,
            regime_separation=d.regime_separation, missing_rate=d.missing_rate,
            sensor_error_rate=d.sensor_error_rate, well_offset=d.well_offset, seed=self.seed,
        )

    def train_config(self) -> ssl.TrainConfig:
        o, s, e, a = self.optim, self.ssl, self.encoder, self.augment
        return ssl.TrainConfig(
            method=s.method.replace("-", "_"), batch_size=s.batch_size, max_epochs=s.max_epochs, patience=s.patience,
            hidden_size=e.hidden_size, head_hidden=e.head_hidden, head_out=e.head_out,
            bt_lambda=s.bt_lambda, eps_std=s.eps_std,
            lars=LARSConfig(base_lr=o.base_lr, trust_coefficient=o.trust_coefficient, momentum=o.momentum,
                            weight_decay=o.weight_decay,
                            exclude_bias_from_adaptation=o.exclude_bias_from_adaptation),
            ema=EMAConfig(o.ema_momentum), cosine_t_max=o.cosine_t_max,
            augment_kind=a.kind, window_size=a.window_size, sigma_mode=a.sigma_mode,
            sigma=a.jitter_sigma, val_fraction=s.val_fraction, seed=self.seed,
        )

    def validate(self) -> None:
        """Build every downstream config once so bad values fail before any work starts."""
        checks = {"data": self.synth_config, "ssl": self.train_config}
        for section, build in checks.items():
            try:
                build()
            except ValueError as exc:
                raise ConfigError(f"{section}: {exc}") from exc
        if self.data.interval_length < 2:
            raise ConfigError("data.interval_length: must be >= 2")
        for key in ("stride", "train_stride"):
            v = getattr(self.data, key)
            if v is not None and v < 1:
                raise ConfigError(f"data.{key}: must be >= 1")
        from .evaluate import PROBES, TASKS

        for t in self.eval.tasks:
            if t not in TASKS:
                raise ConfigError(f"eval.tasks: unknown task {t!r}; expected one of {sorted(TASKS)}")
        for p in self.eval.probes:
            if p not in PROBES:
                raise ConfigError(f"eval.probes: unknown probe {p!r}; expected one of {list(PROBES)}")
        if self.eval.k is not None and self.eval.k < 1:
            raise ConfigError("eval.k: must be >= 1")


# ------------------------------------------------------------ loading


def _check_type(value, tp, where: str):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _check_type(value, args[0], where)
    if origin in (list, typing.List):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        (inner,) = typing.get_args(tp)
        return [_check_type(v, inner, f"{where}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    raise TypeError(f"unsupported config type {tp}")  # pragma: no cover


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object, got {data!r}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown config key '{prefix}{key}'")
    kwargs = {}
    for name in names & set(data):
        tp, where = hints[name], f"{prefix}{name}"
        if dataclasses.is_dataclass(tp):
            kwargs[name] = _build(tp, data[name], where + ".")
        else:
            kwargs[name] = _check_type(data[name], tp, where)
    return cls(**kwargs)


def from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings; values are read as JSON when they parse, else as text."""
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"unknown config key '{key}'")
        node[parts[-1]] = _parse_value(raw.strip())
    return data


def load(path=None, overrides=None) -> RunConfig:
    data = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    cfg = from_dict(apply_overrides(data, overrides))
    cfg.validate()
    return cfg


def save(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
