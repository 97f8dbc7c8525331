"""Well-log CSV ingestion, preprocessing and interval extraction.

Preprocessing runs in three steps, in this order: :func:`fill_missing`,
:func:`drop_sensor_errors`, :func:`normalize`. :func:`preprocess` chains them.
"""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace

import numpy as np

from . import FEATURES
from .storage import load_tensors, save_tensors

QC_CURVES = ("CALI", "BS")
CURVES = FEATURES + QC_CURVES
MANDATORY_COLUMNS = ("WELL", "DEPT") + FEATURES
COLUMNS = ("WELL", "DEPT") + CURVES + ("FORMATION", "GEO_CLASS")
SENSOR_ERROR_THRESHOLD = 0.35


class IngestError(ValueError):
    pass


class SchemaError(IngestError):
    pass


class RowError(IngestError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(IngestError):
    pass


@dataclass
class WellLogTable:
    """Depth-ordered curves of a single well.

    Missing cells hold NaN in ``curves`` and False in ``mask``.
    ``geo_class`` uses -1 for unlabelled rows; ``formation`` uses "".
    """

    well_id: str
    depth: np.ndarray
    curves: dict[str, np.ndarray]
    mask: dict[str, np.ndarray]
    formation: np.ndarray
    geo_class: np.ndarray

    def __post_init__(self):
        n = len(self.depth)
        for name in CURVES:
            if name not in self.curves:
                raise SchemaError(f"well {self.well_id}: curve {name} missing")
            if len(self.curves[name]) != n or len(self.mask[name]) != n:
                raise ValidationError(f"well {self.well_id}: curve {name} has wrong length")
        if n > 1 and not np.all(np.diff(self.depth) > 0):
            raise ValidationError(f"well {self.well_id}: depth not strictly increasing")

    def __len__(self):
        return len(self.depth)

    def take(self, rows: np.ndarray) -> WellLogTable:
        return WellLogTable(
            well_id=self.well_id,
            depth=self.depth[rows],
            curves={k: v[rows] for k, v in self.curves.items()},
            mask={k: v[rows] for k, v in self.mask.items()},
            formation=self.formation[rows],
            geo_class=self.geo_class[rows],
        )

    def feature_matrix(self) -> np.ndarray:
        return np.column_stack([self.curves[f] for f in FEATURES])


@dataclass
class Interval:
    values: np.ndarray  # (l, d)
    well_id: str
    depth_start: float
    depth_end: float
    well_index: int = -1
    geo_class: int = -1


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise RowError(line, f"column {column}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise RowError(line, f"column {column}: non-finite value {text!r}")
    return value


def parse_log_csv(path) -> list[WellLogTable]:
    """Read a well-log CSV into one table per distinct WELL, sorted by well id."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        for col in MANDATORY_COLUMNS:
            if col not in header:
                raise SchemaError(f"{path}: missing mandatory column {col}")
        idx = {name: i for i, name in enumerate(header)}

        rows = defaultdict(list)
        seen = {}
        for line, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise RowError(line, f"expected {len(header)} fields, got {len(rec)}")
            well = rec[idx["WELL"]].strip()
            if not well:
                raise RowError(line, "empty WELL")
            dtext = rec[idx["DEPT"]].strip()
            if not dtext:
                raise RowError(line, "empty DEPT")
            depth = _parse_float(dtext, line, "DEPT")
            if (well, depth) in seen:
                raise ValidationError(
                    f"duplicate (WELL, DEPT) = ({well}, {depth}) on lines {seen[well, depth]} and {line}"
                )
            seen[well, depth] = line
            values = {}
            for name in CURVES:
                cell = rec[idx[name]].strip() if name in idx else ""
                values[name] = _parse_float(cell, line, name) if cell else math.nan
            formation = rec[idx["FORMATION"]].strip() if "FORMATION" in idx else ""
            gtext = rec[idx["GEO_CLASS"]].strip() if "GEO_CLASS" in idx else ""
            if gtext:
                try:
                    geo = int(gtext)
                except ValueError:
                    raise RowError(line, f"GEO_CLASS must be an integer class index, got {gtext!r}") from None
            else:
                geo = -1
            rows[well].append((depth, values, formation, geo))

    tables = []
    for well in sorted(rows):
        recs = sorted(rows[well], key=lambda r: r[0])
        curves = {name: np.array([r[1][name] for r in recs], dtype=float) for name in CURVES}
        tables.append(
            WellLogTable(
                well_id=well,
                depth=np.array([r[0] for r in recs], dtype=float),
                curves=curves,
                mask={name: ~np.isnan(v) for name, v in curves.items()},
                formation=np.array([r[2] for r in recs], dtype=object),
                geo_class=np.array([r[3] for r in recs], dtype=np.int64),
            )
        )
    return tables


def write_log_csv(tables: list[WellLogTable], path) -> None:
    """Inverse of :func:`parse_log_csv`; floats are written with ``repr`` so they round-trip."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for t in tables:
            for i in range(len(t)):
                row = [t.well_id, repr(float(t.depth[i]))]
                for name in CURVES:
                    row.append(repr(float(t.curves[name][i])) if t.mask[name][i] else "")
                row.append(t.formation[i])
                row.append(str(int(t.geo_class[i])) if t.geo_class[i] >= 0 else "")
                w.writerow(row)


def _ffill_bfill(values: np.ndarray, present: np.ndarray) -> np.ndarray:
    n = len(values)
    # index of the most recent observed row at or before i
    last = np.where(present, np.arange(n), -1)
    np.maximum.accumulate(last, out=last)
    first = int(np.argmax(present))
    src = np.where(last >= 0, last, first)
    return values[src]


def fill_missing(table: WellLogTable) -> WellLogTable:
    """Forward-fill each feature, back-filling only the leading gap.

    QC curves (CALI, BS) are left untouched so the sensor filter never acts
    on invented values.
    """
    curves = dict(table.curves)
    mask = dict(table.mask)
    for name in FEATURES:
        present = table.mask[name]
        if present.all():
            continue
        if not present.any():
            raise ValidationError(f"well {table.well_id}: feature {name} has no observed values")
        curves[name] = _ffill_bfill(table.curves[name], present)
        mask[name] = np.ones(len(table), dtype=bool)
    return replace(table, curves=curves, mask=mask)


def drop_sensor_errors(table: WellLogTable, threshold: float = SENSOR_ERROR_THRESHOLD) -> WellLogTable:
    """Drop rows where |CALI - BS| > threshold. Rows lacking either curve are kept."""
    both = table.mask["CALI"] & table.mask["BS"]
    delta = np.abs(table.curves["CALI"] - table.curves["BS"])
    bad = both & (np.where(both, delta, 0.0) > threshold)
    if not bad.any():
        return table
    return table.take(np.flatnonzero(~bad))


def _zscore(x: np.ndarray, what: str) -> np.ndarray:
    mu = x.mean()
    sd = x.std()
    if not sd > 0:
        raise ValidationError(f"{what}: zero standard deviation, cannot normalize")
    return (x - mu) / sd


def normalize(tables: list[WellLogTable]) -> list[WellLogTable]:
    """GR z-scored per (well, formation); other features z-scored over the whole collection.

    Population standard deviation throughout. Not idempotent in general.
    """
    for t in tables:
        for name in FEATURES:
            if not t.mask[name].all():
                raise ValidationError(f"well {t.well_id}: {name} has missing values; run fill_missing first")
    out = [replace(t, curves=dict(t.curves)) for t in tables]
    for name in FEATURES:
        if name == "GR":
            continue
        stacked = np.concatenate([t.curves[name] for t in tables])
        mu, sd = stacked.mean(), stacked.std()
        if not sd > 0:
            raise ValidationError(f"feature {name}: zero standard deviation over the dataset")
        for t in out:
            t.curves[name] = (t.curves[name] - mu) / sd
    for t in out:
        gr = t.curves["GR"].copy()
        for form in dict.fromkeys(t.formation):
            rows = t.formation == form
            if rows.sum() < 2:
                raise ValidationError(f"GR group (well={t.well_id}, formation={form!r}) has fewer than 2 rows")
            gr[rows] = _zscore(t.curves["GR"][rows], f"GR group (well={t.well_id}, formation={form!r})")
        t.curves["GR"] = gr
    return out


def preprocess(tables: list[WellLogTable]) -> list[WellLogTable]:
    cleaned = [drop_sensor_errors(fill_missing(t)) for t in tables]
    return normalize([t for t in cleaned if len(t) > 0])


def _majority(labels: np.ndarray) -> int:
    labels = labels[labels >= 0]
    if labels.size == 0:
        return -1
    counts = Counter(labels.tolist())
    top = max(counts.values())
    return min(c for c, n in counts.items() if n == top)


def extract_intervals(
    table: WellLogTable, l: int = 100, stride: int = 100, well_index: int = -1
) -> list[Interval]:
    """Slide a length-``l`` window over one well at offsets 0, stride, 2*stride, ..."""
    if l < 2:
        raise ValueError(f"interval length must be >= 2, got {l}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    x = table.feature_matrix()
    if np.isnan(x).any():
        raise ValidationError(f"well {table.well_id}: missing values remain; preprocess first")
    out = []
    for s in range(0, len(table) - l + 1, stride):
        out.append(
            Interval(
                values=x[s : s + l].copy(),
                well_id=table.well_id,
                depth_start=float(table.depth[s]),
                depth_end=float(table.depth[s + l - 1]),
                well_index=well_index,
                geo_class=_majority(table.geo_class[s : s + l]),
            )
        )
    return out


def extract_all(tables: list[WellLogTable], l: int = 100, stride: int = 100) -> list[Interval]:
    """Intervals from every well; ``well_index`` is the table's position in ``tables``."""
    out = []
    for i, t in enumerate(tables):
        out.extend(extract_intervals(t, l, stride, well_index=i))
    return out


def stack(intervals: list[Interval]) -> np.ndarray:
    return np.stack([iv.values for iv in intervals])


@dataclass
class IntervalSet:
    """Column-oriented view of an interval list, used for file I/O."""

    values: np.ndarray
    well_ids: list[str]
    depth_start: np.ndarray
    depth_end: np.ndarray
    well_index: np.ndarray
    geo_class: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_intervals(cls, intervals: list[Interval], **meta) -> IntervalSet:
        if not intervals:
            raise ValidationError("no intervals to store")
        return cls(
            values=stack(intervals),
            well_ids=[iv.well_id for iv in intervals],
            depth_start=np.array([iv.depth_start for iv in intervals]),
            depth_end=np.array([iv.depth_end for iv in intervals]),
            well_index=np.array([iv.well_index for iv in intervals], dtype=np.int64),
            geo_class=np.array([iv.geo_class for iv in intervals], dtype=np.int64),
            meta=dict(meta),
        )

    def to_intervals(self) -> list[Interval]:
        return [
            Interval(
                values=self.values[i],
                well_id=self.well_ids[i],
                depth_start=float(self.depth_start[i]),
                depth_end=float(self.depth_end[i]),
                well_index=int(self.well_index[i]),
                geo_class=int(self.geo_class[i]),
            )
            for i in range(len(self.well_ids))
        ]

    def save(self, path) -> None:
        save_tensors(
            path,
            {
                "values": self.values,
                "depth_start": self.depth_start,
                "depth_end": self.depth_end,
                "well_index": self.well_index,
                "geo_class": self.geo_class,
            },
            meta={"kind": "intervals", "well_ids": self.well_ids, **self.meta},
        )

    @classmethod
    def load(cls, path) -> IntervalSet:
        t, meta = load_tensors(path)
        if meta.get("kind") != "intervals":
            raise ValidationError(f"{path}: not an intervals file")
        well_ids = meta.pop("well_ids")
        meta.pop("kind")
        return cls(t["values"], well_ids, t["depth_start"], t["depth_end"], t["well_index"], t["geo_class"], meta)
