"""Sampling frames: the register of units a sample is drawn from.

A frame is an ordered list of records (ordering matters for systematic
sampling).  Each record carries a response value ``y`` (NaN when missing),
a positive size measure ``x``, stratum and cluster labels, and a response
propensity.  Frames round-trip through CSV with the fixed header
``id,y,x,stratum,cluster,propensity``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

__all__ = [
    "FrameRecord",
    "Frame",
    "ValueUniverse",
    "load_frame_csv",
    "dump_frame_csv",
    "make_frame",
]

CSV_HEADER = ["id", "y", "x", "stratum", "cluster", "propensity"]


@dataclass(frozen=True)
class FrameRecord:
    id: int
    y: float
    x: float = 1.0
    stratum: str = "0"
    cluster: str = "0"
    propensity: float = 1.0

    def __post_init__(self):
        if not (self.x > 0 and math.isfinite(self.x)):
            raise ValueError(f"record {self.id}: size measure x must be positive, got {self.x!r}")
        if not (0.0 < self.propensity <= 1.0):
            raise ValueError(
                f"record {self.id}: propensity must be in (0, 1], got {self.propensity!r}")
        if not (math.isfinite(self.y) or math.isnan(self.y)):
            raise ValueError(f"record {self.id}: y must be finite or NaN (missing), got {self.y!r}")

    @property
    def y_missing(self) -> bool:
        return math.isnan(self.y)


@dataclass(frozen=True)
class Frame:
    """Ordered register of units with unique ids."""

    records: tuple[FrameRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ValueError("frame must contain at least one record")
        ids = [record.id for record in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("frame record ids must be unique")

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(record.id for record in self.records)

    @property
    def y(self) -> tuple[float, ...]:
        return tuple(record.y for record in self.records)

    @property
    def x(self) -> tuple[float, ...]:
        return tuple(record.x for record in self.records)

    def record_by_id(self, unit_id: int) -> FrameRecord:
        for record in self.records:
            if record.id == unit_id:
                return record
        raise KeyError(f"no record with id {unit_id} in frame")

    def strata(self) -> dict[str, tuple[int, ...]]:
        """Stratum label -> frame positions, labels in sorted order."""
        groups: dict[str, list[int]] = {}
        for position, record in enumerate(self.records):
            groups.setdefault(record.stratum, []).append(position)
        return {label: tuple(groups[label]) for label in sorted(groups)}

    def clusters(self) -> dict[str, tuple[int, ...]]:
        """Cluster label -> frame positions, labels in sorted order."""
        groups: dict[str, list[int]] = {}
        for position, record in enumerate(self.records):
            groups.setdefault(record.cluster, []).append(position)
        return {label: tuple(groups[label]) for label in sorted(groups)}

    def with_y(self, values) -> "Frame":
        """Copy of the frame with y replaced position-wise."""
        values = tuple(float(v) for v in values)
        if len(values) != self.n:
            raise ValueError(f"expected {self.n} y values, got {len(values)}")
        return Frame(tuple(
            FrameRecord(r.id, v, r.x, r.stratum, r.cluster, r.propensity)
            for r, v in zip(self.records, values)))

    def with_x(self, values) -> "Frame":
        """Copy of the frame with x replaced position-wise."""
        values = tuple(float(v) for v in values)
        if len(values) != self.n:
            raise ValueError(f"expected {self.n} x values, got {len(values)}")
        return Frame(tuple(
            FrameRecord(r.id, r.y, v, r.stratum, r.cluster, r.propensity)
            for r, v in zip(self.records, values)))


@dataclass(frozen=True)
class ValueUniverse:
    """Declared bounds for y and the allowed size-measure values."""

    y_min: float
    y_max: float
    x_values: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if not (math.isfinite(self.y_min) and math.isfinite(self.y_max)):
            raise ValueError("y bounds must be finite")
        if self.y_max < self.y_min:
            raise ValueError(f"y_max must be >= y_min, got [{self.y_min}, {self.y_max}]")
        xs = tuple(sorted(float(v) for v in self.x_values))
        if not xs:
            raise ValueError("x_values must be non-empty")
        if any(not (v > 0 and math.isfinite(v)) for v in xs):
            raise ValueError(f"x_values must be positive and finite, got {xs}")
        object.__setattr__(self, "x_values", xs)

    def value_range(self) -> float:
        return self.y_max - self.y_min

    def contains_y(self, value: float) -> bool:
        return self.y_min <= value <= self.y_max

    def clamp_y(self, value: float) -> float:
        return min(self.y_max, max(self.y_min, value))


def make_frame(ys, xs=None, strata=None, clusters=None, propensities=None, ids=None) -> Frame:
    """Build a frame from parallel sequences, filling defaults."""
    ys = list(ys)
    n = len(ys)
    xs = [1.0] * n if xs is None else list(xs)
    strata = ["0"] * n if strata is None else [str(s) for s in strata]
    clusters = ["0"] * n if clusters is None else [str(c) for c in clusters]
    propensities = [1.0] * n if propensities is None else list(propensities)
    ids = list(range(1, n + 1)) if ids is None else list(ids)
    if not (len(xs) == len(strata) == len(clusters) == len(propensities) == len(ids) == n):
        raise ValueError("all frame columns must have the same length")
    return Frame(tuple(
        FrameRecord(int(i), float(y), float(x), s, c, float(p))
        for i, y, x, s, c, p in zip(ids, ys, xs, strata, clusters, propensities)))


def load_frame_csv(source) -> Frame:
    """Read a frame from a CSV path or file object with the fixed header."""
    if hasattr(source, "read"):
        return _parse_frame(source)
    with open(source, newline="") as handle:
        return _parse_frame(handle)


def _parse_frame(handle) -> Frame:
    reader = csv.reader(handle)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("frame CSV is empty") from None
    if [h.strip() for h in header] != CSV_HEADER:
        raise ValueError(f"frame CSV header must be {','.join(CSV_HEADER)!r}, got {header!r}")
    records = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise ValueError(f"frame CSV line {line_no}: expected {len(CSV_HEADER)} fields")
        id_s, y_s, x_s, stratum, cluster, prop_s = (cell.strip() for cell in row)
        y = float("nan") if y_s == "" else float(y_s)
        records.append(FrameRecord(int(id_s), y, float(x_s), stratum, cluster, float(prop_s)))
    return Frame(tuple(records))


def dump_frame_csv(frame: Frame, target=None) -> str:
    """Write a frame as CSV; returns the text (and writes to path/file if given)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for record in frame.records:
        y_cell = "" if record.y_missing else repr(record.y)
        writer.writerow([record.id, y_cell, repr(record.x),
                         record.stratum, record.cluster, repr(record.propensity)])
    text = buffer.getvalue()
    if target is not None:
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", newline="") as handle:
                handle.write(text)
    return text
