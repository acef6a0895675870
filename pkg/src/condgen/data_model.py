"""Inspection records, dataset container and CSV/JSON ingestion."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .conversion import rating_to_numeric

BASE_COLUMNS = ("asset_id", "inspection_year", "age_years")


class DataError(Exception):
    """Base class for dataset problems."""


class SchemaError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class ValidationError(DataError):
    """One or more rows failed validation. ``problems`` holds ``(row, reason)`` pairs."""

    def __init__(self, problems: list[tuple[int | None, str]]):
        self.problems = list(problems)
        lines = [f"row {row}: {reason}" if row is not None else reason for row, reason in self.problems]
        super().__init__(f"{len(lines)} validation problem(s):\n  " + "\n  ".join(lines))


class Kind(str, Enum):
    NUMERICAL = "numerical"
    RATING = "rating"


class Direction(str, Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"


@dataclass(frozen=True)
class ConditionAttribute:
    name: str
    kind: Kind = Kind.NUMERICAL
    rating_levels: int | None = None
    direction: Direction = Direction.INCREASING
    # generated draws are truncated at zero when set
    nonnegative: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "direction", Direction(self.direction))
        if not self.name or self.name in BASE_COLUMNS:
            raise SchemaError(f"invalid attribute name {self.name!r}")
        if self.kind is Kind.RATING:
            if self.rating_levels is None or self.rating_levels < 2:
                raise SchemaError(f"rating attribute {self.name!r} needs rating_levels >= 2")
        elif self.rating_levels is not None:
            raise SchemaError(f"numerical attribute {self.name!r} must not declare rating_levels")

    @property
    def is_rating(self) -> bool:
        return self.kind is Kind.RATING

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind.value, "direction": self.direction.value}
        if self.is_rating:
            d["levels"] = self.rating_levels
        if not self.nonnegative:
            d["nonnegative"] = False
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ConditionAttribute":
        direction = d.get("direction", "increasing")
        direction = {"increasing-with-age": "increasing", "decreasing-with-age": "decreasing"}.get(direction, direction)
        return cls(
            name=d["name"],
            kind=Kind(d.get("kind", "numerical")),
            rating_levels=d.get("levels", d.get("rating_levels")),
            direction=Direction(direction),
            nonnegative=bool(d.get("nonnegative", True)),
        )


@dataclass(frozen=True)
class InspectionRecord:
    asset_id: str
    inspection_year: int
    age_years: float
    values: Mapping[str, float | int] = field(default_factory=dict)

    def get(self, name: str) -> float | int | None:
        return self.values.get(name)

    def replace(self, **changes) -> "InspectionRecord":
        d = {"asset_id": self.asset_id, "inspection_year": self.inspection_year,
             "age_years": self.age_years, "values": self.values}
        d.update(changes)
        return InspectionRecord(**d)


def _check_record(rec: InspectionRecord, attrs: Mapping[str, ConditionAttribute]) -> list[str]:
    reasons = []
    if not (isinstance(rec.age_years, (int, float)) and math.isfinite(rec.age_years)) or rec.age_years < 0:
        reasons.append(f"age_years must be a finite non-negative number, got {rec.age_years!r}")
    for name, v in rec.values.items():
        attr = attrs.get(name)
        if attr is None:
            reasons.append(f"unknown attribute {name!r}")
        elif attr.is_rating:
            if isinstance(v, bool) or int(v) != v or not 1 <= v <= attr.rating_levels:
                reasons.append(f"{name}: rating {v!r} outside [1, {attr.rating_levels}]")
        elif not math.isfinite(v):
            reasons.append(f"{name}: non-finite value {v!r}")
    return reasons


@dataclass(frozen=True)
class InspectionDataset:
    """Immutable collection of inspection records sharing one schema."""

    schema: tuple[ConditionAttribute, ...]
    records: tuple[InspectionRecord, ...]
    inspection_interval_years: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "records", tuple(self.records))
        if self.inspection_interval_years < 1 or int(self.inspection_interval_years) != self.inspection_interval_years:
            raise SchemaError("inspection_interval_years must be a positive integer")
        names = [a.name for a in self.schema]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"duplicate attribute names: {dupes}")
        attrs = self.attributes
        problems = []
        for i, rec in enumerate(self.records):
            problems.extend((i, r) for r in _check_record(rec, attrs))
        problems.extend((None, r) for r in self._interval_problems())
        if problems:
            raise ValidationError(problems)

    @property
    def attributes(self) -> dict[str, ConditionAttribute]:
        return {a.name: a for a in self.schema}

    def attribute(self, name: str) -> ConditionAttribute:
        try:
            return self.attributes[name]
        except KeyError:
            raise SchemaError(f"attribute {name!r} not in schema") from None

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[InspectionRecord]:
        return iter(self.records)

    def with_records(self, records: Iterable[InspectionRecord]) -> "InspectionDataset":
        return InspectionDataset(self.schema, tuple(records), self.inspection_interval_years)

    def by_asset(self) -> dict[str, list[InspectionRecord]]:
        """Records grouped per asset, each list sorted by inspection year."""
        groups: dict[str, list[InspectionRecord]] = defaultdict(list)
        for rec in self.records:
            groups[rec.asset_id].append(rec)
        return {k: sorted(v, key=lambda r: r.inspection_year) for k, v in groups.items()}

    def _interval_problems(self) -> list[str]:
        out = []
        for asset, recs in self.by_asset().items():
            for prev, cur in zip(recs, recs[1:]):
                gap = cur.inspection_year - prev.inspection_year
                if gap <= 0 or gap % self.inspection_interval_years:
                    out.append(
                        f"asset {asset}: inspections {prev.inspection_year} and {cur.inspection_year} "
                        f"are {gap} years apart, expected a multiple of {self.inspection_interval_years}"
                    )
        return out

    def pairs(self) -> list[tuple[InspectionRecord, InspectionRecord]]:
        """(previous, current) record pairs exactly one inspection interval apart."""
        out = []
        for recs in self.by_asset().values():
            for prev, cur in zip(recs, recs[1:]):
                if cur.inspection_year - prev.inspection_year == self.inspection_interval_years:
                    out.append((prev, cur))
        return out

    def years(self) -> list[int]:
        return sorted({r.inspection_year for r in self.records})

    def latest(self) -> "InspectionDataset":
        """Most recent record of every asset."""
        return self.with_records(recs[-1] for recs in self.by_asset().values())

    @cached_property
    def _numeric_cache(self) -> dict[int, dict[str, float]]:
        attrs = self.attributes
        return {id(r): numeric_values(r, attrs) for r in self.records}

    def numeric(self, rec: InspectionRecord) -> dict[str, float]:
        """Values of ``rec`` as floats, rating levels mapped into (0, 1)."""
        cached = self._numeric_cache.get(id(rec))
        return dict(cached) if cached is not None else numeric_values(rec, self.attributes)

    def column(self, name: str) -> list[float | int]:
        return [r.values[name] for r in self.records if name in r.values]


def numeric_values(rec: InspectionRecord, attrs: Mapping[str, ConditionAttribute]) -> dict[str, float]:
    out = {}
    for name, v in rec.values.items():
        attr = attrs[name]
        out[name] = rating_to_numeric(int(v), attr.rating_levels) if attr.is_rating else float(v)
    return out


# ---------------------------------------------------------------------------
# schema / CSV I/O
# ---------------------------------------------------------------------------

def load_schema(path: str | Path) -> tuple[list[ConditionAttribute], int | None]:
    """Read a schema descriptor. Returns the attributes and the optional interval."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return schema_from_dict(doc)


def schema_from_dict(doc: Mapping) -> tuple[list[ConditionAttribute], int | None]:
    try:
        attrs = [ConditionAttribute.from_dict(a) for a in doc["attributes"]]
    except KeyError as exc:
        raise SchemaError(f"schema descriptor missing field {exc}") from None
    except ValueError as exc:
        raise SchemaError(str(exc)) from None
    return attrs, doc.get("interval")


def schema_to_dict(schema: Iterable[ConditionAttribute], interval: int | None = None) -> dict:
    d: dict = {"attributes": [a.to_dict() for a in schema]}
    if interval is not None:
        d["interval"] = interval
    return d


def _parse_row(row: dict[str, str], schema: list[ConditionAttribute]) -> tuple[InspectionRecord | None, list[str]]:
    reasons = []
    asset = (row.get("asset_id") or "").strip()
    if not asset:
        reasons.append("empty asset_id")
    try:
        year = int(row["inspection_year"])
    except (TypeError, ValueError):
        reasons.append(f"unparseable inspection_year {row.get('inspection_year')!r}")
        year = 0
    try:
        age = float(row["age_years"])
    except (TypeError, ValueError):
        reasons.append(f"unparseable age_years {row.get('age_years')!r}")
        age = 0.0
    values: dict[str, float | int] = {}
    for attr in schema:
        cell = (row.get(attr.name) or "").strip()
        if cell == "":
            continue
        try:
            if attr.is_rating:
                x = float(cell)
                if not x.is_integer():
                    raise ValueError
                values[attr.name] = int(x)
            else:
                values[attr.name] = float(cell)
        except ValueError:
            reasons.append(f"{attr.name}: unparseable value {cell!r}")
    if reasons:
        return None, reasons
    rec = InspectionRecord(asset, year, age, values)
    return rec, _check_record(rec, {a.name: a for a in schema})


def ingest_csv(path: str | Path, schema: list[ConditionAttribute], interval: int) -> InspectionDataset:
    """Read and validate an inspection CSV.

    Row numbers in diagnostics are 1-based file lines (the header is line 1).
    Every bad row is reported; nothing is dropped silently.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    return parse_csv(text, schema, interval)


def parse_csv(text: str, schema: list[ConditionAttribute], interval: int) -> InspectionDataset:
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames
    if not header:
        raise EmptyDatasetError("file is empty")
    header = [h.strip() for h in header]
    reader.fieldnames = header
    missing = [c for c in (*BASE_COLUMNS, *(a.name for a in schema)) if c not in header]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")

    records, problems = [], []
    for line_no, row in enumerate(reader, start=2):
        rec, reasons = _parse_row(row, schema)
        if reasons:
            problems.extend((line_no, r) for r in reasons)
        else:
            records.append(rec)
    if problems:
        raise ValidationError(problems)
    if not records:
        raise EmptyDatasetError("file contains a header but no records")
    return InspectionDataset(tuple(schema), tuple(records), interval)


def format_value(v: float | int, attr: ConditionAttribute) -> str:
    if attr.is_rating:
        return str(int(v))
    return repr(float(v))


def to_csv_text(dataset: InspectionDataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*BASE_COLUMNS, *(a.name for a in dataset.schema)])
    for rec in dataset.records:
        row = [rec.asset_id, str(rec.inspection_year), repr(float(rec.age_years))]
        for attr in dataset.schema:
            v = rec.values.get(attr.name)
            row.append("" if v is None else format_value(v, attr))
        writer.writerow(row)
    return buf.getvalue()


def emit_csv(dataset: InspectionDataset, path: str | Path) -> None:
    Path(path).write_text(to_csv_text(dataset), encoding="utf-8")


# ---------------------------------------------------------------------------
# direction normalisation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirectionTransform:
    """Reflection applied to attributes that decline with age.

    Numerical attributes map ``v -> M - v`` with ``M`` the dataset maximum;
    rating attributes reverse their level order, ``i -> N + 1 - i``.
    The map is its own inverse.
    """

    pivots: Mapping[str, float] = field(default_factory=dict)

    def _map(self, dataset: InspectionDataset) -> InspectionDataset:
        if not self.pivots:
            return dataset
        attrs = dataset.attributes
        recs = []
        for rec in dataset.records:
            values = dict(rec.values)
            for name, m in self.pivots.items():
                if name in values:
                    if attrs[name].is_rating:
                        values[name] = int(m) - int(values[name])
                    else:
                        values[name] = m - values[name]
            recs.append(rec.replace(values=values))
        return dataset.with_records(recs)

    apply = _map
    invert = _map

    def to_dict(self) -> dict:
        return {k: self.pivots[k] for k in sorted(self.pivots)}

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "DirectionTransform":
        return cls(dict(d or {}))


def normalize_direction(dataset: InspectionDataset) -> tuple[InspectionDataset, DirectionTransform]:
    """Flip decreasing attributes so every condition grows with age."""
    pivots: dict[str, float] = {}
    for attr in dataset.schema:
        if attr.direction is not Direction.DECREASING:
            continue
        if attr.is_rating:
            pivots[attr.name] = attr.rating_levels + 1
            continue
        vals = [float(v) for v in dataset.column(attr.name) if math.isfinite(v)]
        if not vals:
            raise DataError(f"attribute {attr.name!r} has no finite values to normalise")
        pivots[attr.name] = max(vals)
    transform = DirectionTransform(pivots)
    return transform.apply(dataset), transform


def read_labels(path: str | Path, column: str) -> dict[tuple[str, int], float]:
    """Read an extra label column keyed by ``(asset_id, inspection_year)``."""
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise SchemaError(f"missing column: {column}")
        problems = []
        for line_no, row in enumerate(reader, start=2):
            cell = (row.get(column) or "").strip()
            if cell == "":
                continue
            try:
                out[(row["asset_id"].strip(), int(row["inspection_year"]))] = float(cell)
            except (TypeError, ValueError):
                problems.append((line_no, f"{column}: unparseable label {cell!r}"))
        if problems:
            raise ValidationError(problems)
    return out
