"""CSV ingestion of survival tables and persistence of datasets and reports."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .survival import Dataset

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none", "?"})
KINDS = ("numeric", "categorical", "time", "event")


@dataclass(frozen=True)
class ColumnSpec:
    """One CSV column.

    Categorical columns expand to indicators for every category but the
    first in sorted order; ``drop_reference=False`` keeps all of them.
    """

    name: str
    kind: str = "numeric"
    categories: tuple[str, ...] | None = None
    drop_reference: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.categories is not None:
            if self.kind != "categorical":
                raise ValueError(f"column {self.name!r}: only categorical columns take categories")
            object.__setattr__(self, "categories", tuple(sorted(_canonical(c) for c in self.categories)))


@dataclass(frozen=True, eq=False)
class LoadedTable:
    dataset: Dataset
    n_rows: int
    dropped: int


def _canonical(token) -> str:
    """Category labels compare as text; integral numbers lose a trailing '.0'."""
    s = str(token).strip()
    try:
        f = float(s)
    except ValueError:
        return s
    return str(int(f)) if math.isfinite(f) and f == int(f) else s


def _is_missing(token: str) -> bool:
    return token.strip().lower() in MISSING_TOKENS


def _validate_schema(schema: Sequence[ColumnSpec]):
    kinds = [c.kind for c in schema]
    if kinds.count("time") != 1 or kinds.count("event") != 1:
        raise ValueError("schema needs exactly one time column and one event column")
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise ValueError("duplicate column names in schema")


def _number(token: str, row: int, column: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ValueError(f"row {row}, column {column!r}: non-numeric value {token!r}") from None


def _event(token: str, row: int, column: str) -> bool:
    t = token.strip().lower()
    if t in ("true", "dead", "event"):
        return True
    if t in ("false", "censored"):
        return False
    return _number(token, row, column) != 0


def load_table(path, schema: Sequence[ColumnSpec], missing_policy: str = "drop") -> LoadedTable:
    """Read ``path`` into a Dataset; also report the number of rows dropped.

    ``missing_policy`` is "drop" (skip incomplete rows) or "error".
    Columns present in the file but absent from the schema are ignored.
    """
    if missing_policy not in ("drop", "error"):
        raise ValueError(f"unknown missing_policy {missing_policy!r}")
    _validate_schema(schema)
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        absent = [c.name for c in schema if c.name not in header]
        if absent:
            raise ValueError(f"{path}: columns {absent} not in header")
        rows = list(reader)

    kept, dropped = [], 0
    for i, row in enumerate(rows, start=2):  # line 1 is the header
        if any(_is_missing(row[c.name] or "") for c in schema):
            if missing_policy == "error":
                raise ValueError(f"{path}: row {i} has missing values")
            dropped += 1
            continue
        kept.append((i, row))
    if not kept:
        why = f"all {len(rows)} rows have missing values" if rows else "no data rows"
        raise ValueError(f"{path}: {why}")

    names: list[str] = []
    blocks: list[np.ndarray] = []
    times = np.array([_number(r[c.name], i, c.name) for c in schema if c.kind == "time" for i, r in kept])
    events = np.array([_event(r[c.name], i, c.name) for c in schema if c.kind == "event" for i, r in kept],
                      dtype=bool)
    for c in schema:
        if c.kind == "numeric":
            names.append(c.name)
            blocks.append(np.array([[_number(r[c.name], i, c.name)] for i, r in kept]).reshape(-1, 1))
        elif c.kind == "categorical":
            values = [(i, _canonical(r[c.name])) for i, r in kept]
            cats = c.categories if c.categories is not None else tuple(sorted({v for _, v in values}))
            for i, v in values:
                if v not in cats:
                    raise ValueError(f"{path}: row {i}, column {c.name!r}: unknown category {v!r}")
            levels = cats[1:] if c.drop_reference else cats
            names.extend(f"{c.name}={lvl}" for lvl in levels)
            block = np.zeros((len(values), len(levels)))
            for j, lvl in enumerate(levels):
                block[:, j] = [v == lvl for _, v in values]
            blocks.append(block)
    X = np.hstack(blocks) if blocks else np.zeros((len(kept), 0))
    return LoadedTable(Dataset(X, times, events, tuple(names)), len(rows), dropped)


def load_csv(path, schema: Sequence[ColumnSpec], missing_policy: str = "drop") -> Dataset:
    return load_table(path, schema, missing_policy).dataset


# Shipped schemas.  celltype and ph.ecog keep every level, matching the
# published feature counts (9 and 11).
VETERAN_SCHEMA = (
    ColumnSpec("trt", "numeric"),
    ColumnSpec("celltype", "categorical", ("adeno", "large", "smallcell", "squamous"), drop_reference=False),
    ColumnSpec("time", "time"),
    ColumnSpec("status", "event"),
    ColumnSpec("karno", "numeric"),
    ColumnSpec("diagtime", "numeric"),
    ColumnSpec("age", "numeric"),
    ColumnSpec("prior", "numeric"),
)

LUNG_SCHEMA = (
    ColumnSpec("inst", "numeric"),
    ColumnSpec("time", "time"),
    ColumnSpec("status", "event"),
    ColumnSpec("age", "numeric"),
    ColumnSpec("sex", "numeric"),
    ColumnSpec("ph.ecog", "categorical", ("0", "1", "2", "3"), drop_reference=False),
    ColumnSpec("ph.karno", "numeric"),
    ColumnSpec("pat.karno", "numeric"),
    ColumnSpec("meal.cal", "numeric"),
    ColumnSpec("wt.loss", "numeric"),
)

BUNDLED = {"veteran": VETERAN_SCHEMA, "lung": LUNG_SCHEMA}


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ValueError(f"unknown bundled dataset {name!r}; choose from {sorted(BUNDLED)}")
    return Path(str(resources.files("ksexplain") / "data" / f"{name}.csv"))


def load_bundled(name: str, missing_policy: str = "drop") -> LoadedTable:
    """The vendored Veteran or LUNG table."""
    return load_table(bundled_path(name), BUNDLED[name], missing_policy)


def write_dataset(dataset: Dataset, path) -> None:
    """Feature columns, then time and event; floats written round-trip exact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*dataset.feature_names, "time", "event"])
        for x, t, e in zip(dataset.features, dataset.times, dataset.events):
            w.writerow([*map(repr, x.tolist()), repr(float(t)), int(e)])


def read_dataset(path) -> Dataset:
    """Inverse of write_dataset."""
    with Path(path).open(newline="") as fh:
        header = next(csv.reader(fh))
    if header[-2:] != ["time", "event"]:
        raise ValueError(f"{path}: expected the last two columns to be time, event")
    schema = [ColumnSpec(n) for n in header[:-2]] + [ColumnSpec("time", "time"), ColumnSpec("event", "event")]
    return load_csv(path, schema, missing_policy="error")


@dataclass(frozen=True)
class CurveSeries:
    """One plotted SF series: a label and its (time, value) points."""

    figure: str
    series: str
    times: tuple[float, ...]
    values: tuple[float, ...]


@dataclass(frozen=True)
class ExperimentReport:
    kind: str
    seed: int
    config: dict
    rows: tuple[dict, ...] = ()
    aggregates: dict = field(default_factory=dict)
    surface: tuple[dict, ...] = ()
    curves: tuple[CurveSeries, ...] = ()
    wall_clock: float = 0.0

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "config": self.config,
            "rows": list(self.rows),
            "aggregates": self.aggregates,
            "surface": list(self.surface),
            "curves": [
                {"figure": c.figure, "series": c.series, "times": list(c.times), "values": list(c.values)}
                for c in self.curves
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> ExperimentReport:
        curves = tuple(
            CurveSeries(c["figure"], c["series"], tuple(c["times"]), tuple(c["values"]))
            for c in doc.get("curves", [])
        )
        return cls(doc["kind"], doc["seed"], doc["config"], tuple(doc.get("rows", [])),
                   doc.get("aggregates", {}), tuple(doc.get("surface", [])), curves)

    def dumps(self) -> str:
        """Deterministic JSON; wall-clock time is left out so reruns compare byte for byte."""
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _timing_path(path: Path) -> Path:
    return path.with_name(f"{path.stem}.timing.json")


def save_report(report: ExperimentReport, path) -> list[Path]:
    """Write the report JSON plus CSV sidecars; returns every path written.

    Each figure gets ``<stem>.<figure>.csv`` in long format (time, value,
    series); a sweep surface goes to ``<stem>.surface.csv`` and the wall-clock
    time to ``<stem>.timing.json``.
    """
    path = Path(path)
    written = []
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.dumps())
        written.append(path)
        _timing_path(path).write_text(json.dumps({"wall_clock": report.wall_clock}))
        written.append(_timing_path(path))
        by_figure: dict[str, list[CurveSeries]] = {}
        for c in report.curves:
            by_figure.setdefault(c.figure, []).append(c)
        for fig, series in by_figure.items():
            side = path.with_name(f"{path.stem}.{fig}.csv")
            with side.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["time", "value", "series"])
                for c in series:
                    w.writerows((repr(t), repr(v), c.series) for t, v in zip(c.times, c.values))
            written.append(side)
        if report.surface:
            side = path.with_name(f"{path.stem}.surface.csv")
            with side.open("w", newline="") as fh:
                keys = list(report.surface[0])
                w = csv.DictWriter(fh, fieldnames=keys)
                w.writeheader()
                w.writerows(report.surface)
            written.append(side)
    except OSError as exc:
        raise OSError(f"could not write report to {path}: {exc}") from exc
    return written


def load_report(path) -> ExperimentReport:
    path = Path(path)
    try:
        report = ExperimentReport.from_json(json.loads(path.read_text()))
        timing = _timing_path(path)
        if timing.exists():
            report = replace(report, wall_clock=json.loads(timing.read_text())["wall_clock"])
        return report
    except OSError as exc:
        raise OSError(f"could not read report {path}: {exc}") from exc
