"""Survival data containers, step-function curves, estimators and metrics.

Every model in the package reports cumulative hazards as :class:`ChfCurve`
objects: piecewise-constant values on the intervals of a :class:`TimeGrid`
built from the distinct observed event times of a training set.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_EPSILON = 1e-5
HORIZON_PAD_FRACTION = 1e-3


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SurvivalSample:
    features: tuple[float, ...]
    event_time: float
    event_indicator: bool

    def __post_init__(self):
        if not np.isfinite(self.event_time) or self.event_time < 0:
            raise ValueError(f"event_time must be finite and >= 0, got {self.event_time}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Right-censored observations stored column-wise.

    ``features`` is an (n, d) array, ``times`` and ``events`` have length n.
    """

    features: np.ndarray
    times: np.ndarray
    events: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        X = _frozen(self.features)
        if X.ndim == 1:
            X = _frozen(X.reshape(-1, len(self.feature_names)))
        t = _frozen(self.times)
        e = _frozen(self.events, dtype=bool)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "events", e)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ValueError(
                f"features shape {X.shape} does not match {len(self.feature_names)} feature names"
            )
        if t.shape != (X.shape[0],) or e.shape != (X.shape[0],):
            raise ValueError("times/events must have one entry per sample")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValueError("event times must be finite and non-negative")

    @classmethod
    def from_samples(cls, samples: Sequence[SurvivalSample], feature_names: Sequence[str]) -> Dataset:
        d = len(feature_names)
        X = np.array([s.features for s in samples], dtype=float).reshape(len(samples), d)
        return cls(
            X,
            [s.event_time for s in samples],
            [s.event_indicator for s in samples],
            tuple(feature_names),
        )

    @property
    def samples(self) -> list[SurvivalSample]:
        return [
            SurvivalSample(tuple(float(v) for v in x), float(t), bool(e))
            for x, t, e in zip(self.features, self.times, self.events)
        ]

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n

    def subset(self, index) -> Dataset:
        index = np.asarray(index)
        return Dataset(self.features[index], self.times[index], self.events[index], self.feature_names)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.events, other.events)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Distinct event times t_0 < ... < t_m plus the horizon t_m + pad.

    Interval j is [t_j, t_{j+1}) for j < m and [t_m, horizon] for j = m.
    """

    event_times: np.ndarray
    horizon_pad: float

    def __post_init__(self):
        t = _frozen(self.event_times)
        object.__setattr__(self, "event_times", t)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("a time grid needs at least one event time")
        if np.any(np.diff(t) <= 0):
            raise ValueError("grid event times must be strictly increasing")
        if not self.horizon_pad > 0:
            raise ValueError("horizon_pad must be positive")

    @property
    def horizon(self) -> float:
        return float(self.event_times[-1] + self.horizon_pad)

    @property
    def size(self) -> int:
        """Number of intervals, m + 1."""
        return self.event_times.size

    def __len__(self) -> int:
        return self.size

    def interval_index(self, t) -> np.ndarray:
        """Index of the interval holding each t; -1 for t < t_0."""
        return np.searchsorted(self.event_times, np.asarray(t, dtype=float), side="right") - 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return np.array_equal(self.event_times, other.event_times) and self.horizon_pad == other.horizon_pad

    __hash__ = None


@dataclass(frozen=True, eq=False)
class StepFunction:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        object.__setattr__(self, "values", v)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got shape {v.shape}")

    def __call__(self, t, before=np.nan):
        """Right-continuous evaluation; ``before`` is returned for t < t_0."""
        idx = self.grid.interval_index(t)
        out = np.where(idx >= 0, self.values[np.clip(idx, 0, None)], before)
        return out if np.ndim(t) else float(out)

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepFunction):
            return NotImplemented
        return type(self) is type(other) and self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ChfCurve(StepFunction):
    """Cumulative hazard step function: positive and non-decreasing."""

    def __post_init__(self):
        super().__post_init__()
        v = self.values
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("cumulative hazard values must be finite and positive (apply the epsilon floor)")
        if np.any(np.diff(v) < 0):
            raise ValueError("cumulative hazard values must be non-decreasing")

    @classmethod
    def floored(cls, grid: TimeGrid, values, epsilon: float = DEFAULT_EPSILON) -> ChfCurve:
        return cls(grid, np.maximum(np.asarray(values, dtype=float), epsilon))

    @property
    def max_value(self) -> float:
        return float(self.values[-1])


def build_time_grid(dataset: Dataset, horizon_pad: float | None = None) -> TimeGrid:
    """Grid of the distinct observed event times of ``dataset``.

    ``horizon_pad`` defaults to ``1e-3 * t_m``.
    """
    if dataset.n == 0:
        raise ValueError("dataset is empty")
    times = np.unique(dataset.times[dataset.events])
    if times.size == 0:
        raise ValueError("no event times: every sample is censored")
    if horizon_pad is None:
        horizon_pad = HORIZON_PAD_FRACTION * times[-1] if times[-1] > 0 else HORIZON_PAD_FRACTION
    if not horizon_pad > 0:
        raise ValueError("horizon_pad must be positive")
    return TimeGrid(times, float(horizon_pad))


def nelson_aalen_increments(times: np.ndarray, events: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct event times and the Nelson-Aalen jumps d_i / r_i at them."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    ev_times = np.unique(times[events])
    if ev_times.size == 0:
        return ev_times, ev_times.copy()
    sorted_t = np.sort(times)
    at_risk = sorted_t.size - np.searchsorted(sorted_t, ev_times, side="left")
    deaths = np.bincount(np.searchsorted(ev_times, times[events]), minlength=ev_times.size)
    return ev_times, deaths / at_risk


def nelson_aalen(dataset: Dataset, grid: TimeGrid, epsilon: float = DEFAULT_EPSILON) -> ChfCurve:
    """Nelson-Aalen cumulative hazard of ``dataset`` evaluated on ``grid``."""
    return ChfCurve.floored(grid, _nelson_aalen_values(dataset.times, dataset.events, grid), epsilon)


def _nelson_aalen_values(times, events, grid: TimeGrid) -> np.ndarray:
    ev_times, jumps = nelson_aalen_increments(times, events)
    cum = np.concatenate([[0.0], np.cumsum(jumps)])
    return cum[np.searchsorted(ev_times, grid.event_times, side="right")]


def chf_to_sf(chf: ChfCurve) -> StepFunction:
    return StepFunction(chf.grid, np.exp(-chf.values))


def resample(curve: ChfCurve, grid: TimeGrid, epsilon: float = DEFAULT_EPSILON) -> ChfCurve:
    """Re-express ``curve`` on ``grid`` by right-continuous step evaluation.

    Grid times before the curve's first event time take the value ``epsilon``.
    """
    if curve.grid == grid:
        return curve
    return ChfCurve.floored(grid, curve(grid.event_times, before=epsilon), epsilon)


def rse(model_chf: StepFunction, approx_chf: StepFunction) -> float:
    """Root mean squared difference of two curves over the grid intervals."""
    if model_chf.grid != approx_chf.grid:
        raise ValueError("curves live on different time grids; resample first")
    diff = model_chf.values - approx_chf.values
    return float(np.sqrt(np.mean(diff**2)))


def mrse(pairs: Iterable[tuple[StepFunction, StepFunction]]) -> float:
    values = [rse(a, b) for a, b in pairs]
    if not values:
        raise ValueError("mrse needs at least one pair")
    return float(np.mean(values))


def c_index(risk_scores, dataset: Dataset) -> float:
    """Harrell's concordance index.

    A pair is comparable when the shorter time is an observed event; tied
    times are not comparable, tied scores count one half.
    """
    s = np.asarray(risk_scores, dtype=float)
    if s.shape != (dataset.n,):
        raise ValueError("one risk score per sample is required")
    t, e = dataset.times, dataset.events
    comparable = (t[:, None] < t[None, :]) & e[:, None]
    n_comp = comparable.sum()
    if n_comp == 0:
        raise ValueError("no comparable pairs")
    ds = s[:, None] - s[None, :]
    score = np.where(ds > 0, 1.0, np.where(ds == 0, 0.5, 0.0))
    return float((score * comparable).sum() / n_comp)
