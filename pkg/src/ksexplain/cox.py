"""Cox proportional hazards model with Breslow ties and Breslow baseline."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConvergenceError, SeparationError
from .survival import DEFAULT_EPSILON, ChfCurve, Dataset, TimeGrid, build_time_grid

SEPARATION_GUARD = 50.0


class _RiskSets:
    """Sorted view of a dataset for fast risk-set sums at each event time."""

    def __init__(self, dataset: Dataset):
        order = np.argsort(dataset.times, kind="stable")
        self.X = dataset.features[order]
        self.times = dataset.times[order]
        events = dataset.events[order]
        self.event_times = np.unique(self.times[events])
        # first sorted position with time >= t, for each distinct event time
        self.start = np.searchsorted(self.times, self.event_times, side="left")
        self.deaths = np.bincount(
            np.searchsorted(self.event_times, self.times[events]), minlength=self.event_times.size
        ).astype(float)
        self.x_event_sum = self.X[events].sum(axis=0)

    def sums(self, b: np.ndarray):
        """Risk-set sums S0, S1, S2 (shifted by exp(-shift)) and the shift."""
        eta = self.X @ b
        shift = eta.max() if eta.size else 0.0
        r = np.exp(eta - shift)
        s0 = np.cumsum(r[::-1])[::-1][self.start]
        rx = r[:, None] * self.X
        s1 = np.cumsum(rx[::-1], axis=0)[::-1][self.start]
        s2 = np.cumsum((rx[:, :, None] * self.X[:, None, :])[::-1], axis=0)[::-1][self.start]
        return eta, s0, s1, s2, shift


def log_partial_likelihood(dataset: Dataset, b, risk: _RiskSets | None = None) -> float:
    """Breslow log partial likelihood."""
    risk = risk or _RiskSets(dataset)
    b = np.asarray(b, dtype=float)
    _, s0, _, _, shift = risk.sums(b)
    return float(risk.x_event_sum @ b - np.sum(risk.deaths * (np.log(s0) + shift)))


def score_and_information(dataset: Dataset, b, risk: _RiskSets | None = None):
    """Gradient of the log partial likelihood and the observed information."""
    risk = risk or _RiskSets(dataset)
    b = np.asarray(b, dtype=float)
    _, s0, s1, s2, _ = risk.sums(b)
    mean = s1 / s0[:, None]
    grad = risk.x_event_sum - risk.deaths @ mean
    cov = s2 / s0[:, None, None] - mean[:, :, None] * mean[:, None, :]
    info = np.tensordot(risk.deaths, cov, axes=1)
    return grad, info


@dataclass(frozen=True, eq=False)
class CoxModel:
    coefficients: np.ndarray
    baseline_chf: ChfCurve
    training_data: Dataset | None = None
    epsilon: float = DEFAULT_EPSILON
    loglik_path: tuple[float, ...] = ()

    def __post_init__(self):
        b = np.array(self.coefficients, dtype=float)
        b.setflags(write=False)
        object.__setattr__(self, "coefficients", b)
        if b.ndim != 1 or not np.all(np.isfinite(b)):
            raise ValueError("coefficients must be a finite vector")

    @property
    def grid(self) -> TimeGrid:
        return self.baseline_chf.grid

    @property
    def d(self) -> int:
        return self.coefficients.size

    @property
    def training_size(self) -> int:
        return self.training_data.n if self.training_data is not None else 0

    def predict_values(self, X) -> np.ndarray:
        """CHF values for each row of X, shape (n, m + 1)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ValueError(f"expected {self.d} features, got {X.shape[1]}")
        scale = np.exp(X @ self.coefficients)
        return np.maximum(self.baseline_chf.values[None, :] * scale[:, None], self.epsilon)

    def predict_chf(self, x) -> ChfCurve:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"expected a feature vector of length {self.d}, got shape {x.shape}")
        return ChfCurve(self.grid, self.predict_values(x)[0])

    def risk_scores(self, X) -> np.ndarray:
        return np.atleast_2d(np.asarray(X, dtype=float)) @ self.coefficients

    def to_json(self) -> dict:
        return {
            "coefficients": self.coefficients.tolist(),
            "grid": self.grid.event_times.tolist(),
            "baseline": self.baseline_chf.values.tolist(),
            "horizon_pad": self.grid.horizon_pad,
        }

    @classmethod
    def from_json(cls, doc: dict, epsilon: float = DEFAULT_EPSILON) -> CoxModel:
        times = np.asarray(doc["grid"], dtype=float)
        pad = doc.get("horizon_pad", 1e-3 * times[-1])
        grid = TimeGrid(times, pad)
        return cls(np.asarray(doc["coefficients"]), ChfCurve(grid, doc["baseline"]), epsilon=epsilon)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @classmethod
    def load(cls, path) -> CoxModel:
        return cls.from_json(json.loads(Path(path).read_text()))


def breslow_baseline(dataset: Dataset, b, grid: TimeGrid, epsilon: float = DEFAULT_EPSILON,
                     risk: _RiskSets | None = None) -> ChfCurve:
    """Breslow cumulative baseline hazard evaluated on ``grid``."""
    risk = risk or _RiskSets(dataset)
    _, s0, _, _, shift = risk.sums(np.asarray(b, dtype=float))
    jumps = risk.deaths / (s0 * np.exp(shift))
    cum = np.concatenate([[0.0], np.cumsum(jumps)])
    values = cum[np.searchsorted(risk.event_times, grid.event_times, side="right")]
    return ChfCurve.floored(grid, values, epsilon)


def fit_cox(
    dataset: Dataset,
    newton_tol: float = 1e-8,
    max_iter: int = 100,
    epsilon: float = DEFAULT_EPSILON,
    grid: TimeGrid | None = None,
    guard: float = SEPARATION_GUARD,
) -> CoxModel:
    """Maximise the Breslow partial likelihood by Newton-Raphson with step halving."""
    if grid is None:
        grid = build_time_grid(dataset)
    risk = _RiskSets(dataset)
    b = np.zeros(dataset.d)
    loglik = log_partial_likelihood(dataset, b, risk)
    path = [loglik]
    for _ in range(max_iter):
        grad, info = score_and_information(dataset, b, risk)
        # minimum-norm step: full one-hot blocks make the information singular
        step = np.linalg.lstsq(info, grad, rcond=1e-12)[0]
        # under separation the gradient vanishes while the step does not
        if np.linalg.norm(grad) <= newton_tol and np.linalg.norm(step) <= 1e-4:
            break
        # changes below rounding level count as no decrease
        slack = 1e-12 * (1.0 + abs(loglik))
        t = 1.0
        while True:
            candidate = b + t * step
            new_loglik = log_partial_likelihood(dataset, candidate, risk)
            if new_loglik >= loglik - slack or t < 1e-10:
                break
            t *= 0.5
        if new_loglik < loglik - slack:
            # no ascent along the Newton direction: numerically at the optimum
            break
        b, loglik = candidate, new_loglik
        path.append(loglik)
        if np.linalg.norm(b) > guard:
            raise SeparationError("separation detected: coefficient norm exceeded the guard", b)
    else:
        grad, _ = score_and_information(dataset, b, risk)
        if np.linalg.norm(grad) > newton_tol:
            raise ConvergenceError(
                f"Newton-Raphson did not converge in {max_iter} iterations "
                f"(gradient norm {np.linalg.norm(grad):.3g})",
                b,
            )
    if np.any(b):
        # divergent fits stall once the score underflows; the curvature along b
        # then collapses compared with its value at the start
        _, info0 = score_and_information(dataset, np.zeros(dataset.d), risk)
        _, info = score_and_information(dataset, b, risk)
        if b @ info @ b <= 1e-8 * (b @ info0 @ b):
            raise SeparationError("separation detected: the likelihood is flat along the coefficients", b)
    baseline = breslow_baseline(dataset, b, grid, epsilon, risk)
    return CoxModel(b, baseline, training_data=dataset, epsilon=epsilon, loglik_path=tuple(path))
