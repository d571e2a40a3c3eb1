"""Local Cox-surrogate explanations of black-box survival models."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .ks import KsConfig, theta_bounds
from .solver import ExplanationProblem, ExplanationResult, solve_robust
from .survival import DEFAULT_EPSILON, ChfCurve, Dataset, TimeGrid, nelson_aalen, rse


@runtime_checkable
class BlackBox(Protocol):
    grid: TimeGrid
    training_data: Dataset | None

    @property
    def training_size(self) -> int: ...

    def predict_chf(self, x) -> ChfCurve: ...


@dataclass(frozen=True)
class ExplainConfig:
    ridge: float
    gamma: float = 1.0
    n_neighbors: int = 1000
    radius: float = 0.1
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0
    include_center: bool = True
    tol: float = 1e-8
    max_iter: int = 10_000

    def __post_init__(self):
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be positive")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")


def sample_sphere(center, radius: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` points uniform in the solid ball around ``center``."""
    center = np.asarray(center, dtype=float)
    d = center.size
    direction = rng.standard_normal((count, d))
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    scale = radius * rng.uniform(size=(count, 1)) ** (1.0 / d)
    return center + direction / norms * scale


def neighbor_weight(x, x_k, radius: float):
    """1 - sqrt(|x - x_k| / r), clamped at 0; vectorized over rows of x_k."""
    dist = np.linalg.norm(np.asarray(x_k, dtype=float) - np.asarray(x, dtype=float), axis=-1)
    return np.clip(1.0 - np.sqrt(dist / radius), 0.0, 1.0)


def predict_matrix(blackbox, X) -> np.ndarray:
    if hasattr(blackbox, "predict_values"):
        return np.asarray(blackbox.predict_values(X), dtype=float)
    rows = []
    for i, x in enumerate(X):
        try:
            rows.append(blackbox.predict_chf(x).values)
        except Exception as exc:
            raise RuntimeError(f"black-box prediction failed for neighbor {i}") from exc
    return np.array(rows)


@dataclass(frozen=True, eq=False)
class Neighborhood:
    """Sampled neighbors of x with weights and black-box CHF values.

    Reused across (gamma, ridge) settings of one explanation.
    """

    center: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    chf_values: np.ndarray
    baseline: ChfCurve
    training_size: int


def build_neighborhood(blackbox, x, config: ExplainConfig, baseline: ChfCurve | None = None) -> Neighborhood:
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(config.seed)
    points = sample_sphere(x, config.radius, config.n_neighbors, rng)
    if config.include_center:
        points = np.vstack([points, x])
    weights = neighbor_weight(x, points, config.radius)
    chf = predict_matrix(blackbox, points)
    if chf.shape != (points.shape[0], blackbox.grid.size):
        raise ValueError("black-box predictions do not match its time grid")
    if baseline is None:
        if blackbox.training_data is None:
            raise ValueError("the black box carries no training data for the baseline estimate")
        baseline = nelson_aalen(blackbox.training_data, blackbox.grid, config.epsilon)
    return Neighborhood(x, points, weights, chf, baseline, blackbox.training_size)


@dataclass(frozen=True, eq=False)
class Explanation:
    coefficients: np.ndarray
    approx_chf: ChfCurve
    blackbox_chf: ChfCurve
    rse_at_x: float
    solver_diagnostics: ExplanationResult
    gamma: float
    ridge: float
    feature_names: tuple[str, ...] = ()

    def to_json(self) -> dict:
        names = self.feature_names or tuple(f"x{i}" for i in range(self.coefficients.size))
        grid = self.approx_chf.grid.event_times.tolist()
        diag = self.solver_diagnostics
        return {
            "coefficients": dict(zip(names, self.coefficients.tolist())),
            "blackbox_chf": {"grid": grid, "values": self.blackbox_chf.values.tolist()},
            "approx_chf": {"grid": grid, "values": self.approx_chf.values.tolist()},
            "rse_at_x": self.rse_at_x,
            "gamma": self.gamma,
            "ridge": self.ridge,
            "objective": diag.objective,
            "kkt_residual": diag.kkt_residual,
            "iterations": diag.iterations,
            "non_unique": diag.non_unique,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def explanation_problem(nb: Neighborhood, gamma: float, ridge: float,
                        epsilon: float = DEFAULT_EPSILON) -> ExplanationProblem:
    """Assemble the robust problem: one interval [R_k, Q_k] per neighbor."""
    d_half = KsConfig(gamma, max(nb.training_size, 1), epsilon).halfwidth
    H = nb.chf_values
    delta = np.maximum(H[:, -1] - epsilon, 0.0) * d_half
    lower, upper = theta_bounds(H, np.log(nb.baseline.values), delta, epsilon)
    return ExplanationProblem(nb.points, nb.weights, upper.max(axis=1), lower.min(axis=1), ridge)


def explain_neighborhood(nb: Neighborhood, gamma: float, ridge: float, config: ExplainConfig,
                         blackbox_chf: ChfCurve | None = None,
                         feature_names: Sequence[str] = ()) -> Explanation:
    problem = explanation_problem(nb, gamma, ridge, config.epsilon)
    result = solve_robust(problem, tol=config.tol, max_iter=config.max_iter)
    b = result.coefficients
    grid = nb.baseline.grid
    approx = ChfCurve.floored(grid, nb.baseline.values * np.exp(nb.center @ b), config.epsilon)
    if blackbox_chf is None:
        if config.include_center:
            blackbox_chf = ChfCurve.floored(grid, nb.chf_values[-1], config.epsilon)
        else:
            raise ValueError("blackbox_chf is required when the center is not a neighbor")
    return Explanation(b, approx, blackbox_chf, rse(blackbox_chf, approx), result, gamma, ridge,
                       tuple(feature_names))


def explain(blackbox, x, config: ExplainConfig, baseline: ChfCurve | None = None) -> Explanation:
    """Explain the black-box CHF at x by a locally fitted Cox model."""
    x = np.asarray(x, dtype=float)
    nb = build_neighborhood(blackbox, x, config, baseline)
    bb_chf = blackbox.predict_chf(x)
    names = blackbox.training_data.feature_names if blackbox.training_data is not None else ()
    return explain_neighborhood(nb, config.gamma, config.ridge, config, bb_chf, names)


def explain_sweep(blackbox, x, config: ExplainConfig, gammas: Sequence[float], ridges: Sequence[float],
                  baseline: ChfCurve | None = None) -> dict[tuple[float, float], Explanation]:
    """Explanations for every (gamma, ridge) pair over one shared neighborhood."""
    x = np.asarray(x, dtype=float)
    nb = build_neighborhood(blackbox, x, config, baseline)
    bb_chf = blackbox.predict_chf(x)
    return {
        (g, lam): explain_neighborhood(nb, g, lam, replace(config, gamma=g, ridge=lam), bb_chf)
        for g in gammas
        for lam in ridges
    }
