"""Synthetic right-censored data from a Weibull-baseline Cox model."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .explainer import sample_sphere
from .survival import Dataset

PAPER_B_TRUE = (-0.25, 1e-6, -0.1, 0.35, 1e-6)
CLUSTER0_CENTER = (2.0,) * 5
CLUSTER1_CENTER = (5.0,) * 5
CLUSTER0_B_TRUE = (1e-6, 0.1, 0.35, 1e-6, 1e-6)
CLUSTER1_B_TRUE = (1e-6, -0.6, 1e-6, 1e-6, -0.15)


@dataclass(frozen=True)
class WeibullCoxGen:
    coefficients: tuple[float, ...] = PAPER_B_TRUE
    scale: float = 1e-5
    shape: float = 2.0
    truncation: float = 2000.0
    censor_prob: float = 0.1
    seed: int = 0
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not (self.scale > 0 and self.shape > 0):
            raise ValueError("scale and shape must be positive")
        if not 0.0 <= self.censor_prob <= 1.0:
            raise ValueError("censor_prob must lie in [0, 1]")

    @property
    def d(self) -> int:
        return len(self.coefficients)

    @property
    def names(self) -> tuple[str, ...]:
        return self.feature_names or tuple(f"x{i}" for i in range(self.d))

    def survival(self, t, x) -> np.ndarray:
        """Untruncated survival function exp(-scale * exp(x.b) * t^shape)."""
        risk = np.exp(np.asarray(x, dtype=float) @ np.asarray(self.coefficients))
        return np.exp(-self.scale * risk * np.asarray(t, dtype=float) ** self.shape)


def gen_survival_time(x, gen: WeibullCoxGen, u, truncate: bool = True):
    """Inverse-CDF draw T = (-ln u / (scale * exp(x.b)))^(1/shape), capped at the truncation."""
    risk = np.exp(np.asarray(x, dtype=float) @ np.asarray(gen.coefficients, dtype=float))
    t = (-np.log(u) / (gen.scale * risk)) ** (1.0 / gen.shape)
    return np.minimum(t, gen.truncation) if truncate else t


def _draw(X, gen: WeibullCoxGen, rng: np.random.Generator):
    # (0, 1): u == 0 would give an infinite time
    u = 1.0 - rng.uniform(size=X.shape[0])
    times = gen_survival_time(X, gen, u)
    events = rng.uniform(size=X.shape[0]) >= gen.censor_prob
    return times, events


def gen_dataset(n: int, sphere_center=None, sphere_radius: float = 8.0,
                gen: WeibullCoxGen = WeibullCoxGen(), rng: np.random.Generator | None = None) -> Dataset:
    if n < 1:
        raise ValueError("n must be positive")
    rng = rng if rng is not None else np.random.default_rng(gen.seed)
    center = np.zeros(gen.d) if sphere_center is None else np.asarray(sphere_center, dtype=float)
    X = sample_sphere(center, sphere_radius, n, rng)
    times, events = _draw(X, gen, rng)
    return Dataset(X, times, events, gen.names)


@dataclass(frozen=True, eq=False)
class ContaminatedData:
    clean: Dataset
    contaminated: Dataset
    replaced: np.ndarray  # row indices of ``contaminated`` holding cluster-1 samples


def gen_contaminated(n_clean: int | None, n_total: int, seed: int = 0, max_draws: int = 1_000_000,
                     clean_gen: WeibullCoxGen | None = None,
                     contaminant_gen: WeibullCoxGen | None = None) -> ContaminatedData:
    """Cluster-0 training set and a copy whose leading ``n_total - n_clean``
    rows are swapped for cluster-1 samples that outlive every clean sample.

    ``n_clean=None`` replaces the first quarter, ``floor(n_total / 4)`` rows.
    """
    if n_clean is None:
        n_clean = n_total - n_total // 4
    if not n_total >= n_clean >= 4:
        raise ValueError("need n_total >= n_clean >= 4")
    rng = np.random.default_rng(seed)
    g0 = clean_gen or WeibullCoxGen(coefficients=CLUSTER0_B_TRUE)
    g1 = contaminant_gen or WeibullCoxGen(coefficients=CLUSTER1_B_TRUE)
    clean = gen_dataset(n_total, CLUSTER0_CENTER, 1.0, g0, rng)
    n_replace = n_total - n_clean
    if n_replace == 0:
        return ContaminatedData(clean, clean, np.arange(0))
    t_max = clean.times.max()
    X1, T1, E1 = [], [], []
    drawn = 0
    while len(T1) < n_replace:
        batch = max(4 * n_replace, 256)
        if drawn + batch > max_draws:
            raise RuntimeError(f"rejection sampling exceeded {max_draws} draws")
        drawn += batch
        Xb = sample_sphere(np.asarray(CLUSTER1_CENTER), 1.0, batch, rng)
        Tb, Eb = _draw(Xb, g1, rng)
        ok = Tb > t_max
        X1.extend(Xb[ok])
        T1.extend(Tb[ok])
        E1.extend(Eb[ok])
    X = clean.features.copy()
    T = clean.times.copy()
    E = clean.events.copy()
    rows = np.arange(n_replace)
    X[rows] = np.array(X1[:n_replace])
    T[rows] = np.array(T1[:n_replace])
    E[rows] = np.array(E1[:n_replace])
    return ContaminatedData(clean, Dataset(X, T, E, clean.feature_names), rows)
