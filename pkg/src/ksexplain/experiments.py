"""Seeded experiment runners: three-condition tables, contamination, and
(gamma, ridge) sweeps.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .cox import fit_cox
from .dataio import CurveSeries, ExperimentReport, load_bundled
from .datagen import CLUSTER0_CENTER, gen_contaminated, gen_dataset
from .explainer import ExplainConfig, explain_sweep, sample_sphere
from .rsf import RsfParams, fit_rsf
from .survival import DEFAULT_EPSILON, Dataset, chf_to_sf

KINDS = ("synthetic-cox", "synthetic-rsf", "contamination", "real")
DEFAULT_GAMMAS = (0.005, 0.01, 0.05, 0.1, 1.0)
LAMBDA_COX = tuple(np.logspace(-1, 4, 13).tolist())
LAMBDA_RSF = tuple(np.logspace(-1, 6, 13).tolist())
# gamma used for the "with bounds" column when not picking the best one
FIXED_GAMMA = {"cox": 0.1, "rsf": 0.005}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "synthetic-cox"
    model: str | None = None  # cox | rsf; implied by synthetic kinds
    dataset: str = "veteran"  # bundled table for kind == "real"
    large_n: int = 200
    small_n: int = 20
    test_n: int = 10
    gamma_grid: tuple[float, ...] = DEFAULT_GAMMAS
    lambda_cox: tuple[float, ...] = LAMBDA_COX
    lambda_rsf: tuple[float, ...] = LAMBDA_RSF
    ridge: float = 1.0
    bound_gamma: float | None = None  # None -> FIXED_GAMMA[model]
    gamma_mode: str = "fixed"  # fixed | best
    sweep_data: str | None = None  # large | small; None -> large for cox, small for rsf
    contamination_large: tuple[int, int] = (500, 125)  # (total, replaced)
    contamination_small: tuple[int, int] = (20, 5)
    n_neighbors: int = 1000
    radius: float = 0.1
    sphere_radius: float = 8.0
    n_trees: int = 100
    min_leaf_size: int = 3
    epsilon: float = DEFAULT_EPSILON
    n_jobs: int = 1
    seed: int = 0
    curves: bool = False  # attach SF curves of each instance to the report
    standardize: bool = True  # z-score real-data features before training and explaining

    def __post_init__(self):
        for name in ("gamma_grid", "lambda_cox", "lambda_rsf", "contamination_large", "contamination_small"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.model not in (None, "cox", "rsf"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.kind == "real" and self.model is None:
            raise ValueError("kind 'real' needs model = 'cox' or 'rsf'")
        if not 1 <= self.small_n <= self.large_n:
            raise ValueError("need 1 <= small_n <= large_n")
        if self.test_n < 1:
            raise ValueError("test_n must be positive")
        if not self.gamma_grid or any(not 0.0 < g <= 1.0 for g in self.gamma_grid):
            raise ValueError("gamma values must lie in (0, 1]")
        if self.bound_gamma is not None and not 0.0 < self.bound_gamma < 1.0:
            raise ValueError("bound_gamma must lie in (0, 1)")
        if self.gamma_mode not in ("fixed", "best"):
            raise ValueError("gamma_mode must be 'fixed' or 'best'")
        if self.gamma_mode == "best" and not any(g < 1.0 for g in self.gamma_grid):
            raise ValueError("best-gamma mode needs some gamma < 1 in gamma_grid")
        if self.sweep_data not in (None, "large", "small"):
            raise ValueError("sweep_data must be 'large' or 'small'")
        for total, replaced in (self.contamination_large, self.contamination_small):
            if not 0 <= replaced <= total - 4:
                raise ValueError("contamination needs at least 4 clean rows")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")

    @property
    def family(self) -> str:
        if self.model is not None:
            return self.model
        return {"synthetic-cox": "cox", "synthetic-rsf": "rsf"}.get(self.kind, "cox")

    @property
    def ks_gamma(self) -> float:
        return self.bound_gamma if self.bound_gamma is not None else FIXED_GAMMA[self.family]

    def lambdas(self, family: str | None = None) -> tuple[float, ...]:
        return self.lambda_rsf if (family or self.family) == "rsf" else self.lambda_cox

    def to_json(self) -> dict:
        doc = asdict(self)
        for k, v in doc.items():
            if isinstance(v, tuple):
                doc[k] = list(v)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


def _derived_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def train(dataset: Dataset, family: str, config: ExperimentConfig, seed: int):
    if family == "cox":
        return fit_cox(dataset, epsilon=config.epsilon)
    params = RsfParams(n_trees=config.n_trees, min_leaf_size=config.min_leaf_size, seed=seed)
    return fit_rsf(dataset, params, epsilon=config.epsilon, n_jobs=config.n_jobs)


def _stage(name: str, fn, *args):
    try:
        return fn(*args)
    except Exception as exc:
        raise RuntimeError(f"stage '{name}' failed: {exc}") from exc


def _explain_all(model, points, config: ExperimentConfig, gammas, ridges, salt: int):
    """RSE at every test point for every (gamma, ridge); shape (n, |gammas|, |ridges|)."""

    def one(i):
        cfg = ExplainConfig(ridge=ridges[0], n_neighbors=config.n_neighbors, radius=config.radius,
                            epsilon=config.epsilon, seed=_derived_seed(config.seed, salt, i))
        ex = explain_sweep(model, points[i], cfg, gammas, ridges)
        return ex

    idx = range(len(points))
    if config.n_jobs > 1:
        with ThreadPoolExecutor(config.n_jobs) as pool:
            sweeps = list(pool.map(one, idx))
    else:
        sweeps = [one(i) for i in idx]
    rse = np.array([[[s[(g, lam)].rse_at_x for lam in ridges] for g in gammas] for s in sweeps])
    return rse, sweeps


def _gamma_choice(rse_small: np.ndarray, gammas, config: ExperimentConfig) -> int:
    """Index into gammas of the "with bounds" condition."""
    if config.gamma_mode == "fixed":
        return list(gammas).index(config.ks_gamma)
    cand = [j for j, g in enumerate(gammas) if g < 1.0]
    return min(cand, key=lambda j: (rse_small[:, j].mean(), j))


def _curve_series(figure: str, label: str, ex) -> list[CurveSeries]:
    t = tuple(ex.approx_chf.grid.event_times.tolist())
    return [
        CurveSeries(figure, f"{label}:model", t, tuple(chf_to_sf(ex.blackbox_chf).values.tolist())),
        CurveSeries(figure, f"{label}:approx", t, tuple(chf_to_sf(ex.approx_chf).values.tolist())),
    ]


def standardized(data: Dataset) -> Dataset:
    """Features shifted and scaled to mean 0, standard deviation 1; constant columns are only shifted.

    A neighborhood radius means the same thing along every feature only after this.
    """
    mean = data.features.mean(axis=0)
    sd = data.features.std(axis=0)
    sd[sd == 0] = 1.0
    return Dataset((data.features - mean) / sd, data.times, data.events, data.feature_names)


def _datasets(config: ExperimentConfig):
    """(large, small, test points); small rows are a subset of large."""
    rng = np.random.default_rng(config.seed)
    if config.kind == "real":
        large = load_bundled(config.dataset).dataset
        if config.standardize:
            large = standardized(large)
        test = large.features[np.sort(rng.choice(large.n, min(config.test_n, large.n), replace=False))]
    else:
        large = gen_dataset(config.large_n, sphere_radius=config.sphere_radius, rng=rng)
        test = None
    small_idx = np.sort(rng.choice(large.n, min(config.small_n, large.n), replace=False))
    small = large.subset(small_idx)
    if test is None:
        test = sample_sphere(np.zeros(large.d), config.sphere_radius, config.test_n, rng)
    return large, small, small_idx, test


def run_three_condition(config: ExperimentConfig) -> ExperimentReport:
    """E_1 (large, gamma 1), E_2 (small, gamma 1), E_3 (small, with bounds) per test point."""
    if config.kind == "contamination":
        raise ValueError("use run_contamination for kind 'contamination'")
    start = time.perf_counter()
    family = config.family
    large, small, small_idx, test = _stage("data", _datasets, config)
    m_large = _stage("train large", train, large, family, config, config.seed)
    m_small = _stage("train small", train, small, family, config, config.seed)
    ridges = (config.ridge,)
    gammas = tuple(sorted(set(config.gamma_grid) | {1.0, config.ks_gamma}, reverse=True))
    rse_large, ex_large = _stage("explain large", _explain_all, m_large, test, config, (1.0,), ridges, 1)
    rse_small, ex_small = _stage("explain small", _explain_all, m_small, test, config, gammas, ridges, 2)
    rse_small = rse_small[:, :, 0]
    j3 = _gamma_choice(rse_small, gammas, config)
    e1 = rse_large[:, 0, 0]
    e2 = rse_small[:, gammas.index(1.0)]
    e3 = rse_small[:, j3]
    rows = tuple(
        {"instance": i, "E1": float(a), "E2": float(b), "E3": float(c)} for i, (a, b, c) in enumerate(zip(e1, e2, e3))
    )
    aggregates = {
        "MRSE_E1": float(np.mean(e1)),
        "MRSE_E2": float(np.mean(e2)),
        "MRSE_E3": float(np.mean(e3)),
        "E3_gamma": float(gammas[j3]),
        "model": family,
        "n_large": large.n,
        "n_small": small.n,
        "d": large.d,
        "small_indices": small_idx.tolist(),
    }
    if config.kind == "real":
        aggregates["dropped_rows"] = load_bundled(config.dataset).dropped
    curves = []
    if config.curves:
        for i in range(len(test)):
            curves += _curve_series(f"instance{i}", "E1", ex_large[i][(1.0, config.ridge)])
            curves += _curve_series(f"instance{i}", "E2", ex_small[i][(1.0, config.ridge)])
            curves += _curve_series(f"instance{i}", "E3", ex_small[i][(gammas[j3], config.ridge)])
    return ExperimentReport(config.kind, config.seed, config.to_json(), rows, aggregates, (), tuple(curves),
                            round(time.perf_counter() - start, 3))


def _contaminated_sets(config: ExperimentConfig):
    out = {}
    for k, (size, (total, replaced)) in enumerate(
        (("large", config.contamination_large), ("small", config.contamination_small))
    ):
        out[size] = gen_contaminated(total - replaced, total, seed=_derived_seed(config.seed, 10 + k))
    rng = np.random.default_rng(_derived_seed(config.seed, 12))
    test = sample_sphere(np.asarray(CLUSTER0_CENTER), 1.0, config.test_n, rng)
    return out, test


def run_contamination(config: ExperimentConfig) -> ExperimentReport:
    """S_1..S_4 for {large, small} x {cox, rsf}.

    S_1/S_2: clean training data without/with bounds; S_3/S_4: contaminated.
    """
    start = time.perf_counter()
    sets, test = _stage("data", _contaminated_sets, config)
    rows, cells = [], []
    for size in ("large", "small"):
        for family in ("cox", "rsf"):
            g = config.bound_gamma if config.bound_gamma is not None else FIXED_GAMMA[family]
            gammas = (1.0, g)
            per = {}
            for tag, data in (("clean", sets[size].clean), ("contaminated", sets[size].contaminated)):
                # clean and contaminated runs share neighborhoods: a paired comparison
                salt = 20 + 2 * (size == "small") + (family == "rsf")
                model = _stage(f"train {size} {family} {tag}", train, data, family, config, config.seed)
                rse, _ = _stage(f"explain {size} {family} {tag}", _explain_all, model, test, config, gammas,
                                (config.ridge,), salt)
                per[tag] = rse[:, :, 0]
            s = [per["clean"][:, 0], per["clean"][:, 1], per["contaminated"][:, 0], per["contaminated"][:, 1]]
            for i in range(len(test)):
                rows.append({"dataset": size, "model": family, "instance": i,
                             **{f"S{k + 1}": float(s[k][i]) for k in range(4)}})
            cells.append({"dataset": size, "model": family, "gamma": g,
                          **{f"S{k + 1}": float(np.mean(s[k])) for k in range(4)}})
    aggregates = {"table": cells}
    return ExperimentReport("contamination", config.seed, config.to_json(), tuple(rows), aggregates, (), (),
                            round(time.perf_counter() - start, 3))


def run_sweep(config: ExperimentConfig) -> ExperimentReport:
    """MRSE over gamma_grid x lambda grid for one black box."""
    start = time.perf_counter()
    family = config.family
    if config.kind == "contamination":
        raise ValueError("sweeps run on synthetic or real three-condition data")
    large, small, _, test = _stage("data", _datasets, config)
    which = config.sweep_data or ("large" if family == "cox" else "small")
    data = large if which == "large" else small
    model = _stage("train", train, data, family, config, config.seed)
    gammas, ridges = config.gamma_grid, config.lambdas(family)
    rse, _ = _stage("explain", _explain_all, model, test, config, gammas, ridges, 3)
    surface = tuple(
        {"gamma": float(g), "lambda": float(lam), "mrse": float(rse[:, a, b].mean())}
        for a, g in enumerate(gammas)
        for b, lam in enumerate(ridges)
    )
    rows = tuple(
        {"instance": i, "gamma": float(g), "lambda": float(lam), "rse": float(rse[i, a, b])}
        for i in range(len(test))
        for a, g in enumerate(gammas)
        for b, lam in enumerate(ridges)
    )
    aggregates = {"model": family, "data": which, "n_train": data.n}
    return ExperimentReport("sweep", config.seed, config.to_json(), rows, aggregates, surface, (),
                            round(time.perf_counter() - start, 3))


def run(config: ExperimentConfig) -> ExperimentReport:
    if config.kind == "contamination":
        return run_contamination(config)
    return run_three_condition(config)
