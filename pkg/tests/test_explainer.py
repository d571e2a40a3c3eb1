import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_dataset
from ksexplain.cox import fit_cox
from ksexplain.explainer import (
    BlackBox, ExplainConfig, build_neighborhood, explain, explain_sweep, explanation_problem, neighbor_weight,
    sample_sphere,
)
from ksexplain.rsf import RsfParams, fit_rsf
from ksexplain.solver import solve_precise
from ksexplain.survival import ChfCurve, build_time_grid, nelson_aalen


@given(st.integers(1, 6), st.floats(0.01, 10), st.integers(0, 1000))
def test_sphere_points_inside_ball(d, r, seed):
    c = np.arange(d, dtype=float)
    pts = sample_sphere(c, r, 200, np.random.default_rng(seed))
    assert pts.shape == (200, d)
    assert np.all(np.linalg.norm(pts - c, axis=1) <= r * (1 + 1e-12))


def test_sphere_is_uniform_in_volume():
    # radial CDF of a uniform ball in d dimensions is (rho / r)^d
    pts = sample_sphere(np.zeros(3), 2.0, 40_000, np.random.default_rng(0))
    rho = np.linalg.norm(pts, axis=1) / 2.0
    for q in (0.3, 0.6, 0.9):
        assert np.mean(rho <= q) == pytest.approx(q**3, abs=0.01)


def test_neighbor_weight_examples():
    x = np.zeros(2)
    assert neighbor_weight(x, x, 0.1) == 1.0
    assert neighbor_weight(x, [0.1, 0.0], 0.1) == pytest.approx(0.0)
    assert neighbor_weight(x, [0.025, 0.0], 0.1) == pytest.approx(0.5)
    assert neighbor_weight(x, [1.0, 0.0], 0.1) == 0.0
    w = neighbor_weight(x, np.array([[0.0, 0.0], [0.0, 0.025]]), 0.1)
    np.testing.assert_allclose(w, [1.0, 0.5])


def test_config_validation():
    for kw in ({"n_neighbors": 0}, {"radius": 0.0}, {"gamma": 0.0}, {"gamma": 1.5}, {"ridge": -1.0}):
        with pytest.raises(ValueError):
            ExplainConfig(**{"ridge": 1.0, **kw})


def cox_blackbox(n=300, seed=0, b=(0.5, -0.3)):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    t = rng.exponential(1.0 / np.exp(X @ np.array(b)))
    return fit_cox(make_dataset(t, rng.uniform(size=n) < 0.9, X))


def test_models_satisfy_the_protocol():
    model = cox_blackbox()
    assert isinstance(model, BlackBox)


class ProportionalBox:
    """H(t | x) = H_NA(t) exp(b.x) on the training data's Nelson-Aalen curve."""

    def __init__(self, data, b):
        self.training_data = data
        self.grid = build_time_grid(data)
        self.base = nelson_aalen(data, self.grid)
        self.b = np.asarray(b, dtype=float)

    @property
    def training_size(self):
        return self.training_data.n

    def predict_chf(self, x):
        return ChfCurve(self.grid, self.base.values * np.exp(np.asarray(x) @ self.b))


def test_proportional_blackbox_is_recovered_exactly():
    box = ProportionalBox(cox_blackbox().training_data, [0.4, -1.1])
    assert isinstance(box, BlackBox)
    for ridge in (0.0, 1e-9):
        ex = explain(box, np.array([0.3, 0.2]), ExplainConfig(ridge=ridge, n_neighbors=200))
        np.testing.assert_allclose(ex.coefficients, [0.4, -1.1], atol=1e-6)
        assert ex.rse_at_x < 1e-10


def test_precise_path_equals_gamma_one():
    model = cox_blackbox()
    cfg = ExplainConfig(ridge=0.5, n_neighbors=200)
    nb = build_neighborhood(model, np.zeros(2), cfg)
    theta = np.log(nb.chf_values) - np.log(nb.baseline.values)
    precise = solve_precise(nb.points, nb.weights, theta, ridge=0.5)
    p = explanation_problem(nb, 1.0, 0.5)
    np.testing.assert_array_equal(p.q_upper, theta.max(axis=1))
    np.testing.assert_array_equal(p.r_lower, theta.min(axis=1))
    ex = explain(model, np.zeros(2), cfg)
    np.testing.assert_allclose(ex.coefficients, precise.coefficients, atol=1e-10)


def test_smaller_gamma_widens_every_interval():
    data_model = fit_rsf(cox_blackbox().training_data, RsfParams(n_trees=10, seed=0))
    cfg = ExplainConfig(ridge=1.0, n_neighbors=100)
    nb = build_neighborhood(data_model, np.zeros(2), cfg)
    probs = [explanation_problem(nb, g, 1.0) for g in (1.0, 0.5, 0.1, 0.01)]
    for a, b in zip(probs, probs[1:]):
        assert np.all(b.q_upper >= a.q_upper) and np.all(b.r_lower <= a.r_lower)


def test_neighborhood_shape_and_center():
    model = cox_blackbox()
    cfg = ExplainConfig(ridge=1.0, n_neighbors=50, radius=0.2, seed=7)
    x = np.array([1.0, 1.0])
    nb = build_neighborhood(model, x, cfg)
    assert nb.points.shape == (51, 2)
    np.testing.assert_array_equal(nb.points[-1], x)
    assert nb.weights[-1] == 1.0 and np.all(nb.weights >= 0)
    again = build_neighborhood(model, x, cfg)
    np.testing.assert_array_equal(nb.points, again.points)
    no_center = build_neighborhood(model, x, ExplainConfig(ridge=1.0, n_neighbors=50, include_center=False))
    assert no_center.points.shape == (50, 2)


def test_missing_training_data_is_reported():
    from dataclasses import replace
    model = replace(cox_blackbox(), training_data=None)
    with pytest.raises(ValueError, match="training data"):
        explain(model, np.zeros(2), ExplainConfig(ridge=1.0, n_neighbors=10))


def test_explanation_json_and_sweep():
    model = cox_blackbox()
    cfg = ExplainConfig(ridge=1.0, n_neighbors=100)
    ex = explain(model, np.zeros(2), cfg)
    doc = json.loads(ex.dumps())
    assert set(doc["coefficients"]) == {"x0", "x1"}
    assert len(doc["approx_chf"]["values"]) == model.grid.size
    assert doc["rse_at_x"] == pytest.approx(ex.rse_at_x)
    sweep = explain_sweep(model, np.zeros(2), cfg, [1.0, 0.1], [0.5, 1.0])
    assert set(sweep) == {(1.0, 0.5), (1.0, 1.0), (0.1, 0.5), (0.1, 1.0)}
    np.testing.assert_array_equal(sweep[(1.0, 1.0)].coefficients, ex.coefficients)
