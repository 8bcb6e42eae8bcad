"""Training loop, optimizer behavior, and evaluation metrics."""

import numpy as np
import pytest

from polyaflow.autodiff import Tape
from polyaflow.baselines import FixedPrior, LearnableHistogram
from polyaflow.data import Dataset, synth
from polyaflow.flow import DensityEstimator, FlowModel, build_flow
from polyaflow.polya_tree import PolyaTreeModel
from polyaflow.train import (
    Adam,
    TrainConfig,
    avg_log_likelihood,
    bits_per_dim,
    build_estimator,
    density_grid,
    sse_calibration,
    train,
)

EMPTY = np.array([], dtype=np.intp)


def _identity_gaussian(rng=None):
    """Estimator whose flow starts as the identity map (zero-init couplings)."""
    rng = rng or np.random.default_rng(0)
    flow = build_flow(2, n_coupling=1, hidden=(8,), sigmoid=False, rng=rng)
    return DensityEstimator(flow, FixedPrior("gaussian", 2))


def _balanced_grid_dataset():
    """16 cell centers of the depth-2 dyadic partition of (0, 1]^2."""
    centers = (np.arange(4) + 0.5) / 4.0
    gx, gy = np.meshgrid(centers, centers, indexing="ij")
    pts = np.column_stack([gx.reshape(-1), gy.reshape(-1)])
    return Dataset(points=pts, train_idx=np.arange(16), val_idx=EMPTY,
                   test_idx=EMPTY)


class TestConfig:
    def test_rejects_unknown_prior(self):
        with pytest.raises(ValueError, match="prior"):
            TrainConfig(prior="cauchy")

    def test_hidden_coerced_to_ints(self):
        cfg = TrainConfig(hidden=[16.0, 8.0])
        assert cfg.hidden == (16, 8)


class TestAdam:
    def test_quadratic_convergence(self):
        p = {"w": np.array([5.0, -4.0])}
        target = np.array([3.0, 1.5])
        opt = Adam()
        for _ in range(600):
            opt.step(p, {"w": p["w"] - target}, lambda k: 0.1)
        np.testing.assert_allclose(p["w"], target, atol=1e-3)

    def test_first_step_has_lr_magnitude(self):
        p = {"w": np.array([0.0])}
        Adam().step(p, {"w": np.array([1e-6])}, lambda k: 0.05)
        assert abs(p["w"][0] + 0.05) < 1e-3


class TestBuildEstimator:
    def test_tree_prior_gets_unit_cube_flow(self):
        cfg = TrainConfig(prior="vpt", levels=3)
        est = build_estimator(cfg, 2, np.random.default_rng(0))
        assert isinstance(est.base, PolyaTreeModel)
        assert est.flow.has_sigmoid
        assert not est.smooth_base

    def test_histogram_bins_default_to_tree_leaf_count(self):
        cfg = TrainConfig(prior="histogram", levels=3, bins=0)
        est = build_estimator(cfg, 2, np.random.default_rng(0))
        assert isinstance(est.base, LearnableHistogram)
        assert est.base.raw_widths.shape == (8, 2)
        assert est.flow.has_sigmoid

    def test_fixed_priors_skip_sigmoid(self):
        for kind in ("gaussian", "logistic"):
            cfg = TrainConfig(prior=kind)
            est = build_estimator(cfg, 3, np.random.default_rng(1))
            assert isinstance(est.base, FixedPrior)
            assert not est.flow.has_sigmoid

    def test_smooth_base_applies_only_to_tree(self):
        rng = np.random.default_rng(2)
        assert build_estimator(
            TrainConfig(prior="vpt", smooth_base=True), 2, rng).smooth_base
        assert not build_estimator(
            TrainConfig(prior="gaussian", smooth_base=True), 2, rng).smooth_base


class TestTrainLoop:
    def test_uniform_tree_on_balanced_grid_is_stationary(self):
        # every leaf holds exactly one point, so branch gradients cancel and
        # the loss (uniform density on the unit square -> 0 nats) cannot move
        ds = _balanced_grid_dataset()
        est = DensityEstimator(FlowModel(2, []), PolyaTreeModel.uniform(2, 2))
        cfg = TrainConfig(prior="vpt", levels=2, epochs=10, batch_size=16,
                          lr_prior=0.1, patience=100)
        est, report = train(cfg, ds, estimator=est)
        assert np.abs(report.train_nll).max() < 1e-6
        assert abs(report.final["val_nll"]) < 1e-6
        left, right = est.base.alphas()
        np.testing.assert_allclose(left, 1.0, atol=1e-6)
        np.testing.assert_allclose(right, 1.0, atol=1e-6)

    def test_loss_decreases_on_clustered_data(self):
        ds = synth("eight_gaussians", 800, np.random.default_rng(3))
        cfg = TrainConfig(prior="vpt", levels=2, flow_layers=1, hidden=(16,),
                          epochs=12, batch_size=256, seed=3)
        _, report = train(cfg, ds)
        assert report.train_nll[-1] < report.train_nll[0]
        assert report.final["val_nll"] < report.val_nll[0]

    def test_conjugate_epoch_blends_closed_form_update(self):
        rng = np.random.default_rng(4)
        pts = rng.random((32, 2)) * 0.999 + 0.0005
        ds = Dataset(points=pts, train_idx=np.arange(32), val_idx=EMPTY,
                     test_idx=EMPTY)
        base = PolyaTreeModel.uniform(2, 2)
        est = DensityEstimator(FlowModel(2, []), base)
        cfg = TrainConfig(prior="vpt", levels=2, epochs=1, batch_size=32,
                          conjugate=True, conjugate_blend=0.9)
        est, _ = train(cfg, ds, estimator=est)
        refreshed = PolyaTreeModel.uniform(2, 2).conjugate_update(
            pts, prior_alphas=1.0, count_scale=1.0)
        want_l = 0.9 * 1.0 + 0.1 * refreshed.alphas()[0]
        want_r = 0.9 * 1.0 + 0.1 * refreshed.alphas()[1]
        got_l, got_r = est.base.alphas()
        np.testing.assert_allclose(got_l, want_l, atol=1e-12)
        np.testing.assert_allclose(got_r, want_r, atol=1e-12)

    def test_divergence_reports_epoch_and_batch(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(0.0, 1e-3, size=(48, 2))
        ds = Dataset(points=pts, train_idx=np.arange(48), val_idx=EMPTY,
                     test_idx=EMPTY)
        # tiny data pushes the scaling layer's log-scale up by ~lr per step;
        # lr 1e3 overflows exp() on the second batch
        cfg = TrainConfig(prior="gaussian", flow_layers=0, epochs=3,
                          batch_size=24, lr_flow=1e3)
        with np.errstate(over="ignore"):
            with pytest.raises(RuntimeError,
                               match=r"non-finite loss at epoch 0, batch 1"):
                train(cfg, ds)

    def test_empty_train_split_rejected(self):
        ds = Dataset(points=np.zeros((4, 2)), train_idx=EMPTY,
                     val_idx=np.arange(4), test_idx=EMPTY)
        with pytest.raises(ValueError, match="training split"):
            train(TrainConfig(prior="gaussian"), ds)

    def test_seeded_runs_reproduce_bitwise(self):
        ds = synth("two_spirals", 400, np.random.default_rng(6))
        cfg = TrainConfig(prior="vpt", levels=2, flow_layers=1, hidden=(8,),
                          epochs=6, batch_size=128, seed=11)
        est_a, rep_a = train(cfg, ds)
        est_b, rep_b = train(cfg, ds)
        assert rep_a.substantive_fields() == rep_b.substantive_fields()
        pa, pb = est_a.parameter_arrays(), est_b.parameter_arrays()
        assert pa.keys() == pb.keys()
        for k in pa:
            np.testing.assert_array_equal(pa[k], pb[k])

    def test_early_stopping_restores_best_parameters(self):
        ds = synth("eight_gaussians", 500, np.random.default_rng(7))
        cfg = TrainConfig(prior="gaussian", flow_layers=1, hidden=(8,),
                          epochs=60, batch_size=128, patience=5, seed=7)
        est, report = train(cfg, ds)
        assert report.best_epoch == int(np.argmin(report.val_nll))
        assert report.final["val_nll"] == min(report.val_nll)
        recomputed = -avg_log_likelihood(est, ds.val)
        assert abs(recomputed - report.final["val_nll"]) < 1e-12

    def test_polyak_run_completes_and_reproduces(self):
        ds = synth("eight_gaussians", 400, np.random.default_rng(8))
        cfg = TrainConfig(prior="gaussian", flow_layers=1, hidden=(8,),
                          epochs=5, batch_size=128, polyak=True, seed=8)
        _, rep_a = train(cfg, ds)
        _, rep_b = train(cfg, ds)
        assert rep_a.substantive_fields() == rep_b.substantive_fields()
        assert len(rep_a.val_nll) == 5

    def test_kl_penalty_shrinks_alphas_toward_one(self):
        rng = np.random.default_rng(9)
        pts = np.clip(rng.beta(0.3, 0.3, size=(256, 2)), 1e-4, 1 - 1e-4)
        ds = Dataset(points=pts, train_idx=np.arange(256), val_idx=EMPTY,
                     test_idx=EMPTY)

        def deviation(kl_weight):
            est = DensityEstimator(FlowModel(2, []), PolyaTreeModel.uniform(2, 2))
            cfg = TrainConfig(prior="vpt", levels=2, epochs=25, batch_size=256,
                              kl_weight=kl_weight, seed=9)
            est, _ = train(cfg, ds, estimator=est)
            left, right = est.base.alphas()
            return max(np.abs(left - 1.0).max(), np.abs(right - 1.0).max())

        assert deviation(50.0) < deviation(0.0)


class TestMetrics:
    def test_bits_per_dim_agrees_with_nats(self):
        est = _identity_gaussian()
        x = np.random.default_rng(10).normal(size=(64, 2))
        nats = float(est.log_likelihood(x).mean())
        assert abs(bits_per_dim(est, x) - (-nats / (2 * np.log(2.0)))) < 1e-12
        assert abs(avg_log_likelihood(est, x) - nats) < 1e-15

    def test_avg_log_likelihood_rejects_empty(self):
        with pytest.raises(ValueError, match="nonempty"):
            avg_log_likelihood(_identity_gaussian(), np.zeros((0, 2)))

    def test_sse_near_one_on_self_samples(self):
        est = _identity_gaussian()
        draws = est.sample(2000, np.random.default_rng(11))
        sse = sse_calibration(est, draws, np.random.default_rng(12), n_samples=8000)
        assert 0.9 < sse < 1.1

    def test_sse_detects_overdispersed_data(self):
        est = _identity_gaussian()
        wide = 3.0 * np.random.default_rng(13).normal(size=(1500, 2))
        sse = sse_calibration(est, wide, np.random.default_rng(14), n_samples=6000)
        assert sse > 5.0

    def test_sse_rejects_degenerate_model(self):
        class Frozen:
            def sample(self, n, rng):
                return np.zeros((n, 2))

        with pytest.raises(RuntimeError, match="zero spread"):
            sse_calibration(Frozen(), np.zeros((10, 2)), np.random.default_rng(0))


class TestDensityGrid:
    def test_shape_and_ordering(self):
        grid = density_grid(_identity_gaussian(), (-3.0, 3.0), 21)
        assert grid.shape == (441, 3)
        # x is the outer loop: the first 21 rows share x and sweep y
        assert np.all(grid[:21, 0] == -3.0)
        assert grid[0, 1] == -3.0 and grid[20, 1] == 3.0
        assert grid[21, 0] > -3.0

    def test_riemann_sum_near_one(self):
        grid = density_grid(_identity_gaussian(), (-6.0, 6.0), 61)
        cell = (12.0 / 60.0) ** 2
        assert abs(grid[:, 2].sum() * cell - 1.0) < 0.02

    def test_separate_axis_bounds(self):
        grid = density_grid(_identity_gaussian(), ((-1.0, 2.0), (0.0, 4.0)), 5)
        assert grid[:, 0].min() == -1.0 and grid[:, 0].max() == 2.0
        assert grid[:, 1].min() == 0.0 and grid[:, 1].max() == 4.0

    def test_bad_arguments(self):
        est = _identity_gaussian()
        with pytest.raises(ValueError, match="bounds"):
            density_grid(est, (3.0, -3.0), 10)
        with pytest.raises(ValueError, match="resolution"):
            density_grid(est, (-1.0, 1.0), 1)
