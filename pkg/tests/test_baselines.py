"""Histogram and fixed-prior baselines: routing, normalization, gradients."""

import numpy as np
import pytest
from scipy import stats

from polyaflow import autodiff as ad
from polyaflow.baselines import FixedPrior, LearnableHistogram

from helpers import check_gradients


def random_histogram(rng, bins=4, dims=2):
    h = LearnableHistogram.uniform(bins, dims)
    h.raw_widths[...] = rng.uniform(-1.5, 1.0, h.raw_widths.shape)
    h.raw_logits[...] = rng.uniform(-1.0, 1.0, h.raw_logits.shape)
    return h


class TestHistogramStructure:
    def test_uniform_is_flat_on_unit_cube(self):
        h = LearnableHistogram.uniform(4, 2)
        np.testing.assert_allclose(h.boundaries()[-1], 1.0, atol=1e-12)
        x = np.random.default_rng(0).uniform(0.01, 1.0, (10, 2))
        np.testing.assert_allclose(h.log_density(x), 0.0, atol=1e-10)

    def test_param_count(self):
        assert LearnableHistogram.uniform(16, 2).param_count() == 64
        assert LearnableHistogram.uniform(8, 3).param_count() == 48

    def test_boundaries_increasing(self):
        h = random_histogram(np.random.default_rng(2), bins=6, dims=3)
        edges = h.boundaries()
        assert np.all(np.diff(edges, axis=0) > 0.0)
        assert np.all(edges[0] == 0.0)

    def test_probabilities_normalized(self):
        h = random_histogram(np.random.default_rng(3), bins=5, dims=2)
        np.testing.assert_allclose(h.probabilities().sum(axis=0), 1.0, atol=1e-12)


class TestActiveBin:
    def test_halfopen_convention(self):
        h = LearnableHistogram.uniform(2, 1)
        # boundaries (0, 0.5, 1): the shared edge belongs to the left cell
        assert h.active_bin(0, 0.5) == 0
        assert h.active_bin(0, 0.25) == 0
        assert h.active_bin(0, 0.75) == 1
        assert h.active_bin(0, 1.0) == 1

    def test_domain_errors(self):
        h = LearnableHistogram.uniform(2, 1)
        with pytest.raises(ValueError):
            h.active_bin(0, 0.0)
        with pytest.raises(ValueError):
            h.active_bin(0, 1.5)

    def test_binary_search_matches_linear_scan(self):
        rng = np.random.default_rng(7)
        h = random_histogram(rng, bins=9, dims=2)
        edges = h.boundaries()
        for _ in range(300):
            d = int(rng.integers(2))
            x = float(rng.uniform(1e-9, edges[-1, d]))
            found = h.active_bin(d, x)
            scan = next(k for k in range(h.bins) if edges[k, d] < x <= edges[k + 1, d])
            assert found == scan


class TestHistogramDensity:
    def test_normalizes_on_unit_cube_1d(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            h = random_histogram(rng, bins=int(rng.integers(2, 9)), dims=1)
            edges = h.boundaries()[:, 0]
            mids_z = 0.5 * (edges[:-1] + edges[1:]) / edges[-1]
            lens_z = np.diff(edges) / edges[-1]
            dens = np.exp(h.log_density(mids_z[:, None]))
            assert float(dens @ lens_z) == pytest.approx(1.0, abs=1e-10)

    def test_cell_values_by_hand(self):
        h = LearnableHistogram.uniform(2, 1)
        # masses (0.75, 0.25) on widths (0.5, 0.5): density 1.5 then 0.5
        h.raw_logits[:, 0] = [np.log(3.0), 0.0]
        out = np.exp(h.log_density(np.array([[0.2], [0.9]])))
        np.testing.assert_allclose(out, [1.5, 0.5], atol=1e-12)

    def test_own_support_matches_unit_cube_with_jacobian(self):
        rng = np.random.default_rng(13)
        h = random_histogram(rng, bins=5, dims=2)
        total = h.boundaries()[-1]
        z = rng.uniform(0.05, 1.0, (20, 2))
        unit = h.log_density(z)
        own = h.log_density_own_support(z * total)
        np.testing.assert_allclose(unit, own + np.log(total).sum(), atol=1e-10)

    def test_domain_error(self):
        h = LearnableHistogram.uniform(3, 2)
        with pytest.raises(ValueError):
            h.log_density(np.array([[0.5, 0.0]]))

    def test_gradients(self):
        rng = np.random.default_rng(17)
        h = random_histogram(rng, bins=4, dims=2)
        z = rng.uniform(0.05, 0.95, (15, 2))
        keys = list(h.parameter_arrays().keys())

        def build(tape, leaves):
            pvars = dict(zip(keys, leaves))
            return h.log_density_vars(tape, pvars, z).sum()

        check_gradients(build, list(h.parameter_arrays().values()), tol=1e-4)


class TestHistogramSampling:
    def test_cell_frequencies(self):
        rng = np.random.default_rng(19)
        h = random_histogram(rng, bins=3, dims=1)
        draws = h.sample_latent(30000, np.random.default_rng(23))
        assert np.all((draws > 0.0) & (draws <= 1.0))
        edges_z = h.boundaries()[:, 0] / h.boundaries()[-1, 0]
        counts = np.histogram(draws[:, 0], bins=edges_z)[0]
        probs = h.probabilities()[:, 0]
        sigma = np.sqrt(probs * (1.0 - probs) * draws.shape[0])
        assert np.all(np.abs(counts - probs * draws.shape[0]) < 4.0 * sigma + 1e-9)

    def test_deterministic(self):
        h = random_histogram(np.random.default_rng(1), bins=4, dims=3)
        a = h.sample_latent(64, np.random.default_rng(5))
        b = h.sample_latent(64, np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)


class TestFixedPrior:
    def test_gaussian_matches_scipy(self):
        p = FixedPrior("gaussian", 3)
        x = np.random.default_rng(2).standard_normal((12, 3))
        oracle = stats.multivariate_normal(np.zeros(3), np.eye(3)).logpdf(x)
        np.testing.assert_allclose(p.log_density(x), oracle, atol=1e-10)

    def test_logistic_matches_scipy(self):
        p = FixedPrior("logistic", 2)
        x = np.random.default_rng(3).standard_normal((12, 2)) * 3.0
        oracle = stats.logistic.logpdf(x).sum(axis=1)
        np.testing.assert_allclose(p.log_density(x), oracle, atol=1e-10)

    def test_no_parameters(self):
        assert FixedPrior("gaussian", 4).parameter_arrays() == {}
        assert FixedPrior("logistic", 4).param_count() == 0

    def test_sampling_moments(self):
        rng = np.random.default_rng(4)
        g = FixedPrior("gaussian", 2).sample_latent(50000, rng)
        assert abs(g.mean()) < 0.02
        assert g.std() == pytest.approx(1.0, abs=0.02)
        logi = FixedPrior("logistic", 1).sample_latent(50000, rng)
        assert logi.std() == pytest.approx(np.pi / np.sqrt(3.0), abs=0.05)

    def test_kind_validation(self):
        with pytest.raises(ValueError):
            FixedPrior("cauchy", 2)
