import numpy as np
import pytest

from reefseg.cluster import GmmConfig, gmm_fit
from reefseg.cluster.gmm import _logsumexp_rows, _weighted_log_densities
from reefseg.prep import SampleMatrix


def matrix(points):
    vals = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if vals.shape[0] == 1 and vals.shape[1] > 1:
        vals = vals.T
    return SampleMatrix(vals, np.arange(vals.shape[0]))


class TestClosedForms:
    def test_k1_maximum_likelihood(self):
        m = matrix([[1.0, 0.0], [3.0, 2.0], [5.0, 4.0]])
        model, labels, resp = gmm_fit(m, 1, GmmConfig(reg=1e-6))
        assert np.allclose(model.means[0], m.values.mean(axis=0))
        diff = m.values - m.values.mean(axis=0)
        pop_cov = diff.T @ diff / m.n
        assert np.allclose(model.covariances[0], pop_cov + 1e-6 * np.eye(2))
        assert model.weights.tolist() == [1.0]
        assert (labels == 0).all()
        assert np.allclose(resp, 1.0)

    def test_hand_computed_log_likelihood(self):
        # n=2, d=1, k=1, samples {0, 2}, reg=1e-6:
        # mu = 1, var = 1 + 1e-6,
        # LL = sum log N(x | 1, var) = -log(2*pi*var) - 1/var
        m = matrix([0.0, 2.0])
        model, _, _ = gmm_fit(m, 1, GmmConfig(reg=1e-6))
        var = 1.0 + 1e-6
        expected = -np.log(2.0 * np.pi * var) - 1.0 / var
        assert model.log_likelihood == pytest.approx(expected, abs=1e-9)
        assert model.covariances[0, 0, 0] == pytest.approx(var, abs=1e-12)


class TestEmInvariants:
    def fits(self, count=30):
        rng = np.random.default_rng(7)
        for trial in range(count):
            n = int(rng.integers(20, 80))
            d = int(rng.integers(1, 4))
            k = int(rng.integers(1, 5))
            x = rng.normal(size=(n, d)) + rng.integers(0, 3, size=(n, 1))
            m = SampleMatrix(x, np.arange(n))
            yield m, k, gmm_fit(m, k, GmmConfig(seed=trial))

    def test_log_likelihood_monotone(self):
        for _, _, (model, _, _) in self.fits():
            hist = np.array(model.ll_history)
            assert (np.diff(hist) >= -1e-8).all(), hist

    def test_weights_sum_to_one(self):
        for _, _, (model, _, _) in self.fits(10):
            assert abs(model.weights.sum() - 1.0) < 1e-9
            assert (model.weights >= 0).all()

    def test_responsibility_rows_sum_to_one(self):
        for _, _, (_, _, resp) in self.fits(10):
            assert np.abs(resp.sum(axis=1) - 1.0).max() < 1e-9

    def test_covariances_keep_floor(self):
        for _, _, (model, _, _) in self.fits(10):
            for cov in model.covariances:
                assert np.allclose(cov, cov.T)
                eigs = np.linalg.eigvalsh(cov)
                assert eigs.min() >= 1e-6 - 1e-12

    def test_labels_scale_invariant(self):
        # Argmax labels survive any uniform positive scaling of all
        # mixture densities (a constant shift in log space).
        rng = np.random.default_rng(3)
        x = rng.normal(size=(50, 2)) + rng.integers(0, 2, size=(50, 1)) * 3
        m = SampleMatrix(x, np.arange(50))
        model, labels, _ = gmm_fit(m, 2)
        weighted = _weighted_log_densities(
            m.values, model.means, model.covariances, model.weights
        )
        shifted = weighted + np.log(173.5)
        assert np.array_equal(shifted.argmax(axis=1), labels)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        m = SampleMatrix(rng.normal(size=(40, 2)), np.arange(40))
        a = gmm_fit(m, 3, GmmConfig(seed=5))
        b = gmm_fit(m, 3, GmmConfig(seed=5))
        assert np.array_equal(a[1], b[1])
        assert a[0].log_likelihood == b[0].log_likelihood


class TestContracts:
    def test_k_zero(self):
        with pytest.raises(ValueError):
            gmm_fit(matrix([1.0, 2.0]), 0)

    def test_k_exceeds_n(self):
        with pytest.raises(ValueError):
            gmm_fit(matrix([1.0, 2.0]), 3)

    def test_n_must_exceed_d(self):
        m = SampleMatrix(np.eye(2), np.arange(2))
        with pytest.raises(ValueError):
            gmm_fit(m, 1)

    def test_only_full_covariance(self):
        with pytest.raises(ValueError):
            gmm_fit(matrix([0.0, 1.0, 2.0]), 1, GmmConfig(covariance="diag"))


def test_logsumexp_matches_direct():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(20, 4)) * 50
    direct = np.log(np.exp(a).sum(axis=1))
    assert np.allclose(_logsumexp_rows(a), direct)
