import numpy as np
import pytest
from conftest import random_model, random_sequence

from spherecov import (
    DomainError,
    GegenbauerBasis,
    NumericalError,
    SchoenbergSequence,
    build_gram,
    enkf_ensemble,
    psd_check,
    psd_square_root,
    random_points,
    sample_field,
    sequence_model,
)

LEGENDRE = GegenbauerBasis(2, 8)


class TestPsdSquareRoot:
    def test_factors_reproduce_matrix(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((6, 6))
        spd = a @ a.T
        L = psd_square_root(spd)
        np.testing.assert_allclose(L @ L.T, spd, atol=1e-12)

    def test_rank_deficient_ok(self):
        L = psd_square_root(np.ones((4, 4)))
        np.testing.assert_allclose(L @ L.T, np.ones((4, 4)), atol=1e-12)

    def test_indefinite_rejected(self):
        with pytest.raises(NumericalError):
            psd_square_root(np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestSampleField:
    def test_constant_model_gives_constant_draws(self):
        model = sequence_model(SchoenbergSequence(1.5, [1.0]), LEGENDRE)
        rng = np.random.default_rng(1)
        pts = random_points(model, 7, rng)
        draws = sample_field(model, pts, 20, rng_seed=3)
        spread = draws.max(axis=1) - draws.min(axis=1)
        assert np.max(spread) < 1e-8

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(2)
        model = random_model(rng)
        pts = random_points(model, 5, rng)
        a = sample_field(model, pts, 8, rng_seed=11)
        b = sample_field(model, pts, 8, rng_seed=11)
        np.testing.assert_array_equal(a, b)

    def test_draws_independent_of_total_count(self):
        # documents the per-draw seed-derivation rule
        rng = np.random.default_rng(3)
        model = random_model(rng)
        pts = random_points(model, 4, rng)
        few = sample_field(model, pts, 3, rng_seed=9)
        many = sample_field(model, pts, 10, rng_seed=9)
        np.testing.assert_array_equal(few, many[:3])

    def test_sample_covariance_matches_gram(self):
        rng = np.random.default_rng(4)
        seq = random_sequence(rng, 5)
        model = sequence_model(seq, LEGENDRE)
        pts = random_points(model, 5, rng)
        gram = build_gram(model, pts).entries
        draws = sample_field(model, pts, 10_000, rng_seed=21)
        sample_cov = np.cov(draws, rowvar=False, ddof=1)
        n = draws.shape[0]
        se = np.sqrt((np.outer(np.diag(gram), np.diag(gram)) + gram**2) / n)
        assert np.all(np.abs(sample_cov - gram) <= 5.0 * se)

    def test_sample_mean_near_zero(self):
        rng = np.random.default_rng(5)
        seq = random_sequence(rng, 4)
        model = sequence_model(seq, LEGENDRE)
        pts = random_points(model, 6, rng)
        c0 = model.covariance(pts[0], pts[0])
        n = 4000
        draws = sample_field(model, pts, n, rng_seed=17)
        assert np.all(np.abs(draws.mean(axis=0)) <= 5.0 * np.sqrt(c0 / n))

    def test_relabeling_invariance_in_law(self):
        rng = np.random.default_rng(6)
        model = random_model(rng)
        pts = random_points(model, 8, rng)
        perm = rng.permutation(8)
        g = build_gram(model, pts).entries
        g_perm = build_gram(model, [pts[i] for i in perm]).entries
        np.testing.assert_array_equal(g_perm, g[np.ix_(perm, perm)])

    def test_rejects_bad_draw_count(self):
        model = sequence_model(SchoenbergSequence(1.0, [1.0]), LEGENDRE)
        pts = random_points(model, 2, np.random.default_rng(0))
        with pytest.raises(DomainError):
            sample_field(model, pts, 0, rng_seed=0)


class TestEnkfEnsemble:
    def test_vanishing_variance_limit(self):
        model = sequence_model(
            SchoenbergSequence(1e-30, [0.6, 0.4]), LEGENDRE
        )
        rng = np.random.default_rng(7)
        pts = random_points(model, 4, rng)
        res = enkf_ensemble(model, pts, 50, rng_seed=13)
        assert np.max(np.abs(res.sample_covariance)) < 1e-20

    def test_sample_covariance_symmetric_psd(self):
        rng = np.random.default_rng(8)
        model = random_model(rng)
        pts = random_points(model, 6, rng)
        res = enkf_ensemble(model, pts, 40, rng_seed=5)
        from spherecov import GramMatrix

        assert psd_check(GramMatrix(res.sample_covariance), 1e-8).is_psd

    def test_frobenius_error_shrinks_with_ensemble_size(self):
        rng = np.random.default_rng(9)
        seq = random_sequence(rng, 4)
        model = sequence_model(seq, LEGENDRE)
        pts = random_points(model, 5, rng)
        gram = build_gram(model, pts).entries
        err_small, err_big = [], []
        for seed in range(20):
            small = enkf_ensemble(model, pts, 10, rng_seed=1000 + seed)
            big = enkf_ensemble(model, pts, 1000, rng_seed=2000 + seed)
            err_small.append(np.linalg.norm(small.sample_covariance - gram))
            err_big.append(np.linalg.norm(big.sample_covariance - gram))
        assert np.mean(err_big) < np.mean(err_small)

    def test_requires_two_members(self):
        model = sequence_model(SchoenbergSequence(1.0, [1.0]), LEGENDRE)
        pts = random_points(model, 2, np.random.default_rng(0))
        with pytest.raises(DomainError):
            enkf_ensemble(model, pts, 1, rng_seed=0)
