import itertools
import math

import numpy as np
import pytest
import scipy.optimize
from conftest import random_sequence

from spherecov import (
    CauchyTemporal,
    DomainError,
    GegenbauerBasis,
    InsufficientDataError,
    ModelValidationError,
    ObservationRecord,
    SchoenbergSequence,
    build_gram,
    decreasing_projection,
    empirical_isotropic_correlation,
    evaluate_series,
    fit_nonnegative,
    monotone_shape,
    nonnegative_least_squares,
    psd_check,
    random_points,
    sample_field,
    sequence_model,
    sequence_space_time_model,
)

LEGENDRE = GegenbauerBasis(2, 10)


def brute_force_decreasing_projection(y, w):
    """Exact oracle: enumerate all block partitions, take the cheapest
    feasible blockwise weighted-mean vector."""
    n = len(y)
    best, best_cost = None, np.inf
    for cuts in itertools.product([0, 1], repeat=n - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n]
        z = np.empty(n)
        means = []
        for a, b in zip(bounds, bounds[1:]):
            mean = np.dot(w[a:b], y[a:b]) / np.sum(w[a:b])
            z[a:b] = mean
            means.append(mean)
        if any(m2 > m1 + 1e-12 for m1, m2 in zip(means, means[1:])):
            continue
        cost = float(np.dot(w, (y - z) ** 2))
        if cost < best_cost:
            best, best_cost = z, cost
    return best


class TestEmpiricalCorrelation:
    def test_duplicated_identical_records(self):
        rec = ObservationRecord(lat=10.0, lon=20.0, t=0.0, value=3.5)
        bins = empirical_isotropic_correlation([rec] * 6, num_bins=4, time_window=1.0)
        assert len(bins) == 1
        assert bins[0].x == pytest.approx(1.0)
        assert bins[0].correlation == 1.0
        assert bins[0].count == 15

    def test_no_pairs_within_window(self):
        records = [
            ObservationRecord(lat=0.0, lon=10.0 * i, t=float(i), value=float(i))
            for i in range(5)
        ]
        with pytest.raises(InsufficientDataError):
            empirical_isotropic_correlation(records, num_bins=5, time_window=0.0)

    def test_needs_two_records(self):
        rec = ObservationRecord(lat=0.0, lon=0.0, t=0.0, value=1.0)
        with pytest.raises(InsufficientDataError):
            empirical_isotropic_correlation([rec], num_bins=3, time_window=1.0)

    def test_simulated_field_recovers_model_curve(self):
        # replicated spatial fields: fast-decaying temporal factor makes the
        # time slices independent, pairs inside the window are same-slice
        rng = np.random.default_rng(77)
        seq = SchoenbergSequence(1.0, [0.4, 0.35, 0.25])
        model = sequence_space_time_model(seq, LEGENDRE, CauchyTemporal(0.01))
        locations = random_points(sequence_model(seq, LEGENDRE), 30, rng)
        points = []
        records = []
        for slice_idx in range(12):
            t = 10.0 * slice_idx
            for loc in locations:
                points.append(
                    type(loc)(spheres=loc.spheres, times=(t,))
                )
        draws = sample_field(model, points, 1, rng_seed=5)[0]
        for p, v in zip(points, draws):
            lat = math.degrees(math.asin(p.spheres[0].coords[2]))
            lon = math.degrees(
                math.atan2(p.spheres[0].coords[1], p.spheres[0].coords[0])
            )
            records.append(ObservationRecord(lat=lat, lon=lon, t=p.times[0], value=v))
        bins = empirical_isotropic_correlation(records, num_bins=8, time_window=0.5)
        assert sum(b.count for b in bins) > 1000
        for b in bins:
            if b.count < 100:
                continue
            want = evaluate_series(seq, LEGENDRE, b.x)
            assert b.correlation == pytest.approx(want, abs=0.3)


class TestNonnegativeLeastSquares:
    def test_matches_scipy_on_random_problems(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            m, n = int(rng.integers(3, 12)), int(rng.integers(1, 6))
            A = rng.standard_normal((m, n))
            b = rng.standard_normal(m)
            x, rnorm = nonnegative_least_squares(A, b)
            x_ref, rnorm_ref = scipy.optimize.nnls(A, b)
            np.testing.assert_allclose(x, x_ref, atol=1e-8)
            assert rnorm == pytest.approx(rnorm_ref, abs=1e-8)
            assert np.all(x >= 0)

    def test_unconstrained_interior_solution(self):
        A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        b = np.array([1.0, 2.0, 3.0])
        x, _ = nonnegative_least_squares(A, b)
        ref = np.linalg.lstsq(A, b, rcond=None)[0]
        np.testing.assert_allclose(x, ref, atol=1e-12)

    def test_all_negative_target(self):
        A = np.eye(3)
        b = -np.ones(3)
        x, rnorm = nonnegative_least_squares(A, b)
        np.testing.assert_allclose(x, 0.0)
        assert rnorm == pytest.approx(math.sqrt(3.0))


class TestFitNonnegative:
    def _curve(self, seq, basis, xs, weights=None):
        ys = evaluate_series(seq, basis, xs)
        ws = np.ones_like(xs) if weights is None else weights
        return list(zip(xs, ys, ws))

    def test_exact_recovery(self):
        rng = np.random.default_rng(12)
        for dim in (1, 2, 3):
            basis = GegenbauerBasis(dim, 6)
            seq = random_sequence(rng, 6)
            xs = np.linspace(-1, 1, 2 * 7 + 3)
            res = fit_nonnegative(self._curve(seq, basis, xs), basis, 6)
            assert res.sequence.scale == pytest.approx(seq.scale, rel=1e-8)
            np.testing.assert_allclose(
                res.sequence.coefficients, seq.coefficients, atol=1e-8
            )
            assert res.residual < 1e-8

    def test_constant_curve(self):
        xs = np.linspace(-1, 1, 9)
        curve = [(float(x), 3.0, 1.0) for x in xs]
        res = fit_nonnegative(curve, LEGENDRE, 4)
        assert res.sequence.scale == pytest.approx(3.0, rel=1e-10)
        assert res.sequence.coefficients[0] == pytest.approx(1.0, abs=1e-10)

    def test_pure_first_harmonic(self):
        xs = np.linspace(-1, 1, 9)
        curve = [(float(x), float(x), 1.0) for x in xs]
        res = fit_nonnegative(curve, LEGENDRE, 3)
        assert res.sequence.scale == pytest.approx(1.0, rel=1e-10)
        assert res.sequence.coefficients[1] == pytest.approx(1.0, abs=1e-10)

    def test_inconsistent_data(self):
        xs = np.linspace(-1, 1, 9)
        curve = [(float(x), -1.0, 1.0) for x in xs]
        with pytest.raises(ModelValidationError, match="positive scale"):
            fit_nonnegative(curve, LEGENDRE, 3)

    def test_needs_enough_points(self):
        with pytest.raises(InsufficientDataError):
            fit_nonnegative([(0.0, 1.0, 1.0)], LEGENDRE, 2)

    def test_residual_beats_random_sequences(self):
        rng = np.random.default_rng(13)
        xs = np.linspace(-1, 1, 25)
        ys = 0.5 + 0.3 * xs + 0.1 * rng.standard_normal(25)
        curve = [(float(x), float(y), 1.0) for x, y in zip(xs, ys)]
        res = fit_nonnegative(curve, LEGENDRE, 4)
        table = np.column_stack(
            [evaluate_series(SchoenbergSequence(1.0, np.eye(5)[n]), LEGENDRE, xs) for n in range(5)]
        )
        for _ in range(100):
            cand = random_sequence(rng, 4)
            resid = np.linalg.norm(table @ (cand.scale * cand.coefficients) - ys)
            assert res.residual <= resid + 1e-12

    def test_fitted_sequence_is_positive_definite(self):
        rng = np.random.default_rng(14)
        xs = np.linspace(-1, 1, 30)
        ys = np.exp(-2 * (1 - xs)) + 0.05 * rng.standard_normal(30)
        curve = [(float(x), float(y), 1.0) for x, y in zip(xs, ys)]
        res = fit_nonnegative(curve, LEGENDRE, 6)
        model = sequence_model(res.sequence, LEGENDRE)
        g = build_gram(model, random_points(model, 40, rng))
        assert psd_check(g, 1e-8).is_psd


class TestMonotoneShape:
    def test_already_nonincreasing_unchanged(self):
        y = np.array([5.0, 3.0, 3.0, 1.0])
        np.testing.assert_array_equal(decreasing_projection(y), y)

    def test_single_violating_pair(self):
        np.testing.assert_allclose(
            decreasing_projection(np.array([1.0, 3.0])), [2.0, 2.0]
        )

    def test_three_term_example(self):
        np.testing.assert_allclose(
            decreasing_projection(np.array([3.0, 1.0, 2.0])), [3.0, 1.5, 1.5]
        )

    def test_renormalized_output(self):
        out = monotone_shape(np.array([1.0, 3.0]))
        np.testing.assert_allclose(out, [0.5, 0.5])
        assert out.sum() == pytest.approx(1.0)

    def test_output_nonincreasing_exactly(self):
        rng = np.random.default_rng(15)
        for _ in range(200):
            n = int(rng.integers(1, 9))
            y = rng.uniform(0, 1, n)
            out = decreasing_projection(y, rng.uniform(0.1, 2.0, n))
            assert np.all(np.diff(out) <= 0.0)

    def test_preserves_weighted_mean(self):
        rng = np.random.default_rng(16)
        for _ in range(100):
            n = int(rng.integers(1, 8))
            y = rng.uniform(0, 2, n)
            w = rng.uniform(0.1, 3.0, n)
            out = decreasing_projection(y, w)
            assert np.dot(w, out) == pytest.approx(np.dot(w, y), rel=1e-12)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(150):
            n = int(rng.integers(2, 7))
            y = rng.uniform(0, 1, n)
            w = rng.uniform(0.2, 2.0, n)
            got = decreasing_projection(y, w)
            want = brute_force_decreasing_projection(y, w)
            np.testing.assert_allclose(got, want, atol=1e-6)

    def test_rejects_negative_coefficients(self):
        with pytest.raises(DomainError):
            monotone_shape(np.array([-0.1, 0.5]))
