"""Tests for splinecore - Cox-de Boor basis and curve evaluation."""

import numpy as np
import pytest
from scipy.spatial import Delaunay

from src.errors import ContractError, DomainError, ReefValidationError
from src.splinecore import (
    BSplineCurve2D,
    KnotVector,
    basis,
    basis_matrix,
    clamped_knots,
    eval_curve,
    sample_curve,
    uniform_knots,
)


def _random_knots(rng: np.random.Generator, degree: int) -> KnotVector:
    """Random non-decreasing knot vector with some repeated knots."""
    n_ctrl = int(rng.integers(degree + 1, degree + 8))
    size = n_ctrl + degree + 1
    values = np.sort(rng.uniform(-5.0, 5.0, size))
    # Repeat a few knots to exercise the 0/0 convention
    for idx in rng.choice(size - 1, size=min(2, size - 1), replace=False):
        values[idx + 1] = values[idx]
    values = np.sort(values)
    if values[0] == values[-1]:
        values[-1] += 1.0
    return KnotVector(tuple(values.tolist()))


class TestKnotVector:
    """Tests for knot vector validation and constructors."""

    def test_decreasing_rejected(self):
        """Test that a decreasing knot vector is a validation error."""
        with pytest.raises(ReefValidationError):
            KnotVector((0.0, 2.0, 1.0))

    def test_too_short_rejected(self):
        """Test that fewer than 2 knots are rejected."""
        with pytest.raises(ReefValidationError):
            KnotVector((0.0,))

    def test_clamped_knots_layout(self):
        """Test the clamped cubic knot vector for 4 control points."""
        assert clamped_knots(4, 3).knots == (0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0)

    def test_clamped_knots_interior(self):
        """Test interior knots are evenly spaced."""
        assert clamped_knots(6, 3).knots == (0.0, 0.0, 0.0, 0.0, 1 / 3, 2 / 3, 1.0, 1.0, 1.0, 1.0)

    def test_uniform_knots_layout(self):
        """Test uniform knots are consecutive integers."""
        assert uniform_knots(4, 3).knots == tuple(float(i) for i in range(8))

    def test_last_nonempty_span_skips_repeats(self):
        """Test last nonempty span index with a repeated final knot."""
        assert KnotVector((0.0, 1.0, 2.0, 2.0)).last_nonempty_span == 1


class TestBasis:
    """Tests for the scalar basis function."""

    def test_degree_zero_indicator(self):
        """Test degree-0 basis inside its span."""
        assert basis(0, 0, 0.5, [0, 1, 2]) == 1.0

    def test_degree_zero_half_open(self):
        """Test that a shared knot belongs only to the right span."""
        assert basis(0, 0, 1.0, [0, 1, 2]) == 0.0
        assert basis(1, 0, 1.0, [0, 1, 2]) == 1.0

    def test_final_span_closed(self):
        """Test that the last nonempty span includes its right end."""
        assert basis(1, 0, 2.0, [0, 1, 2]) == 1.0

    def test_uniform_cubic_values(self):
        """Test the classic uniform cubic values 1/6 and 2/3."""
        knots = [0, 1, 2, 3, 4, 5, 6, 7]
        assert basis(0, 3, 2.0, knots) == pytest.approx(2 / 3, abs=1e-12)
        assert basis(0, 3, 1.0, knots) == pytest.approx(1 / 6, abs=1e-12)

    def test_uniform_cubic_at_integer_knots(self):
        """Test B_{0,3} at the integer knots 0..4 equals 0, 1/6, 2/3, 1/6, 0."""
        knots = list(range(8))
        values = [basis(0, 3, float(t), knots) for t in range(5)]
        assert values == pytest.approx([0.0, 1 / 6, 2 / 3, 1 / 6, 0.0], abs=1e-12)

    def test_t_outside_knots(self):
        """Test domain error when t is outside the knot range."""
        with pytest.raises(DomainError):
            basis(0, 2, 10.0, [0, 1, 2, 3, 4])

    def test_index_out_of_range(self):
        """Test contract error when i + k + 1 exceeds the knot vector."""
        with pytest.raises(ContractError):
            basis(2, 2, 1.0, [0, 1, 2, 3, 4])

    def test_negative_degree(self):
        """Test contract error for a negative degree."""
        with pytest.raises(ContractError):
            basis(0, -1, 0.5, [0, 1, 2])

    def test_invalid_knots(self):
        """Test validation error for a non-monotone knot vector."""
        with pytest.raises(ReefValidationError):
            basis(0, 0, 0.5, [0, 2, 1])

    def test_repeated_knots_zero_over_zero(self):
        """Test that zero-denominator terms contribute zero."""
        knots = [0, 0, 0, 0, 1, 1, 1, 1]
        assert basis(0, 3, 0.0, knots) == 1.0
        assert basis(3, 3, 1.0, knots) == 1.0

    def test_local_support_and_non_negativity(self):
        """Test basis is zero exactly outside its support and never negative."""
        knots = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
        for t in np.linspace(0.0, 7.0, 141):
            for i in range(4):
                value = basis(i, 3, float(t), knots)
                assert value >= 0.0
                inside = knots[i] <= t < knots[i + 4]
                assert (value != 0.0) == inside or (t == knots[i] and value == 0.0)


class TestBasisMatrix:
    """Tests for the vectorized basis table."""

    def test_matches_recursion(self):
        """Test table evaluation agrees with the recursion within 1e-12."""
        rng = np.random.default_rng(3)
        for degree in range(0, 6):
            for _ in range(5):
                kv = _random_knots(rng, degree)
                ts = rng.uniform(kv.first, kv.last, 25)
                ts = np.concatenate([ts, kv.as_array()])
                table = basis_matrix(degree, ts, kv)
                for row, t in enumerate(ts):
                    for i in range(table.shape[1]):
                        assert table[row, i] == pytest.approx(basis(i, degree, float(t), kv), abs=1e-12)

    def test_partition_of_unity_random(self):
        """Test partition of unity for 100 random knot vectors, degrees 0-5, 1000 points."""
        rng = np.random.default_rng(2024)
        for _ in range(100):
            for degree in range(0, 6):
                n_ctrl = int(rng.integers(degree + 1, degree + 10))
                kv = KnotVector(tuple(np.sort(rng.uniform(0.0, 10.0, n_ctrl + degree + 1)).tolist()))
                lo, hi = kv[degree], kv[n_ctrl]
                if lo >= hi:
                    continue
                ts = np.concatenate([rng.uniform(lo, hi, 998), [lo, hi]])
                sums = basis_matrix(degree, ts, kv).sum(axis=1)
                np.testing.assert_allclose(sums, 1.0, atol=1e-9)

    def test_shape(self):
        """Test the table shape is (len(ts), len(knots) - k - 1)."""
        table = basis_matrix(3, [0.0, 0.5, 1.0], clamped_knots(6, 3))
        assert table.shape == (3, 6)

    def test_outside_domain(self):
        """Test domain error for parameters outside the knots."""
        with pytest.raises(DomainError):
            basis_matrix(1, [2.5], [0, 1, 2])


class TestBSplineCurve2D:
    """Tests for curve construction, evaluation and sampling."""

    def test_knot_length_mismatch(self):
        """Test validation error when knots don't match n + degree + 1."""
        with pytest.raises(ReefValidationError):
            BSplineCurve2D(np.zeros((4, 2)), 3, KnotVector((0, 0, 0, 1, 1, 1)))

    def test_too_few_points(self):
        """Test validation error with fewer than degree + 1 control points."""
        with pytest.raises(ReefValidationError):
            BSplineCurve2D.clamped([(0, 0), (1, 1)], degree=3)

    def test_domain(self):
        """Test the valid domain is [knots[k], knots[n]]."""
        curve = BSplineCurve2D.uniform([(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)], degree=3)
        assert curve.domain == (3.0, 5.0)

    def test_constant_curve(self):
        """Test affine invariance: equal control points give that point."""
        curve = BSplineCurve2D.clamped([(3.0, -1.5)] * 5, degree=3)
        for t in (0.0, 0.2, 0.5, 0.99, 1.0):
            np.testing.assert_allclose(eval_curve(curve, t), (3.0, -1.5), atol=1e-12)

    def test_clamped_endpoints(self):
        """Test clamped cubic interpolates the first and last control points."""
        curve = BSplineCurve2D.clamped([(0, 0), (1, 0), (2, 0), (3, 0)], degree=3)
        assert tuple(eval_curve(curve, 0.0)) == (0.0, 0.0)
        assert tuple(eval_curve(curve, 1.0)) == (3.0, 0.0)

    def test_clamped_midpoint(self):
        """Test the clamped Bezier-like cubic at t=0.5."""
        curve = BSplineCurve2D.clamped([(0, 0), (0, 1), (1, 1), (1, 0)], degree=3)
        np.testing.assert_allclose(eval_curve(curve, 0.5), (0.5, 0.75), atol=1e-12)

    def test_eval_outside_domain(self):
        """Test domain error outside [knots[k], knots[n]]."""
        curve = BSplineCurve2D.uniform([(0, 0), (1, 0), (2, 1), (3, 0)], degree=3)
        with pytest.raises(DomainError):
            eval_curve(curve, 1.0)

    def test_convex_hull(self):
        """Test curve points lie inside the control polygon's convex hull."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            points = rng.uniform(-3.0, 3.0, (7, 2))
            curve = BSplineCurve2D.clamped(points, degree=3)
            hull = Delaunay(points)
            samples = sample_curve(curve, 200)
            inside = hull.find_simplex(samples, tol=1e-9) >= 0
            assert inside.all()

    def test_control_points_read_only(self):
        """Test control points cannot be mutated after construction."""
        curve = BSplineCurve2D.clamped([(0, 0), (0, 1), (1, 1), (1, 0)])
        with pytest.raises(ValueError):
            curve.control_points[0, 0] = 5.0


class TestSampleCurve:
    """Tests for uniform parameter sampling."""

    def test_two_samples_are_endpoints(self):
        """Test m=2 returns the two domain-endpoint evaluations."""
        curve = BSplineCurve2D.clamped([(0, 0), (0, 1), (1, 1), (1, 0)])
        points = sample_curve(curve, 2)
        assert np.array_equal(points[0], eval_curve(curve, 0.0))
        assert np.array_equal(points[1], eval_curve(curve, 1.0))

    def test_straight_line_collinear(self):
        """Test a straight control polygon gives collinear samples."""
        curve = BSplineCurve2D.clamped([(0, 0), (1, 1), (2, 2), (4, 4)])
        points = sample_curve(curve, 5)
        assert len(points) == 5
        np.testing.assert_allclose(points[:, 0], points[:, 1], atol=1e-12)

    def test_endpoints_bitwise(self):
        """Test first/last samples equal eval_curve at the domain ends bitwise."""
        curve = BSplineCurve2D.uniform([(0, 0), (1, 2), (2, -1), (3, 1), (5, 0)], degree=3)
        lo, hi = curve.domain
        points = sample_curve(curve, 101)
        assert np.array_equal(points[0], eval_curve(curve, lo))
        assert np.array_equal(points[-1], eval_curve(curve, hi))

    def test_m_below_two(self):
        """Test validation error for m < 2."""
        curve = BSplineCurve2D.clamped([(0, 0), (0, 1), (1, 1), (1, 0)])
        with pytest.raises(ReefValidationError):
            sample_curve(curve, 1)
