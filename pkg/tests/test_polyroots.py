"""Root-finder contracts: exact cases, round trips, residual bounds."""

import numpy as np
import pytest

from bsnoma.polyroots import (
    RESIDUAL_RTOL,
    real_roots_quadratic,
    real_roots_quartic,
    real_roots_quartic_batch,
    residual,
)


def poly_from_roots(roots, leading=1.0):
    """Ascending coefficients of leading * prod (x - r)."""
    c = np.array([1.0])
    for r in roots:
        c = np.convolve(c, np.array([-r, 1.0]))
    return leading * c


class TestQuadratic:
    def test_factored(self):
        assert real_roots_quadratic(1.0, -3.0, 2.0) == pytest.approx([1.0, 2.0])

    def test_complex_pair(self):
        assert real_roots_quadratic(1.0, 0.0, 1.0) == []

    def test_linear_degenerate(self):
        assert real_roots_quadratic(0.0, 2.0, -4.0) == pytest.approx([2.0])

    def test_constant_no_roots(self):
        assert real_roots_quadratic(0.0, 0.0, 3.0) == []

    def test_identically_zero_rejected(self):
        with pytest.raises(ValueError):
            real_roots_quadratic(0.0, 0.0, 0.0)

    def test_double_root_merged(self):
        roots = real_roots_quadratic(1.0, -2.0, 1.0)
        assert roots == pytest.approx([1.0])

    def test_cancellation_stability(self):
        # naive formula loses the small root when b dominates
        small, big = 1e-12, 1e12
        roots = real_roots_quadratic(1.0, -(small + big), small * big)
        assert roots[0] == pytest.approx(small, rel=1e-9)
        assert roots[1] == pytest.approx(big, rel=1e-9)

    def test_zero_b(self):
        assert real_roots_quadratic(1.0, 0.0, -4.0) == pytest.approx([-2.0, 2.0])


class TestQuartic:
    def test_planted_1234(self):
        coeffs = poly_from_roots([1.0, 2.0, 3.0, 4.0])
        assert real_roots_quartic(coeffs) == pytest.approx([1.0, 2.0, 3.0, 4.0])

    def test_no_real_roots(self):
        assert real_roots_quartic([1.0, 0.0, 0.0, 0.0, 1.0]) == []

    def test_degree_reduction_to_linear(self):
        # only the constant and linear terms nonzero: root -c0/c1
        assert real_roots_quartic([6.0, -2.0, 0.0, 0.0, 0.0]) == pytest.approx([3.0])

    def test_degree_reduction_to_quadratic(self):
        assert real_roots_quartic([2.0, -3.0, 1.0, 0.0, 0.0]) == pytest.approx([1.0, 2.0])

    def test_cubic(self):
        coeffs = poly_from_roots([-1.0, 0.5, 2.0])
        assert real_roots_quartic(coeffs) == pytest.approx([-1.0, 0.5, 2.0])

    def test_identically_zero_rejected(self):
        with pytest.raises(ValueError):
            real_roots_quartic([0.0, 0.0, 0.0, 0.0, 0.0])

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            real_roots_quartic([1.0, np.nan, 0.0, 0.0, 1.0])

    def test_mixed_real_complex(self):
        # (x-1)(x+2)(x^2+1): real roots 1, -2 only
        c = np.convolve(poly_from_roots([1.0, -2.0]), [1.0, 0.0, 1.0])
        roots = real_roots_quartic(c)
        assert roots == pytest.approx([-2.0, 1.0])

    def test_near_multiple_roots_merged(self):
        c = poly_from_roots([2.0, 2.0 + 1e-9, 5.0, 7.0])
        roots = real_roots_quartic(c)
        # merging threshold folds the 1e-9 pair into one reported root
        assert len(roots) == 3

    def test_round_trip_planted_roots(self):
        # 1000 separated random root sets in [-1e3, 1e3]: every planted root
        # recovered within absolute 1e-6, every returned root within the
        # residual bound
        rng = np.random.default_rng(99)
        cases = 0
        while cases < 1000:
            roots = np.sort(rng.uniform(-1e3, 1e3, size=4))
            if np.min(np.diff(roots)) < 1.0:
                continue
            cases += 1
            leading = rng.uniform(0.2, 5.0) * rng.choice([-1.0, 1.0])
            coeffs = poly_from_roots(roots, leading)
            found = real_roots_quartic(coeffs)
            assert len(found) == 4
            for r in roots:
                assert min(abs(f - r) for f in found) <= 1e-6
            bound = RESIDUAL_RTOL * max(1.0, np.max(np.abs(coeffs)))
            for f in found:
                assert residual(coeffs, f) <= bound

    def test_residual_bound_random_coefficients(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            coeffs = rng.normal(scale=10.0 ** rng.integers(-3, 4), size=5)
            bound = RESIDUAL_RTOL * max(1.0, np.max(np.abs(coeffs)))
            for r in real_roots_quartic(coeffs):
                assert residual(coeffs, r) <= bound


class TestBatch:
    def test_matches_scalar(self):
        rng = np.random.default_rng(3)
        rows = rng.normal(size=(50, 5))
        rows[7] = 0.0  # all-zero row yields no roots instead of raising
        got = real_roots_quartic_batch(rows)
        for i, row in enumerate(rows):
            if not np.any(row):
                assert got[i] == []
            else:
                assert got[i] == real_roots_quartic(row)
