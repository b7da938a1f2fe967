import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eulerchannel.geometry import (
    BoundaryProfile,
    ScalarField,
    build_grid,
    eval_profile,
    physical_coords,
)


class TestProfile:
    def test_single_cosine_at_zero(self):
        p = BoundaryProfile.cosine(0.1)
        assert eval_profile(p, 0.0) == pytest.approx(0.1, abs=0)

    def test_flat_everywhere(self):
        p = BoundaryProfile.flat()
        xs = np.linspace(0, 2 * np.pi, 17)
        assert np.all(p.derivative(xs, 0) == 0.0)

    def test_cosine_quarter_period(self):
        p = BoundaryProfile.cosine(0.1)
        assert abs(eval_profile(p, np.pi / 2)) < 1e-15

    def test_derivatives_match_symbolic(self):
        import sympy as sm

        p = BoundaryProfile.from_pairs(cos_pairs=[(1, 0.1), (3, -0.02)], sin_pairs=[(2, 0.05)])
        x = sm.symbols("x")
        h = sm.Rational(1, 10) * sm.cos(x) - sm.Rational(2, 100) * sm.cos(3 * x) \
            + sm.Rational(5, 100) * sm.sin(2 * x)
        xs = np.linspace(0, 2 * np.pi, 23)
        for order in range(5):
            fn = sm.lambdify(x, sm.diff(h, x, order), "numpy")
            assert np.allclose(p.derivative(xs, order), fn(xs), atol=1e-12, rtol=0)

    def test_is_flat_decidable_exactly(self):
        assert BoundaryProfile.from_pairs(cos_pairs=[(0, 0.5)]).is_flat
        assert not BoundaryProfile.from_pairs(cos_pairs=[(1, 1e-300)]).is_flat

    @given(st.floats(-3.0, 3.0), st.integers(1, 6))
    @settings(max_examples=25, deadline=None)
    def test_periodicity(self, x, shift):
        p = BoundaryProfile.from_pairs(cos_pairs=[(1, 0.2), (2, -0.1)], sin_pairs=[(3, 0.05)])
        assert p(x) == pytest.approx(p(x + 2 * np.pi * shift), abs=1e-12)

    def test_scaled(self):
        p = BoundaryProfile.cosine(0.2)
        assert eval_profile(p.scaled(0.5), 0.0) == pytest.approx(0.1)


class TestBuildGrid:
    def test_flat_unit_jacobian(self):
        g = build_grid(BoundaryProfile.flat(), 16, 17)
        assert np.all(g.j == 1.0)

    def test_top_node_height(self):
        g = build_grid(BoundaryProfile.cosine(0.1), 32, 17)
        x, y = physical_coords(g, 0, g.ny - 1)
        assert (x, y) == (0.0, pytest.approx(1.1))

    def test_jacobian_range_matches_dense_sampling(self):
        p = BoundaryProfile.cosine(0.1)
        g = build_grid(p, 64, 17)
        xs = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        dense = 1.0 + p.derivative(xs, 0)
        # node extremes sit on the sampled extremes for a mode-1 wall
        assert g.j.max() == pytest.approx(dense.max(), abs=1e-12)
        assert g.j.min() == pytest.approx(dense.min(), abs=1e-12)
        assert g.j.max() == pytest.approx(1.1)
        assert g.j.min() == pytest.approx(0.9)

    def test_rejects_even_ny(self):
        with pytest.raises(ValueError, match="odd"):
            build_grid(BoundaryProfile.flat(), 32, 18)

    def test_rejects_tall_profile(self):
        with pytest.raises(ValueError, match="h"):
            build_grid(BoundaryProfile.cosine(1.0), 32, 17)

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            build_grid(BoundaryProfile.flat(), 8, 17)
        with pytest.raises(ValueError):
            build_grid(BoundaryProfile.flat(), 32, 9)


class TestPhysicalCoords:
    def test_centerline_fixed(self):
        g = build_grid(BoundaryProfile.cosine(0.3), 32, 17)
        mid = (g.ny - 1) // 2
        for i in (0, 5, 17):
            assert physical_coords(g, i, mid)[1] == 0.0

    def test_bottom_reflects_top(self):
        g = build_grid(BoundaryProfile.cosine(0.1), 32, 17)
        i_pi = g.nx // 2
        assert physical_coords(g, i_pi, g.ny - 1)[1] == pytest.approx(0.9)
        assert physical_coords(g, 0, 0)[1] == pytest.approx(-1.1)

    def test_out_of_range(self):
        g = build_grid(BoundaryProfile.flat(), 32, 17)
        with pytest.raises(IndexError):
            physical_coords(g, 32, 0)
        with pytest.raises(IndexError):
            physical_coords(g, 0, 17)

    def test_reflection_symmetry_exact(self):
        g = build_grid(BoundaryProfile.cosine(0.2), 32, 33)
        for i, j in [(0, 0), (3, 5), (17, 12)]:
            x1, y1 = physical_coords(g, i, j)
            x2, y2 = physical_coords(g, i, g.ny - 1 - j)
            assert x1 == x2
            assert y1 == -y2

    def test_flat_map_is_identity(self):
        g = build_grid(BoundaryProfile.flat(), 32, 17)
        for i, j in [(0, 0), (7, 8), (31, 16)]:
            x, y = physical_coords(g, i, j)
            assert x == g.x[i]
            assert y == g.eta[j]


class TestScalarField:
    def test_shape_check(self, flat_grid_small):
        with pytest.raises(ValueError, match="shape"):
            ScalarField(flat_grid_small, np.zeros((3, 3)))

    def test_finite_check(self, flat_grid_small):
        bad = np.zeros(flat_grid_small.shape)
        bad[0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            ScalarField(flat_grid_small, bad)

    def test_from_function(self, flat_grid_small):
        f = ScalarField.from_function(flat_grid_small, lambda x, y: x + y)
        assert f.values[3, 5] == pytest.approx(flat_grid_small.x[3] + flat_grid_small.eta[5])

    def test_quadrature_weights_total_area(self):
        # area of the channel: integral of 2*(1+h) dx = 4*pi for any mean-zero h
        g = build_grid(BoundaryProfile.cosine(0.3), 64, 33)
        assert g.quadrature_weights().sum() == pytest.approx(4 * np.pi, rel=1e-12)
