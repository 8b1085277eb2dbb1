import numpy as np
import pytest

from varflow.fields import BoundaryField, Grid, ScalarField, VectorField
from varflow import operators as ops


def grid1d(n, lo=0.0, hi=1.0):
    return Grid(((lo, hi),), (n,))


def grid3d(n, lo=0.0, hi=1.0):
    return Grid(((lo, hi),) * 3, (n,) * 3)


class TestGradient:
    def test_constant_field_has_zero_gradient(self):
        s = ScalarField.from_function(grid3d(9), lambda x, y, z: 3.7 + 0 * x)
        assert ops.gradient(s).max_abs() < 1e-13

    def test_linear_field_exact(self):
        s = ScalarField.from_function(grid3d(17), lambda x, y, z: x)
        g = ops.gradient(s)
        assert np.allclose(g.values[..., 0], 1.0, atol=1e-13)
        assert np.max(np.abs(g.values[..., 1:])) < 1e-13

    def test_sine_second_order(self):
        # oracle: d/dx sin(pi x) = pi cos(pi x)
        errs = []
        for n in (33, 65):
            g = grid1d(n)
            s = ScalarField.from_function(g, lambda x: np.sin(np.pi * x))
            exact = np.pi * np.cos(np.pi * g.axis(0))
            errs.append(np.max(np.abs(ops.gradient(s).values[..., 0] - exact)))
        ratio = errs[0] / errs[1]
        assert 3.5 <= ratio <= 4.5

    def test_rejects_non_finite(self):
        vals = np.ones((5, 5, 5))
        vals[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            ScalarField(grid3d(5), vals)


class TestDivergence:
    def test_identity_field(self):
        v = VectorField.from_function(grid3d(9), lambda x, y, z: (x, y, z))
        assert np.allclose(ops.divergence(v).values, 3.0, atol=1e-13)

    def test_rotation_is_divergence_free(self):
        v = VectorField.from_function(grid3d(9), lambda x, y, z: (-y, x, 0 * z))
        assert ops.divergence(v).max_abs() < 1e-13

    def test_sine_second_order(self):
        errs = []
        for n in (17, 33):
            g = grid3d(n)
            v = VectorField.from_function(g, lambda x, y, z: (np.sin(x), 0 * y, 0 * z))
            exact = np.cos(g.meshgrid()[0])
            errs.append(np.max(np.abs(ops.divergence(v).values - exact)))
        assert 3.5 <= errs[0] / errs[1] <= 4.5


class TestCurl:
    def test_curl_of_gradient_vanishes(self):
        # mixed second-order partials commute discretely, so this sits at
        # the rounding floor
        s = ScalarField.from_function(grid3d(33), lambda x, y, z: np.sin(x) * np.cos(y) * z)
        assert ops.curl(ops.gradient(s)).max_abs() < 1e-10

    def test_linear_rotation_exact(self):
        v = VectorField.from_function(grid3d(9), lambda x, y, z: (-y, x, 0 * z))
        w = ops.curl(v)
        assert np.allclose(w.values[..., 2], 2.0, atol=1e-13)
        assert np.max(np.abs(w.values[..., :2])) < 1e-13

    def test_2d_curl_returns_scalar(self):
        g = Grid(((0, 1), (0, 1)), (9, 9))
        v = VectorField.from_function(g, lambda x, y: (-y, x))
        w = ops.curl(v)
        assert isinstance(w, ScalarField)
        assert np.allclose(w.values, 2.0, atol=1e-13)

    def test_1d_rejected(self):
        g = grid1d(5)
        with pytest.raises(ValueError):
            ops.curl(VectorField(g, np.ones((5, 1))))


class TestLaplacian:
    def test_quadratic_exact(self):
        s = ScalarField.from_function(grid3d(9), lambda x, y, z: x**2)
        assert np.allclose(ops.laplacian(s).values, 2.0, atol=1e-12)

    def test_constant_zero(self):
        s = ScalarField.from_function(grid3d(9), lambda x, y, z: 5.0 + 0 * x)
        assert ops.laplacian(s).max_abs() < 1e-12

    def test_sine_second_order(self):
        # oracle: lap sin(pi x) = -pi^2 sin(pi x)
        errs = []
        for n in (65, 129):
            g = grid1d(n)
            s = ScalarField.from_function(g, lambda x: np.sin(np.pi * x))
            exact = -np.pi**2 * np.sin(np.pi * g.axis(0))
            errs.append(np.max(np.abs(ops.laplacian(s).values - exact)))
        assert 3.5 <= errs[0] / errs[1] <= 4.5


class TestInnerProduct:
    def test_zero_field(self):
        g = grid3d(7)
        a = ScalarField.zeros(g)
        b = ScalarField.from_function(g, lambda x, y, z: x * y)
        assert ops.inner_product(a, b) == 0.0

    def test_unit_volume(self):
        g = grid3d(7)
        one = ScalarField.from_function(g, lambda x, y, z: 1.0 + 0 * x)
        assert abs(ops.inner_product(one, one) - 1.0) < 1e-12

    def test_x_squared_integral(self):
        # trapezoid error for x^2 on [0,1] is exactly h^2/6
        g = grid1d(17)
        h = g.spacing[0]
        s = ScalarField.from_function(g, lambda x: x)
        val = ops.inner_product(s, s)
        assert abs(val - (1.0 / 3.0 + h**2 / 6.0)) < 1e-14

    def test_positive_definite(self):
        rng = np.random.default_rng(7)
        g = grid3d(6 + 1)
        s = ScalarField(g, rng.standard_normal(g.shape))
        assert ops.inner_product(s, s) > 0.0


class TestBoundaryNormal:
    def test_unit_x_field(self):
        v = VectorField.from_function(grid3d(7), lambda x, y, z: (1.0 + 0 * x, 0 * y, 0 * z))
        bf = ops.boundary_normal_component(v)
        assert np.allclose(bf.faces[(0, 1)], 1.0)
        assert np.allclose(bf.faces[(0, 0)], -1.0)
        for key in ((1, 0), (1, 1), (2, 0), (2, 1)):
            assert np.max(np.abs(bf.faces[key])) == 0.0

    def test_rotation_profile(self):
        # oracle: analytic dot products of (-y, x, 0) with the face normals
        g = grid3d(9)
        v = VectorField.from_function(g, lambda x, y, z: (-y, x, 0 * z))
        bf = ops.boundary_normal_component(v)
        yy, _ = np.meshgrid(g.axis(1), g.axis(2), indexing="ij")
        assert np.allclose(bf.faces[(0, 1)], -yy)
        xx, _ = np.meshgrid(g.axis(0), g.axis(2), indexing="ij")
        assert np.allclose(bf.faces[(1, 0)], -xx)
        assert np.max(np.abs(bf.faces[(2, 0)])) == 0.0

    def test_zero_field(self):
        bf = ops.boundary_normal_component(VectorField.zeros(grid3d(5)))
        assert bf.max_abs() == 0.0

    def test_gauss_theorem_consistency(self):
        # for a linear field the discrete volume/flux integrals match exactly
        g = grid3d(9)
        v = VectorField.from_function(g, lambda x, y, z: (2 * x, -y, 3 * z))
        vol = ops.inner_product(ops.divergence(v), ScalarField.from_function(g, lambda x, y, z: 1 + 0 * x))
        assert abs(vol - ops.boundary_normal_component(v).integral()) < 1e-12


class TestLinearity:
    @pytest.mark.parametrize("op", [ops.laplacian, ops.gradient])
    def test_scalar_ops_linear(self, op):
        rng = np.random.default_rng(11)
        g = grid3d(7)
        u = ScalarField(g, rng.standard_normal(g.shape))
        w = ScalarField(g, rng.standard_normal(g.shape))
        a, b = 2.5, -1.25
        lhs = op(ScalarField(g, a * u.values + b * w.values))
        rhs_vals = a * op(u).values + b * op(w).values
        assert np.max(np.abs(lhs.values - rhs_vals)) < 1e-10

    @pytest.mark.parametrize("op", [ops.divergence, ops.curl])
    def test_vector_ops_linear(self, op):
        rng = np.random.default_rng(13)
        g = grid3d(7)
        u = VectorField(g, rng.standard_normal(g.shape + (3,)))
        w = VectorField(g, rng.standard_normal(g.shape + (3,)))
        a, b = 0.5, 3.0
        lhs = op(VectorField(g, a * u.values + b * w.values))
        rhs_vals = a * op(u).values + b * op(w).values
        assert np.max(np.abs(lhs.values - rhs_vals)) < 1e-10

    def test_div_of_curl_vanishes(self):
        g = grid3d(33)
        v = VectorField.from_function(
            g, lambda x, y, z: (np.sin(y * z), np.cos(x + z), np.sin(x) * np.cos(y))
        )
        assert ops.divergence(ops.curl(v)).max_abs() < 1e-10


class TestDalembertian:
    def test_travelling_wave_in_kernel(self):
        # box sin(x0 - x1) = 0; discretely O(h^2)
        g = Grid(((0, 2 * np.pi), (0, 2 * np.pi)), (65, 65))
        h = g.spacing[0]
        s = ScalarField.from_function(g, lambda t, x: np.sin(t - x))
        assert ops.dalembertian(s).max_abs() < 2.5 * h**2

    def test_spacelike_sign(self):
        g = Grid(((0, 1), (0, 1)), (17, 17))
        s = ScalarField.from_function(g, lambda t, x: x**2)
        assert np.allclose(ops.dalembertian(s).values, -2.0, atol=1e-10)
