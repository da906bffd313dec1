"""
Unit tests for the finite-difference derivative engine.
"""

import numpy as np
import pytest

from src.models.functions import SlottedScalarFn, SlottedVectorFn
from src.services.numdiff import (
    check_derivatives, fd_jacobian, fd_mixed_second, fd_mixed_second_vector, fd_partial,
    fd_slot_jacobian, snapped_step,
)
from src.utils.exceptions import ContractError, NumericDomainError

X = np.array([0.3, -0.7])
Y = np.array([1.1, 0.4])
Z = np.array([-0.2, 0.9])


class TestFdPartial:
    """Tests for fd_partial."""

    def test_constant(self):
        """Test that a constant function has zero gradient."""
        f = SlottedScalarFn(2, 2, lambda x, y: 3.0)
        np.testing.assert_array_equal(fd_partial(f, 1, (X, Y)), np.zeros(2))

    def test_affine_exact(self):
        """Test that central differences are exact on linear functions."""
        # dyadic data: every evaluation below is exact in floating point
        c = np.array([2.0, -4.0])
        y = np.array([1.25, 0.5])
        f = SlottedScalarFn(2, 2, lambda x, y: float(c @ y))
        np.testing.assert_allclose(fd_partial(f, 2, (X, y)), c, rtol=0, atol=1e-12)

    def test_quadratic(self):
        """Test the gradient of 1/2 |y - x|^2 in the first slot."""
        f = SlottedScalarFn(2, 2, lambda x, y: 0.5 * float((y - x) @ (y - x)))
        np.testing.assert_allclose(fd_partial(f, 1, (X, Y)), X - Y, rtol=1e-6)

    def test_bad_slot(self):
        """Test that slots are 1-based and bounded by the arity."""
        f = SlottedScalarFn(2, 2, lambda x, y: 0.0)
        with pytest.raises(ContractError):
            fd_partial(f, 3, (X, Y))
        with pytest.raises(ContractError):
            fd_partial(f, 0, (X, Y))

    def test_wrong_point_shape(self):
        """Test that a point of the wrong dimension is rejected."""
        f = SlottedScalarFn(2, 2, lambda x, y: 0.0)
        with pytest.raises(ContractError):
            fd_partial(f, 1, (X, np.zeros(3)))

    def test_non_finite(self):
        """Test that a non-finite evaluation reports the coordinates."""
        f = SlottedScalarFn(2, 2, lambda x, y: float(np.log(x[0] - 0.3)) if x[0] < 0.3 else 0.0)
        with pytest.raises(NumericDomainError) as info:
            fd_partial(f, 1, (X, Y))
        assert info.value.coords is not None
        assert len(info.value.coords) == 4


class TestMixedSecond:
    """Tests for fd_mixed_second and its vector form."""

    def test_bilinear(self):
        """Test that x^T A y gives A for slots (1, 2)."""
        A = np.array([[1.0, 2.0], [-0.5, 3.0]])
        f = SlottedScalarFn(2, 2, lambda x, y: float(x @ A @ y))
        np.testing.assert_allclose(fd_mixed_second(f, 1, 2, (X, Y)), A, rtol=1e-4)

    def test_no_coupling(self):
        """Test that 1/2 |x|^2 has no mixed (1, 2) block."""
        f = SlottedScalarFn(2, 2, lambda x, y: 0.5 * float(x @ x))
        np.testing.assert_allclose(fd_mixed_second(f, 1, 2, (X, Y)), np.zeros((2, 2)), atol=1e-8)

    def test_arity_three_identity(self):
        """Test that <x, z> gives the identity for slots (1, 3)."""
        f = SlottedScalarFn(3, 2, lambda x, y, z: float(x @ z))
        np.testing.assert_allclose(fd_mixed_second(f, 1, 3, (X, Y, Z)), np.eye(2), atol=1e-4)

    def test_symmetry(self):
        """Test that swapping the slots transposes the block."""
        f = SlottedScalarFn(3, 2, lambda x, y, z: float(np.sin(x[0] * z[1]) + x[1] * y[0] * z[0] ** 2))
        a = fd_mixed_second(f, 1, 3, (X, Y, Z))
        b = fd_mixed_second(f, 3, 1, (X, Y, Z))
        np.testing.assert_allclose(a, b.T, rtol=1e-4, atol=1e-4)

    def test_vector_components(self):
        """Test the stacked mixed partials of a vector function."""
        F = SlottedVectorFn(2, 2, 2, lambda x, y: np.array([x @ y, 2.0 * x[0] * y[1]]))
        out = fd_mixed_second_vector(F, 1, 2, (X, Y))
        assert out.shape == (2, 2, 2)
        np.testing.assert_allclose(out[0], np.eye(2), atol=1e-4)
        np.testing.assert_allclose(out[1], [[0.0, 2.0], [0.0, 0.0]], atol=1e-4)

    def test_vector_without_outputs(self):
        """Test that m = 0 gives an empty stack."""
        F = SlottedVectorFn(2, 2, 0, lambda x, y: np.zeros(0))
        assert fd_mixed_second_vector(F, 1, 2, (X, Y)).shape == (0, 2, 2)


class TestSlotJacobian:
    """Tests for fd_slot_jacobian and fd_jacobian."""

    def test_linear_map(self):
        """Test the Jacobian of a linear vector function."""
        B = np.array([[1.0, -2.0]])
        F = SlottedVectorFn(2, 2, 1, lambda x, y: B @ (y - x))
        np.testing.assert_allclose(fd_slot_jacobian(F, 1, (X, Y)), -B, atol=1e-7)

    def test_flat_jacobian(self):
        """Test fd_jacobian on a smooth map."""
        def fun(z):
            return np.array([z[0] ** 2, z[0] * z[1]])
        z = np.array([1.5, -2.0])
        np.testing.assert_allclose(fd_jacobian(fun, z), [[3.0, 0.0], [-2.0, 1.5]], rtol=1e-7)

    def test_snapped_step_representable(self):
        """Test that x + step - x reproduces the step exactly."""
        x = 0.1
        step = snapped_step(x, 1e-8)
        assert (x + step) - x == step


class TestCheckDerivatives:
    """Tests for check_derivatives."""

    def setup_method(self):
        self.f = SlottedScalarFn(2, 2, lambda x, y: float(0.1 * np.cos(x[0]) * y[1] + 0.1 * x[1] ** 2 - x[0]))
        self.grad = lambda x, y: np.array([-0.1 * np.sin(x[0]) * y[1] - 1.0, 0.2 * x[1]])
        rng = np.random.default_rng(1)
        self.samples = [(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)) for _ in range(20)]

    def test_exact_gradient(self):
        """Test that an exact analytic gradient passes."""
        assert check_derivatives(self.grad, self.f, 1, self.samples) <= 1e-6

    def test_corrupted_gradient(self):
        """Test that a gradient off by one in one entry is detected."""
        bad = lambda x, y: self.grad(x, y) + np.array([1.0, 0.0])  # noqa: E731
        assert check_derivatives(bad, self.f, 1, self.samples) >= 0.5

    def test_empty_samples(self):
        """Test that an empty sample list is a contract error."""
        with pytest.raises(ContractError):
            check_derivatives(self.grad, self.f, 1, [])
