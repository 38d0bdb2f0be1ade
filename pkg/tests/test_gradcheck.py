import numpy as np
import pytest

from perimid.errors import NumericsError
from perimid.model.layers import Linear
from perimid.numerics import ops
from perimid.numerics.gradcheck import grad_check, gradient_errors
from perimid.numerics.tensor import Tensor


def test_quadratic():
    w = Tensor([3.0], requires_grad=True, name="w")
    assert grad_check(lambda: ops.total(ops.square(w)), [w]) < 1e-6


def test_linear_layer_with_mse(rng):
    layer = Linear(3, 2, rng)
    x = Tensor(rng.normal(size=(4, 3)))
    y = rng.normal(size=(4, 2))

    def loss():
        return ops.mean(ops.square(ops.sub(layer(x), Tensor(y))))

    errors = gradient_errors(loss, layer.named_parameters())
    assert set(errors) == {"weight", "bias"}
    assert max(errors.values()) < 1e-4


def test_parameters_restored_after_check(rng):
    w = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    before = w.numpy()
    grad_check(lambda: ops.total(ops.gelu(w)), [w])
    np.testing.assert_array_equal(w.data, before)


def test_wrong_gradient_is_detected():
    w = Tensor([1.0, -2.0], requires_grad=True)
    calls = {"n": 0}

    def f():
        calls["n"] += 1
        out = ops.total(ops.square(w))
        # later calls double the function the tape recorded
        return ops.scale(out, 1.0 if calls["n"] == 1 else 2.0)

    assert grad_check(f, [w]) > 0.1


def test_eps_range():
    w = Tensor([1.0], requires_grad=True)
    with pytest.raises(NumericsError):
        grad_check(lambda: ops.total(w), [w], eps=1e-1)


def test_non_scalar_function_rejected():
    w = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(NumericsError):
        grad_check(lambda: ops.scale(w, 2.0), [w])
