"""
Recorded gradients against central differences
"""
import numpy as np
import pytest

from contrastforge.constants import DISCRIMINATOR, GENERATOR
from contrastforge.exceptions import UsageError
from contrastforge.losses import LossWeights
from contrastforge.networks import (
    ParamSet, build_params, build_patch_discriminator, build_unet_generator, generator_forward)
from contrastforge.tensor import (
    Tensor, add, bce_with_logits, concat, conv2d, conv_transpose2d, grad_check, instance_norm, leaky_relu, mean,
    mul, pad_zero, reduce_sum, relu, square, sub, tanh)
from contrastforge.tensor import abs as tensor_abs
from contrastforge.tensor.gradcheck import analytic_gradient, numeric_gradient
from contrastforge.trainers import pgan_generator_losses

TOLERANCE = 1e-4


def away_from_zero(rng, shape, low=0.2, high=1.5):
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(low, high, size=shape)


def weighted(values, rng):
    """
    sum(w * values) with positive weights, so no gradient entry sits near zero by accident
    """
    weights = Tensor(rng.uniform(0.5, 1.5, size=values.shape))
    return reduce_sum(mul(values, weights))


class TestGradCheck:
    """
    Every primitive at a random point away from its kinks
    """

    def setup_method(self):
        self.rng = np.random.default_rng(2024)

    def test_sum_of_squares(self):
        point = self.rng.standard_normal(10)
        assert grad_check(lambda x: reduce_sum(square(x)), point) < 1e-8

    def test_add_sub_mul_broadcast(self):
        other = Tensor(self.rng.uniform(0.5, 1.5, size=(3, 4)))

        def f(x):
            return reduce_sum(mul(add(x, other), sub(other, mul(x, 0.5))))
        assert grad_check(f, self.rng.standard_normal((1, 4))) < TOLERANCE

    def test_mean(self):
        assert grad_check(lambda x: mean(square(x)), self.rng.standard_normal((2, 3))) < TOLERANCE

    def test_abs(self):
        point = away_from_zero(self.rng, (3, 3))
        assert grad_check(lambda x: weighted(tensor_abs(x), np.random.default_rng(0)), point) < TOLERANCE

    def test_relu(self):
        rng = np.random.default_rng(1)
        point = np.abs(away_from_zero(rng, (4, 3)))
        assert grad_check(lambda x: weighted(relu(x), np.random.default_rng(2)), point) < TOLERANCE

    def test_leaky_relu(self):
        point = away_from_zero(self.rng, (4, 3))
        assert grad_check(lambda x: weighted(leaky_relu(x, 0.2), np.random.default_rng(3)), point) < TOLERANCE

    def test_tanh(self):
        point = self.rng.uniform(-1.5, 1.5, size=(3, 4))
        assert grad_check(lambda x: weighted(tanh(x), np.random.default_rng(4)), point) < TOLERANCE

    def test_bce_with_logits(self):
        labels = (self.rng.uniform(size=(2, 5)) > 0.5).astype(float)
        point = self.rng.uniform(-2.0, 2.0, size=(2, 5))
        assert grad_check(lambda x: weighted(bce_with_logits(x, labels), np.random.default_rng(5)),
                          point) < TOLERANCE

    def test_concat_and_pad(self):
        fixed = Tensor(self.rng.standard_normal((1, 2, 3, 3)))

        def f(x):
            joined = concat([x, fixed], 1)
            return reduce_sum(square(pad_zero(joined, [(0, 0), (0, 0), (1, 0), (0, 1)])))
        assert grad_check(f, self.rng.standard_normal((1, 1, 3, 3))) < TOLERANCE

    @pytest.mark.parametrize('stride, padding', [(1, 0), (2, 1), (1, 1)])
    def test_conv2d(self, stride, padding):
        """
        L1 loss of the convolution output against a target kept away from the output
        """
        rng = np.random.default_rng(10 + stride + padding)
        x = rng.standard_normal((2, 2, 6, 6))
        kernel = rng.standard_normal((3, 2, 3, 3))
        output = conv2d(x, kernel, stride=stride, padding=padding).data
        target = Tensor(output + 0.3 * rng.choice([-1.0, 1.0], size=output.shape))

        def wrt_kernel(k):
            return mean(tensor_abs(sub(conv2d(Tensor(x), k, stride=stride, padding=padding), target)))

        def wrt_input(v):
            return mean(tensor_abs(sub(conv2d(v, Tensor(kernel), stride=stride, padding=padding), target)))

        assert grad_check(wrt_kernel, kernel) < TOLERANCE
        assert grad_check(wrt_input, x) < TOLERANCE

    @pytest.mark.parametrize('stride, padding', [(1, 0), (2, 1)])
    def test_conv_transpose2d(self, stride, padding):
        rng = np.random.default_rng(20 + stride + padding)
        x = rng.standard_normal((2, 2, 4, 4))
        kernel = rng.standard_normal((2, 3, 4, 4))
        bias = rng.standard_normal(3)
        weights = Tensor(rng.uniform(0.5, 1.5, size=conv_transpose2d(x, kernel, stride, padding).shape))

        def wrt_kernel(k):
            return reduce_sum(mul(conv_transpose2d(Tensor(x), k, stride, padding, Tensor(bias)), weights))

        def wrt_input(v):
            return reduce_sum(mul(conv_transpose2d(v, Tensor(kernel), stride, padding, Tensor(bias)), weights))

        def wrt_bias(b):
            return reduce_sum(square(conv_transpose2d(Tensor(x), Tensor(kernel), stride, padding, b)))

        assert grad_check(wrt_kernel, kernel) < TOLERANCE
        assert grad_check(wrt_input, x) < TOLERANCE
        assert grad_check(wrt_bias, bias) < TOLERANCE

    def test_conv2d_bias(self):
        rng = np.random.default_rng(30)
        x = Tensor(rng.standard_normal((1, 2, 5, 5)))
        kernel = Tensor(rng.standard_normal((3, 2, 2, 2)))
        assert grad_check(lambda b: reduce_sum(square(conv2d(x, kernel, bias=b, padding=1))),
                          rng.standard_normal(3)) < TOLERANCE

    def test_instance_norm(self):
        rng = np.random.default_rng(40)
        weights = Tensor(rng.standard_normal((2, 2, 3, 3)))
        point = 2.0 * rng.standard_normal((2, 2, 3, 3))
        assert grad_check(lambda x: reduce_sum(mul(instance_norm(x), weights)), point) < TOLERANCE

    def test_function_of_constant(self):
        assert np.array_equal(analytic_gradient(lambda x: Tensor(1.0), np.ones(3)), np.zeros(3))

    def test_non_scalar_function(self):
        with pytest.raises(UsageError):
            grad_check(lambda x: square(x), np.ones(3))

    def test_numeric_gradient_of_linear_function(self):
        grad = numeric_gradient(lambda x: reduce_sum(mul(x, Tensor([1.0, 2.0, 3.0]))), np.zeros(3), 1e-3)
        assert np.allclose(grad, [1.0, 2.0, 3.0], atol=1e-12)


class TestNetworkGradient:
    """
    The full pGAN generator loss, differentiated with respect to single generator kernels
    """

    def setup_method(self):
        self.nets = {
            GENERATOR: build_unet_generator(16, 1, 1, base_channels=4, depth=2),
            DISCRIMINATOR: build_patch_discriminator(1, 1, base_channels=4, n_layers=1),
        }
        self.params = {GENERATOR: build_params(self.nets[GENERATOR], 0),
                       DISCRIMINATOR: build_params(self.nets[DISCRIMINATOR], 1)}
        rng = np.random.default_rng(50)
        self.x = Tensor(rng.uniform(-1.0, 1.0, size=(1, 1, 16, 16)))
        self.frozen = {name: p.frozen() for name, p in self.params.items()}
        fake = generator_forward(self.nets[GENERATOR], self.frozen[GENERATOR], self.x).data
        # keep every |y - G(x)| away from the L1 kink
        self.y = Tensor(fake + 0.3 * rng.choice([-1.0, 1.0], size=fake.shape))

    def loss_wrt(self, name):
        def f(kernel):
            generator = ParamSet(self.frozen[GENERATOR])
            generator[name] = kernel
            current = {GENERATOR: generator, DISCRIMINATOR: self.frozen[DISCRIMINATOR]}
            return pgan_generator_losses(self.nets, current, self.x, self.y, LossWeights())[0]
        return f

    def test_decoder_kernel(self):
        assert grad_check(self.loss_wrt('d0.weight'), self.params[GENERATOR]['d0.weight']) < TOLERANCE

    def test_inner_encoder_kernel(self):
        """
        Steps of 1e-3 push some activations of this layer across a ReLU kink
        """
        assert grad_check(self.loss_wrt('e1.weight'), self.params[GENERATOR]['e1.weight'], step=1e-4) < TOLERANCE

    def test_first_encoder_kernel(self):
        """
        Every activation downstream depends on this kernel, so only very small steps avoid the kinks
        """
        assert grad_check(self.loss_wrt('e0.weight'), self.params[GENERATOR]['e0.weight'], step=1e-6) < TOLERANCE
