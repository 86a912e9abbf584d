"""
Generator and discriminator definition tests
"""
import numpy as np
import pytest

from contrastforge.exceptions import ConfigurationError, UsageError
from contrastforge.networks import (
    ParamSet, build_params, build_patch_discriminator, build_unet_generator, create_params, discriminator_forward,
    from_network_range, generator_forward, init_weights, to_network_range)
from contrastforge.tensor import Tensor


class TestGenerator:
    """
    U-Net generator
    """

    def setup_method(self):
        self.net = build_unet_generator(64, 1, 1, base_channels=16, depth=4)
        self.params = build_params(self.net, 0)

    def test_parameter_count(self):
        """
        (64, 1, 1, 16, 4) has 386145 parameters
        """
        assert self.net.parameter_count == 386145
        assert create_params(self.net).count() == 386145

    def test_output_shape_and_range(self):
        rng = np.random.default_rng(1)
        out = generator_forward(self.net, self.params, Tensor(rng.uniform(-1, 1, size=(1, 1, 64, 64)))).data
        assert out.shape == (1, 1, 64, 64)
        assert np.all(out > -1.0) and np.all(out < 1.0)

    def test_layer_layout(self):
        names = [layer.name for layer in self.net.layers]
        assert names == ['e0', 'e1', 'e2', 'e3', 'd3', 'd2', 'd1', 'd0']
        assert [layer.skip for layer in self.net.layers[4:]] == [None, 'e2', 'e1', 'e0']
        assert not self.net.layers[0].norm and all(layer.norm for layer in self.net.layers[1:7])
        assert not self.net.layers[-1].norm

    def test_stacked_input_channels(self):
        net = build_unet_generator(64, 3, 1, base_channels=16, depth=4)
        params = create_params(net)
        assert params['e0.weight'].shape == (16, 3, 4, 4)
        out = generator_forward(net, params, Tensor(np.zeros((2, 3, 64, 64))))
        assert out.shape == (2, 1, 64, 64)

    def test_zero_parameters_give_zero_output(self):
        rng = np.random.default_rng(2)
        out = generator_forward(self.net, create_params(self.net), Tensor(rng.standard_normal((1, 1, 64, 64))))
        assert not out.data.any()

    def test_batch_independence(self):
        """
        Each batch element depends only on its own input; permuting the batch permutes the output
        """
        net = build_unet_generator(16, 1, 1, base_channels=4, depth=2)
        params = build_params(net, 3)
        rng = np.random.default_rng(3)
        batch = rng.uniform(-1, 1, size=(3, 1, 16, 16))
        together = generator_forward(net, params, Tensor(batch)).data
        for i in range(3):
            alone = generator_forward(net, params, Tensor(batch[i:i + 1])).data
            assert np.allclose(alone[0], together[i], rtol=0, atol=1e-12)
        permuted = generator_forward(net, params, Tensor(batch[::-1])).data
        assert np.allclose(permuted, together[::-1], rtol=0, atol=1e-12)

    def test_wrong_input(self):
        with pytest.raises(UsageError):
            generator_forward(self.net, self.params, Tensor(np.zeros((1, 2, 64, 64))))
        with pytest.raises(UsageError):
            generator_forward(self.net, self.params, Tensor(np.zeros((1, 1, 40, 40))))

    @pytest.mark.parametrize('image_size, depth', [(60, 4), (64, 1)])
    def test_invalid_definition(self, image_size, depth):
        with pytest.raises(ConfigurationError):
            build_unet_generator(image_size, 1, 1, base_channels=16, depth=depth)

    def test_channel_cap(self):
        net = build_unet_generator(256, 1, 1, base_channels=64, depth=6)
        assert max(layer.out_channels for layer in net.layers) == 512


class TestDiscriminator:
    """
    Patch discriminator
    """

    def test_score_map(self):
        """
        A 64x64 input with three stride-2 layers gives a 6x6 score map
        """
        net = build_patch_discriminator(1, 1, base_channels=16, n_layers=3)
        params = build_params(net, 0)
        out = discriminator_forward(net, params, Tensor(np.zeros((1, 2, 64, 64))))
        assert out.shape == (1, 1, 6, 6)

    def test_conditional_input_channels(self):
        assert build_patch_discriminator(3, 1).in_channels == 4
        assert build_patch_discriminator(0, 3).in_channels == 3
        assert build_patch_discriminator(0, 1).in_channels == 1

    def test_layer_layout(self):
        net = build_patch_discriminator(1, 1, base_channels=16, n_layers=3)
        assert [layer.name for layer in net.layers] == ['c0', 'c1', 'c2', 'c3', 'score']
        assert [layer.stride for layer in net.layers] == [2, 2, 2, 1, 1]
        assert [layer.out_channels for layer in net.layers] == [16, 32, 64, 128, 1]
        assert net.layers[-1].activation is None

    def test_wrong_input(self):
        net = build_patch_discriminator(1, 1)
        with pytest.raises(UsageError):
            discriminator_forward(net, create_params(net), Tensor(np.zeros((1, 1, 64, 64))))

    def test_invalid_definition(self):
        with pytest.raises(ConfigurationError):
            build_patch_discriminator(1, 1, n_layers=0)
        with pytest.raises(ConfigurationError):
            build_patch_discriminator(-1, 1)


class TestInitialization:

    def test_statistics(self):
        net = build_unet_generator(64, 1, 1, base_channels=16, depth=4)
        params = build_params(net, 4)
        weights = np.concatenate([p.data.ravel() for name, p in params.items() if name.endswith('.weight')])
        biases = np.concatenate([p.data.ravel() for name, p in params.items() if name.endswith('.bias')])
        assert weights.size >= 10000
        assert abs(weights.mean()) <= 3 * 0.02 / np.sqrt(weights.size)
        assert abs(weights.std() - 0.02) <= 0.05 * 0.02
        assert not biases.any()

    def test_same_seed_same_values(self):
        net = build_patch_discriminator(1, 1)
        first, second = build_params(net, 9), build_params(net, 9)
        assert all(np.array_equal(first[name].data, second[name].data) for name in first)
        other = build_params(net, 10)
        assert not np.array_equal(first['c0.weight'].data, other['c0.weight'].data)

    def test_does_not_modify_input(self):
        net = build_patch_discriminator(1, 1)
        zeros = create_params(net)
        init_weights(zeros, 1)
        assert not any(p.data.any() for p in zeros.values())

    def test_params_are_leaves(self):
        params = build_params(build_patch_discriminator(1, 1), 0)
        assert all(p.requires_grad and p.is_leaf for p in params.values())


class TestParamSet:

    def test_frozen(self):
        params = build_params(build_patch_discriminator(1, 1), 0)
        frozen = params.frozen()
        assert isinstance(frozen, ParamSet)
        assert list(frozen) == list(params)
        assert not any(p.requires_grad for p in frozen.values())
        assert all(np.array_equal(frozen[n].data, params[n].data) for n in params)

    def test_zero_grad(self):
        params = build_params(build_patch_discriminator(1, 1), 0)
        params['c0.bias'].grad = np.ones(16)
        params.zero_grad()
        assert all(g is None for g in params.grads().values())


def test_intensity_range_mapping():
    values = np.array([0.0, 0.25, 1.0])
    assert to_network_range(values).tolist() == [-1.0, -0.5, 1.0]
    assert from_network_range(to_network_range(values)).tolist() == values.tolist()
