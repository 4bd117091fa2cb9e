import numpy as np
import pytest

from textlier import nn
from textlier.errors import ShapeError, StateError, TrainingError

from oracles import conv2d_reference, finite_difference, max_rel_error


def make_conv(rng, **kw):
    return nn.Conv2D(rng=rng, **kw)


class TestConvForward:
    def test_identity_kernel(self):
        c = make_conv(np.random.default_rng(0), in_channels=1, out_channels=1,
                      kernel_h=1, kernel_w=1)
        c.weight[...] = 1.0
        c.bias[...] = 0.0
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        assert np.array_equal(c.forward(x), x)

    def test_hand_convolution_2x2(self):
        c = make_conv(np.random.default_rng(0), in_channels=1, out_channels=1,
                      kernel_h=2, kernel_w=2)
        c.weight[0, 0] = [[1.0, 0.0], [0.0, 1.0]]
        c.bias[...] = 0.0
        out = c.forward(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == pytest.approx(5.0)

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_nested_loop_reference(self, seed):
        rng = np.random.default_rng(seed)
        cin, cout = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        kh, kw = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        stride = int(rng.integers(1, 3))
        padding = int(rng.integers(0, 3))
        h = int(rng.integers(max(1, kh - 2 * padding), 8))
        w = int(rng.integers(max(1, kw - 2 * padding), 8))
        if (h + 2 * padding - kh) < 0 or (w + 2 * padding - kw) < 0:
            pytest.skip("no valid output position")
        c = make_conv(rng, in_channels=cin, out_channels=cout, kernel_h=kh,
                      kernel_w=kw, stride=stride, padding=padding)
        c.bias[...] = rng.normal(size=cout)
        x = rng.normal(size=(cin, h, w))
        expected = conv2d_reference(x, c.weight, c.bias, stride, padding)
        assert np.allclose(c.forward(x), expected, atol=1e-9, rtol=0)

    def test_rejects_wrong_channels(self):
        c = make_conv(np.random.default_rng(0), in_channels=2, out_channels=1,
                      kernel_h=1, kernel_w=1)
        with pytest.raises(ShapeError):
            c.forward(np.zeros((1, 3, 3)))

    def test_rejects_non_finite(self):
        c = make_conv(np.random.default_rng(0), in_channels=1, out_channels=1,
                      kernel_h=1, kernel_w=1)
        with pytest.raises(ValueError):
            c.forward(np.array([[[np.nan]]]))


class TestConvBackward:
    def test_identity_kernel_passes_gradient(self):
        c = make_conv(np.random.default_rng(0), in_channels=1, out_channels=1,
                      kernel_h=1, kernel_w=1)
        c.weight[...] = 1.0
        c.forward(np.ones((1, 3, 3)))
        grad = c.backward(np.ones((1, 3, 3)))
        assert np.array_equal(grad, np.ones((1, 3, 3)))

    def test_zero_upstream_gives_zero_grads(self):
        rng = np.random.default_rng(3)
        c = make_conv(rng, in_channels=2, out_channels=3, kernel_h=3,
                      kernel_w=3, padding=1)
        c.forward(rng.normal(size=(2, 4, 4)))
        grad = c.backward(np.zeros((3, 4, 4)))
        assert not grad.any()
        assert not c.grad_weight.any()
        assert not c.grad_bias.any()

    def test_backward_before_forward(self):
        c = make_conv(np.random.default_rng(0), in_channels=1, out_channels=1,
                      kernel_h=1, kernel_w=1)
        with pytest.raises(StateError):
            c.backward(np.zeros((1, 1, 1)))

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(100 + seed)
        c = make_conv(rng, in_channels=1, out_channels=2, kernel_h=3,
                      kernel_w=3, stride=int(rng.integers(1, 3)), padding=1)
        c.bias[...] = rng.normal(size=2)
        x = rng.normal(size=(1, 4, 4))
        target = rng.normal(size=c.forward(x).shape)

        def loss():
            out = c.forward(x)
            return 0.5 * np.sum((out - target) ** 2)

        out = c.forward(x)
        grad_in = c.backward(out - target)
        assert max_rel_error(grad_in, finite_difference(loss, x)) < 1e-3
        assert max_rel_error(c.grad_weight, finite_difference(loss, c.weight)) < 1e-3
        assert max_rel_error(c.grad_bias, finite_difference(loss, c.bias)) < 1e-3


class TestDense:
    def test_identity(self):
        d = nn.Dense(3, 3, rng=np.random.default_rng(0))
        d.weight[...] = np.eye(3)
        d.bias[...] = 0.0
        x = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(d.forward(x), x)

    def test_hand_affine(self):
        d = nn.Dense(2, 2, rng=np.random.default_rng(0))
        d.weight[...] = [[1.0, 2.0], [3.0, 4.0]]
        d.bias[...] = [1.0, 1.0]
        assert np.array_equal(d.forward(np.array([1.0, 1.0])), [4.0, 8.0])

    def test_dimension_mismatch(self):
        d = nn.Dense(3, 2, rng=np.random.default_rng(0))
        with pytest.raises(ShapeError):
            d.forward(np.zeros(4))

    def test_finite_differences(self):
        rng = np.random.default_rng(7)
        d = nn.Dense(5, 3, rng=rng)
        x = rng.normal(size=5)
        target = rng.normal(size=3)

        def loss():
            return 0.5 * np.sum((d.forward(x) - target) ** 2)

        out = d.forward(x)
        grad_in = d.backward(out - target)
        assert max_rel_error(grad_in, finite_difference(loss, x)) < 1e-3
        assert max_rel_error(d.grad_weight, finite_difference(loss, d.weight)) < 1e-3
        assert max_rel_error(d.grad_bias, finite_difference(loss, d.bias)) < 1e-3


class TestReluUpsample:
    def test_relu_values(self):
        r = nn.ReLU()
        assert np.array_equal(r.forward(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_relu_backward_masks(self):
        r = nn.ReLU()
        r.forward(np.array([-1.0, 0.5]))
        assert np.array_equal(r.backward(np.array([3.0, 3.0])), [0.0, 3.0])

    def test_upsample_duplicates(self):
        u = nn.Upsample2x()
        out = u.forward(np.array([[[5.0]]]))
        assert np.array_equal(out, np.full((1, 2, 2), 5.0))

    def test_upsample_backward_sums_block(self):
        u = nn.Upsample2x()
        u.forward(np.array([[[5.0]]]))
        grad = u.backward(np.ones((1, 2, 2)))
        assert np.array_equal(grad, np.array([[[4.0]]]))

    def test_upsample_finite_differences(self):
        rng = np.random.default_rng(9)
        u = nn.Upsample2x()
        x = rng.normal(size=(2, 3, 2))
        target = rng.normal(size=(2, 6, 4))

        def loss():
            return 0.5 * np.sum((u.forward(x) - target) ** 2)

        out = u.forward(x)
        grad = u.backward(out - target)
        assert max_rel_error(grad, finite_difference(loss, x)) < 1e-3


class TestMSE:
    def test_zero_at_equality(self):
        x = np.arange(6.0).reshape(2, 3)
        loss, grad = nn.mse_loss(x, x.copy())
        assert loss == 0.0
        assert not grad.any()

    def test_hand_value(self):
        loss, _ = nn.mse_loss(np.array([1.0, 2.0]), np.array([0.0, 0.0]))
        assert loss == pytest.approx(2.5)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            nn.mse_loss(np.zeros(2), np.zeros(3))

    def test_gradient_vs_finite_differences(self):
        rng = np.random.default_rng(11)
        pred = rng.normal(size=(3, 4))
        target = rng.normal(size=(3, 4))
        _, grad = nn.mse_loss(pred, target)
        fd = finite_difference(lambda: nn.mse_loss(pred, target)[0], pred)
        assert max_rel_error(grad, fd) < 1e-6


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        p = [np.array([1.0, -2.0])]
        state = nn.AdamState(p, lr=0.1)
        nn.adam_step(p, [np.zeros(2)], state)
        assert np.array_equal(p[0], [1.0, -2.0])

    def test_first_step_hand_value(self):
        # m_hat = v_hat = 1 at step 1, so the update is -lr / (1 + eps)
        p = [np.array([0.0])]
        state = nn.AdamState(p, lr=0.1)
        nn.adam_step(p, [np.array([1.0])], state)
        assert p[0][0] == pytest.approx(-0.1, rel=1e-6)

    def test_constant_gradient_moves_monotonically(self):
        p = [np.array([0.0])]
        state = nn.AdamState(p, lr=0.01)
        prev = 0.0
        for _ in range(10):
            nn.adam_step(p, [np.array([1.0])], state)
            assert p[0][0] < prev
            prev = p[0][0]

    def test_rejects_non_finite_gradient(self):
        p = [np.array([0.0])]
        state = nn.AdamState(p, lr=0.1)
        with pytest.raises(TrainingError):
            nn.adam_step(p, [np.array([np.inf])], state)

    def test_determinism(self):
        def run():
            rng = np.random.default_rng(5)
            p = [rng.normal(size=4)]
            state = nn.AdamState(p, lr=0.05)
            for _ in range(20):
                nn.adam_step(p, [rng.normal(size=4)], state)
            return p[0]

        a, b = run(), run()
        assert np.array_equal(a, b)
