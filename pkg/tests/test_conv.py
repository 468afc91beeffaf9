import numpy as np
import pytest

from pcb3dcnn import nn
from pcb3dcnn.tensor import RngStream, ShapeError

from oracles import conv3d_naive, finite_difference


def random_layer(rng, out_ch, in_ch, kernel):
    w = rng.substream(0).uniform((out_ch, in_ch) + kernel, -1, 1)
    b = rng.substream(1).uniform((out_ch,), -1, 1)
    return nn.Conv3dLayer(w, b)


def test_identity_kernel():
    x = RngStream(1).uniform((1, 3, 4, 5), -1, 1)
    layer = nn.Conv3dLayer(np.ones((1, 1, 1, 1, 1), np.float32), np.zeros(1, np.float32))
    assert np.array_equal(nn.conv3d_forward(x, layer), x)


def test_zero_kernel_gives_bias():
    x = RngStream(2).uniform((2, 3, 3, 3), -1, 1)
    bias = np.array([1.5, -2.0, 0.25], np.float32)
    layer = nn.Conv3dLayer(np.zeros((3, 2, 2, 2, 2), np.float32), bias)
    out = nn.conv3d_forward(x, layer)
    for o in range(3):
        assert (out[o] == bias[o]).all()


def test_forward_matches_naive_oracle():
    rng = RngStream(3)
    x = rng.substream(9).uniform((2, 4, 5, 5), -1, 1)
    layer = random_layer(rng, 3, 2, (2, 2, 2))
    out = nn.conv3d_forward(x, layer)
    ref = conv3d_naive(x, layer.weights, layer.bias)
    assert np.abs(out - ref).max() < 1e-5


def test_forward_shape_errors():
    layer = random_layer(RngStream(4), 2, 3, (3, 3, 3))
    with pytest.raises(ShapeError):
        nn.conv3d_forward(RngStream(0).uniform((2, 5, 5, 5)), layer)  # channel mismatch
    with pytest.raises(ShapeError):
        nn.conv3d_forward(RngStream(0).uniform((3, 2, 5, 5)), layer)  # kernel > input


def test_backward_zero_grad():
    rng = RngStream(5)
    x = rng.substream(9).uniform((2, 4, 4, 4), -1, 1)
    layer = random_layer(rng, 2, 2, (2, 2, 2))
    gout = np.zeros((2, 3, 3, 3), np.float32)
    gx, gw, gb = nn.conv3d_backward(x, layer, gout)
    assert (gx == 0).all() and (gw == 0).all() and (gb == 0).all()


def test_backward_bias_counts_positions():
    x = RngStream(6).uniform((1, 2, 3, 4), -1, 1)
    layer = nn.Conv3dLayer(np.ones((1, 1, 1, 1, 1), np.float32), np.zeros(1, np.float32))
    gout = np.ones((1, 2, 3, 4), np.float32)
    _, _, gb = nn.conv3d_backward(x, layer, gout)
    assert gb[0] == 2 * 3 * 4


def test_backward_shape_mismatch():
    rng = RngStream(7)
    x = rng.substream(9).uniform((1, 3, 3, 3), -1, 1)
    layer = random_layer(rng, 1, 1, (2, 2, 2))
    with pytest.raises(ShapeError):
        nn.conv3d_backward(x, layer, np.zeros((1, 3, 3, 3), np.float32))


@pytest.mark.parametrize("seed", range(3))
def test_backward_finite_differences(seed):
    # float64 so central differences resolve the 1e-4 relative tolerance
    rng = RngStream(100 + seed)
    x = rng.substream(9).uniform((2, 4, 4, 3), -0.5, 0.5).astype(np.float64)
    layer = random_layer(rng, 2, 2, (2, 2, 2))
    layer.weights = layer.weights.astype(np.float64)
    layer.bias = layer.bias.astype(np.float64)
    gout = rng.substream(8).uniform((2, 3, 3, 2), -1, 1).astype(np.float64)

    def loss():
        return float(np.sum(nn.conv3d_forward(x, layer) * gout))

    gx, gw, gb = nn.conv3d_backward(x, layer, gout)
    for analytic, primal in ((gx, x), (gw, layer.weights), (gb, layer.bias)):
        fd = finite_difference(loss, primal)
        denom = np.maximum(np.abs(fd), 1e-2)
        assert (np.abs(analytic - fd) / denom).max() < 1e-4
