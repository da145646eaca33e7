import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from triad.autograd import ShapeError, Tensor, conv1d_same
from triad.encoder import (EncoderConfig, encode, encode_array, init_encoder, load_checkpoint,
                           residual_block, save_checkpoint)


def _zero_block(c_in, h, k=3):
    from triad.autograd import parameter
    blk = {"w1": parameter(np.zeros((h, c_in, k))), "b1": parameter(np.zeros(h)),
           "w2": parameter(np.zeros((h, h, k))), "b2": parameter(np.zeros(h))}
    return blk


def test_residual_block_zero():
    out = residual_block(np.zeros((16, 4)), _zero_block(4, 4), 2)
    np.testing.assert_array_equal(out.data, 0)


def test_residual_block_passthrough():
    x = np.random.default_rng(0).normal(size=(16, 4))
    np.testing.assert_array_equal(residual_block(x, _zero_block(4, 4), 1).data, x)


def test_residual_block_composition():
    rng = np.random.default_rng(1)
    enc = init_encoder(EncoderConfig(3, 20, depth=1, hidden=5), rng)
    blk = enc.blocks[0]
    x = rng.normal(size=(20, 3))
    y = conv1d_same(x, blk["w1"], blk["b1"], 1).gelu()
    y = conv1d_same(y, blk["w2"], blk["b2"], 1).gelu()
    want = y + conv1d_same(x, blk["ws"], blk["bs"], 1)
    np.testing.assert_array_equal(residual_block(x, blk, 1).data, want.data)


def test_encode_unit_norm_and_deterministic():
    rng = np.random.default_rng(2)
    enc = init_encoder(EncoderConfig(3, 40, depth=3, hidden=8), rng)
    x = rng.normal(size=(5, 40, 3))
    r = encode(x, enc).data
    np.testing.assert_allclose(np.linalg.norm(r, axis=1), 1.0, atol=1e-9)
    np.testing.assert_array_equal(encode(x, enc).data, r)
    np.testing.assert_array_equal(encode_array(x, enc, batch=2), r)


def test_encode_sensitive_to_offset():
    rng = np.random.default_rng(3)
    enc = init_encoder(EncoderConfig(1, 32, depth=2, hidden=8), rng)
    x = rng.normal(size=(32, 1))
    assert not np.allclose(encode(x, enc).data, encode(x + 1.0, enc).data)


def test_encode_channel_mismatch():
    enc = init_encoder(EncoderConfig(1, 16, depth=1, hidden=4), np.random.default_rng(0))
    with pytest.raises(ShapeError):
        encode(np.ones((16, 3)), enc)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.sampled_from([16, 25, 40, 64]), st.integers(1, 4),
       st.integers(2, 10), st.sampled_from([1, 3]))
def test_encode_output_length(c_in, L, depth, hidden, k):
    cfg = EncoderConfig(c_in, L, depth, hidden, k)
    if 2 * cfg.dilation(depth - 1) * (k // 2) + 1 >= 2 * L:
        return
    enc = init_encoder(cfg, np.random.default_rng(0))
    r = encode(np.random.default_rng(1).normal(size=(2, L, c_in)), enc)
    assert r.shape == (2, L)


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    enc = init_encoder(EncoderConfig(3, 30, depth=2, hidden=6), rng)
    path = save_checkpoint(tmp_path / "m.npz", {"frequency": enc}, enc.head, {"note": 1})
    encoders, head, meta = load_checkpoint(path)
    assert meta["note"] == 1 and meta["version"] == 1
    x = rng.normal(size=(2, 30, 3))
    np.testing.assert_array_equal(encode(x, encoders["frequency"]).data, encode(x, enc).data)


def test_checkpoint_shape_mismatch(tmp_path):
    enc = init_encoder(EncoderConfig(1, 30, depth=1, hidden=6), np.random.default_rng(0))
    path = save_checkpoint(tmp_path / "m.npz", {"temporal": enc}, enc.head, {})
    with np.load(path) as z:
        arrays = {k: z[k] for k in z.files}
    arrays["temporal/block0/w1"] = np.zeros((2, 2, 2))
    np.savez(tmp_path / "bad.npz", **arrays)
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "bad.npz")


def test_tensor_input_accepted():
    enc = init_encoder(EncoderConfig(1, 16, depth=1, hidden=4), np.random.default_rng(0))
    assert encode(Tensor(np.ones((16, 1))), enc).shape == (16,)
