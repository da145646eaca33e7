"""Dilated residual convolution encoder with a per-timestep projection head."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .autograd import ShapeError, Tensor, conv1d_same, l2_normalize, parameter

CHECKPOINT_VERSION = 1
ACTIVATION = "gelu_tanh"
INIT = "normal(0, 1/sqrt(fan_in))"


@dataclass(frozen=True)
class EncoderConfig:
    in_channels: int
    window_len: int
    depth: int = 6
    hidden: int = 32
    kernel: int = 3

    def __post_init__(self):
        if self.depth < 1 or self.hidden < 1 or self.in_channels < 1:
            raise ValueError(f"invalid encoder config {self}")
        if self.kernel % 2 != 1:
            raise ValueError(f"kernel size must be odd, got {self.kernel}")

    def dilation(self, block):
        return 2 ** block


@dataclass
class EncoderParams:
    """Conv blocks for one domain plus a (possibly shared) projection head."""

    config: EncoderConfig
    blocks: list
    head: dict

    def parameters(self, include_head=True):
        out = []
        for blk in self.blocks:
            out.extend(blk[k] for k in sorted(blk))
        if include_head:
            out.extend(self.head[k] for k in sorted(self.head))
        return out


def _init(rng, shape, fan_in, name):
    return parameter(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape), name=name)


def init_head(hidden, rng):
    return {
        "w1": _init(rng, (hidden, hidden), hidden, "head.w1"),
        "b1": parameter(np.zeros(hidden), "head.b1"),
        "w2": _init(rng, (hidden, 1), hidden, "head.w2"),
        "b2": parameter(np.zeros(1), "head.b2"),
    }


def init_encoder(cfg, rng, head=None):
    h, k = cfg.hidden, cfg.kernel
    blocks = []
    c_in = cfg.in_channels
    for b in range(cfg.depth):
        blk = {
            "w1": _init(rng, (h, c_in, k), c_in * k, f"block{b}.w1"),
            "b1": parameter(np.zeros(h), f"block{b}.b1"),
            "w2": _init(rng, (h, h, k), h * k, f"block{b}.w2"),
            "b2": parameter(np.zeros(h), f"block{b}.b2"),
        }
        if c_in != h:
            blk["ws"] = _init(rng, (h, c_in, 1), c_in, f"block{b}.ws")
            blk["bs"] = parameter(np.zeros(h), f"block{b}.bs")
        blocks.append(blk)
        c_in = h
    return EncoderParams(cfg, blocks, head if head is not None else init_head(h, rng))


def residual_block(x, blk, dilation):
    """gelu(conv2(gelu(conv1(x)))) + skip(x); skip is 1x1 when channel counts differ."""
    y = conv1d_same(x, blk["w1"], blk["b1"], dilation).gelu()
    y = conv1d_same(y, blk["w2"], blk["b2"], dilation).gelu()
    if "ws" in blk:
        skip = conv1d_same(x, blk["ws"], blk["bs"], 1)
    else:
        skip = x if isinstance(x, Tensor) else Tensor(x)
    return y + skip


def project(hidden, head):
    """(..., L, h) -> (..., L) via two per-timestep dense layers."""
    z = (hidden @ head["w1"] + head["b1"]).gelu()
    z = z @ head["w2"] + head["b2"]
    return z.reshape(*z.shape[:-1])


def encode(features, params):
    """Unit-norm embedding r of length L for each window in ``features`` (..., L, C)."""
    x = features.channels if hasattr(features, "channels") else features
    x = x if isinstance(x, Tensor) else Tensor(x)
    cfg = params.config
    if x.shape[-1] != cfg.in_channels:
        raise ShapeError(f"features have {x.shape[-1]} channels, encoder expects {cfg.in_channels}")
    h = x
    for b, blk in enumerate(params.blocks):
        h = residual_block(h, blk, cfg.dilation(b))
    return l2_normalize(project(h, params.head), axis=-1)


def encode_array(features, params, batch=256):
    """Inference helper returning a plain array, batched to bound memory."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[0] <= batch:
        return encode(x, params).data
    return np.concatenate([encode(x[i:i + batch], params).data
                           for i in range(0, x.shape[0], batch)])


# checkpoints -----------------------------------------------------------------

def flatten_params(encoders, head):
    flat = {}
    for domain, p in encoders.items():
        for b, blk in enumerate(p.blocks):
            for name, t in blk.items():
                flat[f"{domain}/block{b}/{name}"] = t.data
    for name, t in head.items():
        flat[f"head/{name}"] = t.data
    return flat


def save_checkpoint(path, encoders, head, meta):
    meta = dict(meta)
    meta["version"] = CHECKPOINT_VERSION
    meta["configs"] = {d: asdict(p.config) for d, p in encoders.items()}
    meta["activation"] = ACTIVATION
    meta["init"] = INIT
    arrays = flatten_params(encoders, head)
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    path = Path(path)
    with path.open("wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path):
    """Returns (encoders, head, meta); every array shape is checked against the config."""
    with np.load(Path(path)) as z:
        arrays = {k: z[k] for k in z.files}
    meta = json.loads(arrays.pop("__meta__").tobytes().decode())
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
    configs = {d: EncoderConfig(**c) for d, c in meta["configs"].items()}
    any_cfg = next(iter(configs.values()))
    template_head = init_head(any_cfg.hidden, np.random.default_rng(0))
    head = {}
    for name, t in template_head.items():
        head[name] = _load_array(arrays, f"head/{name}", t.shape)
    encoders = {}
    for domain, cfg in configs.items():
        tmpl = init_encoder(cfg, np.random.default_rng(0), head=head)
        blocks = []
        for b, blk in enumerate(tmpl.blocks):
            blocks.append({name: _load_array(arrays, f"{domain}/block{b}/{name}", t.shape)
                           for name, t in blk.items()})
        encoders[domain] = EncoderParams(cfg, blocks, head)
    return encoders, head, meta


def _load_array(arrays, key, shape):
    if key not in arrays:
        raise ValueError(f"checkpoint missing {key}")
    a = arrays[key]
    if a.shape != shape:
        raise ValueError(f"checkpoint {key} has shape {a.shape}, expected {shape}")
    return parameter(a, name=key)
