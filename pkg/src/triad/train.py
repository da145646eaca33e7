"""Intra/inter-domain contrastive losses and the per-dataset training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import augment
from .autograd import Adam, as_tensor
from .encoder import EncoderConfig, encode, encode_array, init_encoder, init_head, \
    load_checkpoint, save_checkpoint
from .features import CHANNELS, DOMAINS, batch_features
from .series import InsufficientDataError, SegmentationConfig, segment, stack_windows

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.4
    batch_size: int = 8
    epochs: int = 20
    lr: float = 1e-3
    val_fraction: float = 0.10
    seed: int = 0
    depth: int = 6
    hidden: int = 32
    kernel: int = 3

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.batch_size < 2:
            raise ConfigError(f"batch size must be >= 2, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


@dataclass
class TrainedModel:
    encoders: dict
    head: dict
    seg: SegmentationConfig
    mean: float
    std: float
    loss_config: LossConfig
    history: list = field(default_factory=list)
    best_epoch: int = 0

    def embed(self, windows):
        """Unit-norm embeddings per domain for an (M, L) array of normalized windows."""
        feats = batch_features(windows, self.seg.period)
        return {d: encode_array(feats[d], self.encoders[d]) for d in DOMAINS}

    def save(self, path):
        meta = {
            "seg": asdict(self.seg),
            "mean": self.mean,
            "std": self.std,
            "loss_config": asdict(self.loss_config),
            "history": self.history,
            "best_epoch": self.best_epoch,
        }
        return save_checkpoint(path, self.encoders, self.head, meta)

    @classmethod
    def load(cls, path):
        encoders, head, meta = load_checkpoint(path)
        missing = set(DOMAINS) - set(encoders)
        if missing:
            raise ValueError(f"checkpoint lacks domains {sorted(missing)}")
        return cls(encoders, head, SegmentationConfig(**meta["seg"]), meta["mean"], meta["std"],
                   LossConfig(**meta["loss_config"]), meta["history"], meta["best_epoch"])


# losses ------------------------------------------------------------------------

def _positives(r):
    """sum_{j != i} exp(r_i . r_j) for each i."""
    b = r.shape[0]
    if b < 2:
        raise ConfigError(f"contrastive positives need a batch of >= 2, got {b}")
    off_diag = 1.0 - np.eye(b)
    return ((r @ r.T).exp() * off_diag).sum(axis=1)


def intra_loss(r, r_aug, reduce=True):
    """Originals in the batch are positives; every augmented window is a negative."""
    r, r_aug = as_tensor(r), as_tensor(r_aug)
    pos = _positives(r)
    neg = (r @ r_aug.T).exp().sum(axis=1)
    per = (pos + neg).log() - pos.log()
    return per.mean() if reduce else per


def inter_loss(r_by_domain, domain, reduce=True):
    """Same-domain batch positives; the same window seen by other domains are negatives."""
    if len(r_by_domain) < 2:
        raise ConfigError("inter-domain loss needs at least two domains")
    r = as_tensor(r_by_domain[domain])
    pos = _positives(r)
    neg = None
    for other, r_o in r_by_domain.items():
        if other == domain:
            continue
        term = (r * as_tensor(r_o)).sum(axis=1).exp()
        neg = term if neg is None else neg + term
    per = (pos + neg).log() - pos.log()
    return per.mean() if reduce else per


def total_loss(intra, inter, alpha):
    return alpha * inter + (1.0 - alpha) * intra


def batch_loss(r_by_domain, r_aug_by_domain, alpha):
    """Mean over domains of the alpha-weighted inter/intra combination."""
    terms = []
    for d in r_by_domain:
        terms.append(total_loss(intra_loss(r_by_domain[d], r_aug_by_domain[d]),
                                inter_loss(r_by_domain, d), alpha))
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out * (1.0 / len(terms))


# training ------------------------------------------------------------------------

def build_encoders(window_len, cfg, rng):
    head = init_head(cfg.hidden, rng)
    encoders = {}
    for d in DOMAINS:
        ecfg = EncoderConfig(CHANNELS[d], window_len, cfg.depth, cfg.hidden, cfg.kernel)
        encoders[d] = init_encoder(ecfg, rng, head=head)
    return encoders, head


def all_parameters(encoders, head):
    params = []
    for d in DOMAINS:
        params.extend(encoders[d].parameters(include_head=False))
    params.extend(head[k] for k in sorted(head))
    return params


def forward_batch(encoders, windows, augmented, period):
    f = batch_features(windows, period)
    fa = batch_features(augmented, period)
    r = {d: encode(f[d], encoders[d]) for d in DOMAINS}
    ra = {d: encode(fa[d], encoders[d]) for d in DOMAINS}
    return r, ra


def _batches(indices, size):
    out = [indices[i:i + size] for i in range(0, len(indices), size)]
    if len(out) > 1 and len(out[-1]) < 2:
        out[-2] = np.concatenate([out[-2], out[-1]])
        out.pop()
    return [b for b in out if len(b) >= 2]


def _eval_loss(encoders, windows, augmented, period, cfg):
    losses = []
    for idx in _batches(np.arange(len(windows)), cfg.batch_size):
        r, ra = forward_batch(encoders, windows[idx], augmented[idx], period)
        losses.append(float(batch_loss(r, ra, cfg.alpha).data))
    return float(np.mean(losses))


def split_windows(n_windows, cfg):
    n_val = max(2, int(math.ceil(cfg.val_fraction * n_windows)))
    n_train = n_windows - n_val
    if n_train < 2 * cfg.batch_size:
        raise InsufficientDataError(
            f"{n_windows} windows leave {n_train} for training; need >= {2 * cfg.batch_size}"
        )
    return n_train


def train(train_series, cfg, seg, mean=0.0, std=1.0, progress=None):
    """Train the three domain encoders on a normalized training split.

    The chronologically last ``val_fraction`` of windows is held out, and the
    parameters with the lowest validation loss (epoch 0 = initialization) are kept.
    """
    rng = np.random.default_rng(cfg.seed)
    windows, _ = stack_windows(segment(train_series, seg))
    n_train = split_windows(len(windows), cfg)
    tr, va = windows[:n_train], windows[n_train:]

    encoders, head = build_encoders(seg.window_len, cfg, rng)
    params = all_parameters(encoders, head)
    opt = Adam(params, lr=cfg.lr)

    val_rng = np.random.default_rng([cfg.seed, 1])
    va_aug, _ = augment.augment_batch(va, val_rng)

    best_val = _eval_loss(encoders, va, va_aug, seg.period, cfg)
    best = [p.data.copy() for p in params]
    best_epoch = 0
    history = [{"epoch": 0, "train": None, "val": best_val}]
    for epoch in range(1, cfg.epochs + 1):
        tr_aug, _ = augment.augment_batch(tr, rng)
        order = rng.permutation(n_train)
        losses = []
        for idx in _batches(order, cfg.batch_size):
            r, ra = forward_batch(encoders, tr[idx], tr_aug[idx], seg.period)
            loss = batch_loss(r, ra, cfg.alpha)
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
        val = _eval_loss(encoders, va, va_aug, seg.period, cfg)
        history.append({"epoch": epoch, "train": float(np.mean(losses)), "val": val})
        if progress is not None:
            progress(history[-1])
        log.debug("epoch %d train %.5f val %.5f", epoch, history[-1]["train"], val)
        if val < best_val:
            best_val, best_epoch = val, epoch
            best = [p.data.copy() for p in params]
    for p, b in zip(params, best):
        p.data = b
    return TrainedModel(encoders, head, seg, float(mean), float(std), cfg, history, best_epoch)
