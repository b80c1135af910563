"""Evaluation protocols: frozen-encoder linear probe, semi-supervised
fine-tuning and the three-stream (joint/bone/motion) ensemble."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint
from .config import config_from_dict
from .data import SkeletonDataset
from .encoder import embed_batch
from .errors import ConfigError, DataError
from .nn import Linear
from .optim import SGDMomentum
from .tape import Tensor
from .training import (
    build_training_state,
    encoder_from_checkpoint,
    seeded_rng,
    state_from_checkpoint,
)

_TAG_FINETUNE = 0x31
_TAG_SUBSET = 0x32


def _as_checkpoint(ckpt):
    return ckpt if isinstance(ckpt, Checkpoint) else load_checkpoint(ckpt)


def embed_dataset(encoder, ds: SkeletonDataset, batch_size=256):
    """Pooled eval-mode embeddings for every sample, (S, D)."""
    frames = encoder.config.expected_frames
    if frames is not None:
        ds = ds.resample(frames)
    chunks = [embed_batch(encoder, ds.coords[i:i + batch_size])
              for i in range(0, len(ds), batch_size)]
    return np.concatenate(chunks, axis=0)


# -- linear probe -----------------------------------------------------------------


@dataclass
class LinearProbe:
    weight: np.ndarray          # (D, K)
    bias: np.ndarray            # (K,)
    feat_mean: np.ndarray
    feat_scale: np.ndarray

    def logits(self, features):
        z = (features - self.feat_mean) / self.feat_scale
        return z @ self.weight + self.bias

    def probs(self, features):
        z = self.logits(features)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, features):
        return self.logits(features).argmax(axis=1)


def train_probe(features, labels, class_count, epochs=100, lr=1.0,
                momentum=0.9, weight_decay=1e-4) -> LinearProbe:
    """Softmax regression by full-batch momentum gradient descent with a
    cosine-decayed rate; features are standardized inside the probe, and
    everything is deterministic (zero init, no rng)."""
    feats = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    mean = feats.mean(axis=0)
    scale = feats.std(axis=0) + 1e-8
    z = (feats - mean) / scale
    s, d = z.shape
    w = np.zeros((d, class_count))
    b = np.zeros(class_count)
    onehot = np.zeros((s, class_count))
    onehot[np.arange(s), labels] = 1.0
    vw = np.zeros_like(w)
    vb = np.zeros_like(b)
    for epoch in range(epochs):
        rate = lr * 0.5 * (1.0 + np.cos(np.pi * epoch / epochs))
        logits = z @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        p = e / e.sum(axis=1, keepdims=True)
        gw = z.T @ (p - onehot) / s + weight_decay * w
        gb = (p - onehot).mean(axis=0)
        vw = momentum * vw + rate * gw
        vb = momentum * vb + rate * gb
        w -= vw
        b -= vb
    return LinearProbe(weight=w, bias=b, feat_mean=mean, feat_scale=scale)


def accuracy(predictions, labels):
    return float(np.mean(np.asarray(predictions) == np.asarray(labels)))


def linear_eval(ckpt, train_set: SkeletonDataset, test_set: SkeletonDataset,
                epochs=100, lr=1.0) -> float:
    """Freeze the online encoder, fit a linear classifier on the train
    embeddings with cross-entropy, report test top-1 accuracy."""
    class_count = max(train_set.class_count(), test_set.class_count())
    if class_count < 2:
        raise DataError("linear evaluation needs labeled data")
    encoder = encoder_from_checkpoint(_as_checkpoint(ckpt))
    train_feats = embed_dataset(encoder, train_set)
    test_feats = embed_dataset(encoder, test_set)
    probe = train_probe(train_feats, train_set.labels, class_count,
                        epochs=epochs, lr=lr)
    return accuracy(probe.predict(test_feats), test_set.labels)


# -- semi-supervised fine-tuning -----------------------------------------------------


def stratified_subset(ds: SkeletonDataset, fraction, seed=0):
    """Per-class random subset of ceil(fraction * n_k) samples."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigError("label fraction must be in (0, 1]")
    if fraction == 1.0:
        return ds
    rng = seeded_rng(seed, _TAG_SUBSET)
    picked = []
    for k in range(ds.class_count()):
        idx = np.flatnonzero(ds.labels == k)
        if idx.size == 0:
            raise DataError(f"stratification failed: class {k} has no samples")
        take = int(np.ceil(fraction * idx.size))
        picked.extend(rng.choice(idx, size=take, replace=False))
    return ds.subset(sorted(int(i) for i in picked))


def _softmax_ce(logits, labels):
    shift = Tensor(logits.data.max(axis=1, keepdims=True))
    z = logits - shift
    lse = z.exp().sum(axis=1).log()
    onehot = np.zeros(logits.shape, dtype=logits.data.dtype)
    onehot[np.arange(len(labels)), labels] = 1.0
    true = (z * onehot).sum(axis=1)
    return (lse - true).mean()


def semi_supervised_finetune(ckpt, fraction, train_set: SkeletonDataset,
                             test_set: SkeletonDataset, epochs=30, lr=0.01,
                             momentum=0.9, batch_size=32, seed=0,
                             from_random_init=False) -> float:
    """Unfreeze everything: fine-tune encoder plus a fresh linear head on a
    stratified labeled subset, report test accuracy.  from_random_init
    skips loading the pretrained weights (the paired baseline)."""
    ckpt = _as_checkpoint(ckpt)
    cfg, graph, state, _ = state_from_checkpoint(ckpt)
    encoder = state.online_encoder
    if from_random_init:
        fresh_state, _ = build_training_state(cfg, graph)
        encoder = fresh_state.online_encoder
    class_count = max(train_set.class_count(), test_set.class_count())
    subset = stratified_subset(train_set, fraction, seed=seed)
    subset = subset.resample(cfg.frames)

    rng = seeded_rng(seed, _TAG_FINETUNE)
    head = Linear(cfg.encoder.feature_dim, class_count, rng, dtype=encoder.dtype)
    params = {f"encoder.{n}": t for n, t in encoder.named_params()}
    params.update({f"head.{n}": t for n, t in head.named_params()})
    optimizer = SGDMomentum(momentum=momentum)

    total = len(subset)
    for epoch in range(epochs):
        rate = lr * 0.5 * (1.0 + np.cos(np.pi * epoch / epochs))
        order = seeded_rng(seed, _TAG_FINETUNE, epoch + 1).permutation(total)
        for first in range(0, total, batch_size):
            batch = order[first:first + batch_size]
            x = Tensor(subset.coords[batch].astype(encoder.dtype))
            out = encoder(x, train=True)
            logits = head(out.pooled)
            loss = _softmax_ce(logits, subset.labels[batch])
            loss.backward()
            optimizer.step(params, rate)
            for t in params.values():
                t.grad = None

    test_feats = embed_dataset(encoder, test_set)
    logits = test_feats @ head.weight.data + head.bias.data
    return accuracy(logits.argmax(axis=1), test_set.labels)


# -- three-stream ensemble -------------------------------------------------------------


def ensemble_3s(ckpts: dict, train_set: SkeletonDataset,
                test_set: SkeletonDataset, epochs=100, lr=1.0) -> float:
    """Average the three modality streams' softmax scores and take the
    argmax.  ckpts maps 'joint'/'bone'/'motion' to that stream's
    pretraining checkpoint (each validated against its recorded modality)."""
    class_count = max(train_set.class_count(), test_set.class_count())
    prob_sum = None
    for modality in ("joint", "bone", "motion"):
        if modality not in ckpts:
            raise ConfigError(f"missing checkpoint for modality {modality!r}")
        ckpt = _as_checkpoint(ckpts[modality])
        recorded = config_from_dict(ckpt.config["train"]).modality
        if recorded != modality:
            raise ConfigError(f"checkpoint for {modality!r} was pretrained on "
                              f"{recorded!r} data")
        encoder = encoder_from_checkpoint(ckpt)
        train_stream = train_set.map_modality(modality)
        test_stream = test_set.map_modality(modality)
        probe = train_probe(embed_dataset(encoder, train_stream),
                            train_stream.labels, class_count,
                            epochs=epochs, lr=lr)
        probs = probe.probs(embed_dataset(encoder, test_stream))
        prob_sum = probs if prob_sum is None else prob_sum + probs
    return accuracy(prob_sum.argmax(axis=1), test_set.labels)
