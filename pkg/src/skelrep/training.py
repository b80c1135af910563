"""Pretraining orchestration.

Every batch draws two augmented views per sample, computes the combined
loss (feature-enrichment term + reversed-prediction term, per the
configured loss mode), steps the online parameters and then advances the
EMA target.  All randomness is a pure function of (seed, epoch, sample),
so single-threaded runs are bitwise reproducible and an interrupted run
resumes onto the identical trajectory.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import replace

import numpy as np

from .augment import augment_view
from .byol import BYOLState, ema_update, symmetric_byol_loss
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import TrainConfig, config_from_dict, config_to_dict
from .data import SkeletonDataset
from .decoder import Decoder, decode, pretext_loss, total_loss
from .encoder import Encoder, embed_batch
from .errors import DataError, TrainingFault
from .optim import lr_schedule, make_optimizer
from .skeleton import graph_from_dict, graph_to_dict
from .tape import Tensor

_TAG_INIT = 0x11
_TAG_DECODER = 0x12
_TAG_ORDER = 0x21
_TAG_AUG = 0x22

MODULE_GROUPS = ("online_encoder", "online_projector", "predictor",
                 "target_encoder", "target_projector", "decoder")


def seeded_rng(seed, *stream):
    return np.random.default_rng(
        np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream)))


def build_training_state(cfg: TrainConfig, graph, dtype=np.float32):
    enc_cfg = replace(cfg.encoder, expected_frames=cfg.frames)
    state = BYOLState.build(enc_cfg, cfg.heads, graph, cfg.tau,
                            seeded_rng(cfg.seed, _TAG_INIT), dtype)
    feature_dim = enc_cfg.feature_dim
    hidden = cfg.decoder_hidden or feature_dim
    decoder = Decoder(graph, hidden, seeded_rng(cfg.seed, _TAG_DECODER),
                      encoder_dim=feature_dim, dtype=dtype)
    return state, decoder


def _modules(state, decoder):
    return {**state.online_modules(), **state.target_modules(), "decoder": decoder}


def collect_arrays(state, decoder, optimizer=None):
    arrays = {}
    for prefix, module in _modules(state, decoder).items():
        for name, arr in module.state_dict().items():
            arrays[f"{prefix}/{name}"] = arr.copy()
    if optimizer is not None:
        for name, arr in optimizer.state_arrays().items():
            arrays[f"optimizer/{name}"] = arr.copy()
    return arrays


def restore_arrays(state, decoder, arrays, optimizer=None):
    for prefix, module in _modules(state, decoder).items():
        marker = prefix + "/"
        sub = {name[len(marker):]: arr for name, arr in arrays.items()
               if name.startswith(marker)}
        module.load_state_dict(sub)
    if optimizer is not None:
        opt = {name[len("optimizer/"):]: arr for name, arr in arrays.items()
               if name.startswith("optimizer/")}
        optimizer.load_state_arrays(opt)


def make_checkpoint(cfg, graph, epoch, state, decoder, optimizer) -> Checkpoint:
    return Checkpoint(
        epoch=epoch,
        config={"train": config_to_dict(cfg), "graph": graph_to_dict(graph)},
        rng_state={"seed": cfg.seed, "next_epoch": epoch},
        arrays=collect_arrays(state, decoder, optimizer),
        tau=cfg.tau,
    )


def state_from_checkpoint(ckpt: Checkpoint, optimizer=None):
    """Rebuild (cfg, graph, BYOLState, Decoder) from a checkpoint."""
    cfg = config_from_dict(ckpt.config["train"])
    graph = graph_from_dict(ckpt.config["graph"])
    state, decoder = build_training_state(cfg, graph)
    restore_arrays(state, decoder, ckpt.arrays, optimizer)
    return cfg, graph, state, decoder


def encoder_from_checkpoint(ckpt: Checkpoint) -> Encoder:
    """The trained online encoder in a ready-to-evaluate state."""
    _, _, state, _ = state_from_checkpoint(ckpt)
    return state.online_encoder


def training_losses(state: BYOLState, decoder: Decoder, cfg: TrainConfig, x, y):
    """Returns (total, byol value, pretext value) for one batch of paired
    views; the unused branch of an ablation mode is simply not evaluated."""
    if cfg.loss_mode == "pretext":
        out = state.online_encoder(Tensor(x), train=True)
        hidden = state.online_encoder.decoder_seed(out)
        pred = decode(hidden, cfg.frames, decoder,
                      reversed_target=x[:, ::-1],
                      teacher_forcing=cfg.teacher_forcing)
        l_pretext = pretext_loss(pred, x)
        return total_loss(0.0, l_pretext), 0.0, float(l_pretext.data)
    fwd = symmetric_byol_loss(x, y, state, train=True)
    if cfg.loss_mode == "byol":
        return total_loss(fwd.loss, 0.0), float(fwd.loss.data), 0.0
    hidden = state.online_encoder.decoder_seed(fwd.online_x)
    pred = decode(hidden, cfg.frames, decoder,
                  reversed_target=x[:, ::-1],
                  teacher_forcing=cfg.teacher_forcing)
    l_pretext = pretext_loss(pred, x)
    return (total_loss(fwd.loss, l_pretext),
            float(fwd.loss.data), float(l_pretext.data))


def embedding_spread(encoder, coords):
    """Collapse monitor: mean per-dimension standard deviation of the pooled
    embeddings of a fixed held-out batch."""
    pooled = embed_batch(encoder, coords)
    return float(pooled.std(axis=0).mean())


def pretrain(cfg: TrainConfig, dataset: SkeletonDataset, out_dir=None,
             resume_from=None, epoch_records=None) -> Checkpoint:
    """Run the unsupervised training loop and return the final checkpoint.

    out_dir (optional) receives checkpoint.skcp, last_good.skcp on a
    numerical fault, and an appended train_log.jsonl; epoch_records
    (optional list) collects the per-epoch record dicts including
    per-step losses.
    """
    if len(dataset) == 0:
        raise DataError("cannot pretrain on an empty dataset")
    ds = dataset.map_modality(cfg.modality)
    graph = ds.graph
    state, decoder = build_training_state(cfg, graph)
    optimizer = make_optimizer(cfg)
    start_epoch = 0
    if resume_from is not None:
        ckpt = resume_from if isinstance(resume_from, Checkpoint) \
            else load_checkpoint(resume_from)
        restore_arrays(state, decoder, ckpt.arrays, optimizer)
        start_epoch = ckpt.epoch

    trainable = dict(state.online_params())
    trainable.update({f"decoder.{n}": t for n, t in decoder.named_params()})

    monitor_count = min(cfg.batch_size, len(ds))
    monitor_coords = ds.resample(cfg.frames).coords[:monitor_count]

    total = len(ds)
    steps_per_epoch = (total + cfg.batch_size - 1) // cfg.batch_size
    log_path = os.path.join(out_dir, "train_log.jsonl") if out_dir else None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    last_good = collect_arrays(state, decoder, optimizer)

    for epoch in range(start_epoch, cfg.epochs):
        started = time.time()
        order = seeded_rng(cfg.seed, _TAG_ORDER, epoch).permutation(total)
        step_losses, byol_vals, pretext_vals = [], [], []
        try:
            for step, first in enumerate(range(0, total, cfg.batch_size)):
                batch = order[first:first + cfg.batch_size]
                lr = lr_schedule(epoch + step / steps_per_epoch, cfg)
                views_x, views_y = [], []
                for i in batch:
                    seq = ds[int(i)]
                    views_x.append(augment_view(
                        seq, cfg.augment,
                        seeded_rng(cfg.seed, _TAG_AUG, epoch, int(i), 0)).coords)
                    views_y.append(augment_view(
                        seq, cfg.augment,
                        seeded_rng(cfg.seed, _TAG_AUG, epoch, int(i), 1)).coords)
                x = np.stack(views_x).astype(np.float32)
                y = np.stack(views_y).astype(np.float32)
                loss, byol_val, pretext_val = training_losses(state, decoder, cfg, x, y)
                loss.backward()
                optimizer.step(trainable, lr)
                for t in trainable.values():
                    t.grad = None
                ema_update(state)
                step_losses.append(float(loss.data))
                byol_vals.append(byol_val)
                pretext_vals.append(pretext_val)
        except TrainingFault:
            if out_dir:
                fallback = Checkpoint(
                    epoch=epoch,
                    config={"train": config_to_dict(cfg), "graph": graph_to_dict(graph)},
                    rng_state={"seed": cfg.seed, "next_epoch": epoch},
                    arrays=last_good, tau=cfg.tau)
                save_checkpoint(fallback, os.path.join(out_dir, "last_good.skcp"))
            raise

        record = {
            "epoch": epoch + 1,
            "loss": float(np.mean(step_losses)),
            "loss_byol": float(np.mean(byol_vals)),
            "loss_pretext": float(np.mean(pretext_vals)),
            "lr": lr_schedule(epoch + 1, cfg),
            "embed_std": embedding_spread(state.online_encoder, monitor_coords),
            "wall_time": time.time() - started,
            "step_losses": step_losses,
        }
        if epoch_records is not None:
            epoch_records.append(record)
        if log_path:
            with open(log_path, "a") as fh:
                fh.write(json.dumps(record) + "\n")
        last_good = collect_arrays(state, decoder, optimizer)
        if out_dir and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0 \
                and epoch + 1 < cfg.epochs:
            periodic = make_checkpoint(cfg, graph, epoch + 1, state, decoder, optimizer)
            save_checkpoint(periodic, os.path.join(out_dir, f"epoch{epoch + 1:05d}.skcp"))

    final = make_checkpoint(cfg, graph, cfg.epochs, state, decoder, optimizer)
    if out_dir:
        save_checkpoint(final, os.path.join(out_dir, "checkpoint.skcp"))
    return final
