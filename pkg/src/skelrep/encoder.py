"""Spatial-temporal feature transformation network.

A stack of ST-GCN blocks (spatial graph convolution + temporal
convolution, channels 32-64-128-512 at paper scale, temporal stride 2 in
the last block) feeds a graph-convolutional GRU whose per-step hidden
states are enhanced by one more graph convolution; mean pooling over time
steps and joints yields the embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape
from .errors import ConfigError, StructureError
from .nn import (
    BatchNorm,
    Linear,
    Module,
    SpatialGraphConv,
    TemporalConv,
    gru_gates,
    gru_scan,
)
from .skeleton import SkeletonGraph, build_partitioned_adjacency
from .tape import Tensor


@dataclass(frozen=True)
class EncoderConfig:
    channels: tuple = (32, 64, 128, 512)
    gru_hidden: int = 256
    gru_layers: int = 1
    temporal_kernel: int = 9
    in_channels: int = 3
    #: frame count the harness feeds this encoder; None accepts any length
    expected_frames: int | None = None
    #: seed the decoder from the graph-conv-enhanced hidden instead of the
    #: raw final GRU state
    seed_from_enhanced: bool = False

    @property
    def feature_dim(self):
        return self.gru_hidden if self.gru_layers > 0 else self.channels[-1]


ENCODER_VARIANTS = ("proposed", "v1", "v2", "v3", "v4", "v5")


def make_encoder_variant(variant: str, **overrides) -> EncoderConfig:
    """Layer-count templates of the ablation variants (paper-scale widths)."""
    table = {
        "proposed": dict(channels=(32, 64, 128, 512), gru_layers=1),
        "v1": dict(channels=(32, 32, 64, 64, 128, 128, 512, 512), gru_layers=1),
        "v2": dict(channels=(32, 64, 64, 128, 128, 512), gru_layers=1),
        "v3": dict(channels=(32, 512), gru_layers=1),
        "v4": dict(channels=(32, 64, 128, 512), gru_layers=0),
        "v5": dict(channels=(32, 64, 128, 512), gru_layers=2),
    }
    if variant not in table:
        raise ConfigError(f"unknown encoder variant {variant!r}; "
                          f"choose from {ENCODER_VARIANTS}")
    return EncoderConfig(**{**table[variant], **overrides})


@dataclass
class EncoderOutput:
    """hidden_seq: (B, T', N, C) graph-conv-enhanced GRU outputs;
    last_hidden: (B, N, C) final recurrent state (pre graph conv);
    pooled: (B, C) mean over time steps and joints."""

    hidden_seq: Tensor
    last_hidden: Tensor
    pooled: Tensor


class STGCNBlock(Module):
    """Spatial graph convolution + temporal convolution with batch norms,
    a residual path and ReLUs."""

    def __init__(self, c_in, c_out, adjacency, rng, kernel=9, stride=1,
                 dtype=np.float32, batchnorm=True):
        self.spatial = SpatialGraphConv(c_in, c_out, adjacency, rng, dtype)
        self.bn1 = BatchNorm(c_out, dtype) if batchnorm else None
        self.temporal = TemporalConv(c_out, c_out, rng, kernel, stride, dtype)
        self.bn2 = BatchNorm(c_out, dtype) if batchnorm else None
        if c_in == c_out and stride == 1:
            self.res_proj = None
            self.res_bn = None
        else:
            self.res_proj = Linear(c_in, c_out, rng, dtype, bias=False)
            self.res_bn = BatchNorm(c_out, dtype) if batchnorm else None
        self.stride = stride

    def __call__(self, x, train, update_stats=True):
        y = self.spatial(x)
        if self.bn1 is not None:
            y = self.bn1(y, train, update_stats)
        y = y.relu()
        y = self.temporal(y)
        if self.bn2 is not None:
            y = self.bn2(y, train, update_stats)
        if self.res_proj is None:
            res = x
        else:
            res = self.res_proj(x[:, ::self.stride])
            if self.res_bn is not None:
                res = self.res_bn(res, train, update_stats)
        return (y + res).relu()


class GConvGRU(Module):
    """GRU whose gates are per-joint 1x1 convolutions; the stacked hidden
    states are enhanced by a graph convolution applied independently per
    time step (so it runs in parallel over the whole sequence)."""

    def __init__(self, c_in, c_h, adjacency, rng, dtype=np.float32, out_gain=1.0):
        self.input_proj = Linear(c_in, 3 * c_h, rng, dtype)       # U_z | U_r | U_h (+ gate biases)
        self.hidden_zr = Linear(c_h, 2 * c_h, rng, dtype, bias=False)  # V_z | V_r
        self.hidden_cand = Linear(c_h, c_h, rng, dtype, bias=False)    # V_h
        self.out_gconv = SpatialGraphConv(c_h, c_h, adjacency, rng, dtype,
                                          gain=out_gain)
        self.c_h = c_h

    def step_projected(self, u_t, h):
        """One recurrence with the input projection u_t = U x_t + b already
        computed; u_t: (B, N, 3*C_h), h: (B, N, C_h)."""
        return gru_gates(u_t, h, self.hidden_zr.weight, self.hidden_cand.weight)

    def step(self, x_t, h):
        return self.step_projected(self.input_proj(x_t), h)

    def __call__(self, x, h0=None):
        # x: (B, T, N, C_in) -> (enhanced (B, T, N, C_h), last hidden (B, N, C_h))
        b, t, n, _ = x.shape
        u = self.input_proj(x)
        if h0 is None:
            h0 = np.zeros((b, n, self.c_h), dtype=x.dtype)
        stacked = gru_scan(u, h0, self.hidden_zr.weight, self.hidden_cand.weight)
        return self.out_gconv(stacked), stacked[:, -1]


class Encoder(Module):
    """Input batch norm -> ST-GCN blocks -> GConv-GRU layer(s) -> pooling."""

    def __init__(self, config: EncoderConfig, graph: SkeletonGraph, rng,
                 dtype=np.float32, batchnorm=True):
        adjacency = build_partitioned_adjacency(graph)
        self.input_bn = BatchNorm(config.in_channels, dtype) if batchnorm else None
        blocks = []
        c_prev = config.in_channels
        for i, c_out in enumerate(config.channels):
            stride = 2 if i == len(config.channels) - 1 else 1
            blocks.append(STGCNBlock(c_prev, c_out, adjacency, rng,
                                     kernel=config.temporal_kernel,
                                     stride=stride, dtype=dtype,
                                     batchnorm=batchnorm))
            c_prev = c_out
        self.blocks = blocks
        grus = []
        for i in range(config.gru_layers):
            c_in = c_prev if i == 0 else config.gru_hidden
            # the last graph conv feeds the pooled embedding; a larger init
            # gain keeps the embedding spread measurable from the first epoch
            grus.append(GConvGRU(c_in, config.gru_hidden, adjacency, rng, dtype,
                                 out_gain=8.0))
        self.grus = grus
        self.config = config
        self.graph = graph
        self.dtype = dtype

    def __call__(self, x, train, update_stats=True) -> EncoderOutput:
        # x: (B, T, N, 3)
        expected = self.config.expected_frames
        if expected is not None and x.shape[1] != expected:
            raise StructureError(
                f"encoder configured for {expected} frames, got {x.shape[1]}")
        if x.shape[2] != self.graph.joint_count:
            raise StructureError(
                f"encoder graph has {self.graph.joint_count} joints, input has {x.shape[2]}")
        h = x
        if self.input_bn is not None:
            h = self.input_bn(h, train, update_stats)
        for block in self.blocks:
            h = block(h, train, update_stats)
        if not self.grus:
            hidden_seq = h
            last_hidden = h[:, -1]
        else:
            for gru in self.grus:
                hidden_seq, last_hidden = gru(h)
                h = hidden_seq
        pooled = hidden_seq.mean(axis=(1, 2))
        return EncoderOutput(hidden_seq, last_hidden, pooled)

    def decoder_seed(self, output: EncoderOutput):
        """Hidden state handed to the reversed-prediction decoder."""
        if self.config.seed_from_enhanced:
            return output.hidden_seq[:, -1]
        return output.last_hidden


def encode(encoder: Encoder, seq, train=False):
    """Single-sequence forward; returns an EncoderOutput of plain arrays
    with the batch axis squeezed away."""
    x = Tensor(np.asarray(seq.coords, dtype=encoder.dtype)[None])
    with tape.no_grad():
        out = encoder(x, train=train, update_stats=False)
    return EncoderOutput(hidden_seq=out.hidden_seq.data[0],
                         last_hidden=out.last_hidden.data[0],
                         pooled=out.pooled.data[0])


def embed_batch(encoder: Encoder, coords, train=False):
    """Pooled embeddings for a (S, T, N, 3) coordinate array, evaluated
    without building a graph."""
    x = Tensor(np.asarray(coords, dtype=encoder.dtype))
    with tape.no_grad():
        out = encoder(x, train=train, update_stats=False)
    return out.pooled.data
