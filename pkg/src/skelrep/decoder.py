"""Fidelity-preservation branch: reversed-sequence prediction.

The decoder is one graph convolution (skeleton 3ch -> hidden), one
GConv-GRU cell seeded with the online encoder's final hidden state, and
one 1x1 convolution back to 3-D joint coordinates.  Step 1 consumes a
learnable randomly-initialized skeleton; later steps consume either the
previous reversed-target frame (teacher forcing) or the decoder's own
previous prediction (autoregressive, the default).
"""

from __future__ import annotations

import numpy as np

from . import tape
from .encoder import GConvGRU
from .errors import StructureError, TrainingFault
from .nn import Linear, Module, SpatialGraphConv
from .skeleton import build_partitioned_adjacency
from .tape import Tensor


class Decoder(Module):
    def __init__(self, graph, hidden, rng, encoder_dim=None, dtype=np.float32):
        adjacency = build_partitioned_adjacency(graph)
        self.input_gcn = SpatialGraphConv(3, hidden, adjacency, rng, dtype)
        self.gru = GConvGRU(hidden, hidden, adjacency, rng, dtype)
        self.out_conv = Linear(hidden, 3, rng, dtype)
        self.seed_skeleton = Tensor(
            rng.standard_normal((graph.joint_count, 3)).astype(dtype),
            requires_grad=True)
        # encoder feature width may differ from the decoder hidden width
        # (e.g. a 512-wide decoder on a 256-d encoder); bridge when it does
        if encoder_dim is not None and encoder_dim != hidden:
            self.bridge = Linear(encoder_dim, hidden, rng, dtype)
        else:
            self.bridge = None
        self.hidden = hidden

    def initial_state(self, last_hidden):
        if self.bridge is not None:
            return self.bridge(last_hidden)
        if last_hidden.shape[-1] != self.hidden:
            raise StructureError(
                f"decoder hidden {self.hidden} incompatible with encoder "
                f"feature {last_hidden.shape[-1]} (configure a bridge)")
        return last_hidden


def decode(last_hidden, frames, decoder: Decoder, reversed_target=None,
           teacher_forcing=False):
    """Roll the decoder for `frames` steps from the encoder hidden state.

    last_hidden: (B, N, C) Tensor (gradients flow back into the encoder).
    reversed_target: (B, F, N, 3) array, required under teacher forcing.
    Returns the predicted reversed sequence as a (B, F, N, 3) Tensor.
    """
    if teacher_forcing:
        if reversed_target is None:
            raise StructureError("teacher forcing needs the reversed target")
        if reversed_target.shape[1] != frames:
            raise StructureError(
                f"reversed target has {reversed_target.shape[1]} frames, expected {frames}")
    h = decoder.initial_state(last_hidden)
    b, n = h.shape[0], h.shape[1]
    dtype = h.dtype
    seed = decoder.seed_skeleton.reshape(1, n, 3)
    # broadcast the shared seed skeleton across the batch
    prev = seed + Tensor(np.zeros((b, n, 3), dtype=dtype)) if b > 1 else seed
    outputs = []
    for t in range(frames):
        d = decoder.input_gcn(prev)
        h = decoder.gru.step(d, h)
        s = decoder.gru.out_gconv(h)
        frame = decoder.out_conv(s)
        outputs.append(frame)
        if t + 1 < frames:
            if teacher_forcing:
                prev = Tensor(np.asarray(reversed_target[:, t], dtype=dtype))
            else:
                prev = frame
    return tape.stack(outputs, axis=1)


def pretext_loss(x_prime, x_coords):
    """Mean squared error between the prediction and the reversed input."""
    target = np.asarray(x_coords)[:, ::-1]
    if x_prime.shape != target.shape:
        raise StructureError(
            f"prediction {x_prime.shape} does not match target {target.shape}")
    diff = x_prime - np.ascontiguousarray(target, dtype=x_prime.dtype)
    return (diff * diff).mean()


def total_loss(l_byol, l_pretext):
    """L = L_BYOL + L_P, no weighting."""
    for name, term in (("BYOL", l_byol), ("pretext", l_pretext)):
        value = term.data if isinstance(term, Tensor) else term
        if not np.all(np.isfinite(value)):
            raise TrainingFault(f"non-finite {name} loss")
    return l_byol + l_pretext
