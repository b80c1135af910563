"""Feature-enrichment branch: projector/predictor heads, the normalized-MSE
loss with its symmetrized form, stop-gradient handling and the EMA target
update."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape
from .encoder import Encoder, EncoderConfig, EncoderOutput
from .errors import StructureError
from .nn import MLPHead, Module
from .tape import Tensor

NORM_EPS = 1e-12


@dataclass(frozen=True)
class HeadConfig:
    """Projector widths; the predictor reuses the same layer sizes on the
    projector's output space (hidden 1024, out 512 at paper scale)."""

    hidden: int = 1024
    out: int = 512


class BYOLState(Module):
    """Online branch (encoder, projector, predictor, all gradient-trained),
    target branch (encoder + projector, EMA-updated only) and tau."""

    def __init__(self, online_encoder, online_projector, predictor,
                 target_encoder, target_projector, tau):
        if not 0.0 <= tau <= 1.0:
            raise StructureError("tau must lie in [0, 1]")
        self.online_encoder = online_encoder
        self.online_projector = online_projector
        self.predictor = predictor
        self.target_encoder = target_encoder
        self.target_projector = target_projector
        self.tau = tau

    @classmethod
    def build(cls, encoder_cfg: EncoderConfig, head_cfg: HeadConfig, graph,
              tau, rng, dtype=np.float32):
        """Online and target branches are initialized independently (two
        rng streams); tau=0 ema_update collapses target onto online."""
        online_rng, target_rng = [np.random.default_rng(s) for s in rng.spawn(2)]
        dim = encoder_cfg.feature_dim
        online_encoder = Encoder(encoder_cfg, graph, online_rng, dtype)
        online_projector = MLPHead(dim, head_cfg.hidden, head_cfg.out, online_rng, dtype)
        predictor = MLPHead(head_cfg.out, head_cfg.hidden, head_cfg.out, online_rng, dtype)
        target_encoder = Encoder(encoder_cfg, graph, target_rng, dtype)
        target_projector = MLPHead(dim, head_cfg.hidden, head_cfg.out, target_rng, dtype)
        return cls(online_encoder, online_projector, predictor,
                   target_encoder, target_projector, tau)

    def online_modules(self):
        return {"online_encoder": self.online_encoder,
                "online_projector": self.online_projector,
                "predictor": self.predictor}

    def target_modules(self):
        return {"target_encoder": self.target_encoder,
                "target_projector": self.target_projector}

    def online_params(self):
        out = {}
        for prefix, module in self.online_modules().items():
            for name, t in module.named_params():
                out[f"{prefix}.{name}"] = t
        return out

    def target_params(self):
        out = {}
        for prefix, module in self.target_modules().items():
            for name, t in module.named_params():
                out[f"{prefix}.{name}"] = t
        return out


def _normalize_rows(v):
    # the eps guard lives inside the sqrt so the gradient stays finite at 0
    norm = ((v * v).sum(axis=-1, keepdims=True) + NORM_EPS ** 2).sqrt()
    return v / norm


def byol_loss(q_out, g_out):
    """Squared distance of the l2-normalized vectors: equals
    2 - 2 cos(q, g), in [0, 4]; mean over any leading batch axis."""
    q = q_out if isinstance(q_out, Tensor) else Tensor(np.asarray(q_out))
    g = g_out if isinstance(g_out, Tensor) else Tensor(np.asarray(g_out))
    diff = _normalize_rows(q) - _normalize_rows(g)
    per_pair = (diff * diff).sum(axis=-1)
    return per_pair.mean() if per_pair.ndim > 0 else per_pair


def byol_loss_cosine_form(q_out, g_out):
    """The 2 - 2*cos identity, used as the cross-check of byol_loss."""
    q, g = np.asarray(q_out), np.asarray(g_out)
    dot = (q * g).sum(axis=-1)
    nq = np.sqrt((q * q).sum(axis=-1))
    ng = np.sqrt((g * g).sum(axis=-1))
    return 2.0 - 2.0 * dot / ((nq + NORM_EPS) * (ng + NORM_EPS))


@dataclass
class BYOLForward:
    loss: Tensor
    online_x: EncoderOutput
    online_y: EncoderOutput | None


def symmetric_byol_loss(x_coords, y_coords, state: BYOLState, train=True,
                        stop_gradient=True) -> BYOLForward:
    """L_BYOL = || q(x) - sg(z(y)) ||-term + || q(y) - sg(z(x)) ||-term,
    mean over the batch.

    The two views go through each branch in one batched pass (batch-norm
    statistics span both views).  The target branch runs without building
    a graph unless stop_gradient=False (a negative-control hook for the
    stop-gradient contract test).
    """
    dtype = state.online_encoder.dtype
    x = np.asarray(x_coords, dtype=dtype)
    y = np.asarray(y_coords, dtype=dtype)
    b = x.shape[0]
    both = Tensor(np.concatenate([x, y], axis=0))

    online_out = state.online_encoder(both, train=train)
    proj = state.online_projector(online_out.pooled, train=train)
    pred = state.predictor(proj, train=train)
    q_x, q_y = pred[:b], pred[b:]

    def target_forward():
        target_in = Tensor(np.concatenate([y, x], axis=0))
        t_out = state.target_encoder(target_in, train=train, update_stats=False)
        return state.target_projector(t_out.pooled, train=train, update_stats=False)

    if stop_gradient:
        with tape.no_grad():
            t_proj = target_forward()
    else:
        t_proj = target_forward()
    z_y, z_x = t_proj[:b], t_proj[b:]

    loss = byol_loss(q_x, z_y) + byol_loss(q_y, z_x)

    def split(output):
        return (EncoderOutput(hidden_seq=output.hidden_seq[:b],
                              last_hidden=output.last_hidden[:b],
                              pooled=output.pooled[:b]),
                EncoderOutput(hidden_seq=output.hidden_seq[b:],
                              last_hidden=output.last_hidden[b:],
                              pooled=output.pooled[b:]))

    online_x, online_y = split(online_out)
    return BYOLForward(loss=loss, online_x=online_x, online_y=online_y)


def ema_update(state: BYOLState):
    """tau * target + (1 - tau) * online, element-wise, for every target
    parameter and batch-norm running statistic."""
    tau = state.tau
    pairs = zip(("online_encoder", "online_projector"),
                ("target_encoder", "target_projector"))
    for online_name, target_name in pairs:
        online = getattr(state, online_name)
        target = getattr(state, target_name)
        o_params = dict(online.named_params())
        for name, t_param in target.named_params():
            o = o_params[name]
            if o.data.shape != t_param.data.shape:
                raise StructureError(f"EMA shape mismatch at {name}")
            t_param.data = tau * t_param.data + (1.0 - tau) * o.data
        o_bufs = dict(online.named_buffers())
        for name, t_buf in target.named_buffers():
            np.copyto(t_buf, tau * t_buf + (1.0 - tau) * o_bufs[name])
    return state


def stop_gradient_check(state: BYOLState) -> bool:
    """True iff no target parameter accumulated a gradient in the last
    backward pass."""
    for _, t in state.target_params().items():
        if t.grad is not None and np.any(t.grad != 0):
            return False
    return True
