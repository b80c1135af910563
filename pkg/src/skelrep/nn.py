"""Parameterized layers used by the encoder, heads and decoder.

Arrays are channels-last throughout: sequences are (B, T, N, C) and
per-step features are (B, N, C).  The hot layers (affine, batch norm,
graph conv, temporal conv, GRU step) are single tape nodes with
hand-written backward closures so the recorded graphs stay small; every
backward is finite-difference tested.
"""

from __future__ import annotations

import numpy as np

from .errors import StructureError
from .tape import Tensor


class Module:
    """Base class: recursively exposes Tensor attributes as named parameters
    and registered arrays as named buffers (batch-norm running statistics)."""

    buffer_names = ()

    def _children(self):
        for key, value in vars(self).items():
            if isinstance(value, Module):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{key}.{i}", item

    def named_params(self, prefix=""):
        for key, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + key, value
        for key, child in self._children():
            yield from child.named_params(f"{prefix}{key}.")

    def named_buffers(self, prefix=""):
        for key in type(self).buffer_names:
            yield prefix + key, getattr(self, key)
        for key, child in self._children():
            yield from child.named_buffers(f"{prefix}{key}.")

    def param_dict(self):
        return dict(self.named_params())

    def state_dict(self):
        state = {name: t.data for name, t in self.named_params()}
        state.update(self.named_buffers())
        return state

    def load_state_dict(self, state):
        own = {name: t for name, t in self.named_params()}
        bufs = dict(self.named_buffers())
        expected = set(own) | set(bufs)
        if expected != set(state):
            missing = expected - set(state)
            extra = set(state) - expected
            raise StructureError(f"state mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, tensor in own.items():
            if tensor.data.shape != state[name].shape:
                raise StructureError(f"shape mismatch for {name}: "
                                     f"{tensor.data.shape} vs {state[name].shape}")
            tensor.data = state[name].astype(tensor.data.dtype, copy=True)
        for name, buf in bufs.items():
            if buf.shape != state[name].shape:
                raise StructureError(f"shape mismatch for buffer {name}")
            np.copyto(buf, state[name])

    def zero_grad(self):
        for _, t in self.named_params():
            t.grad = None

    def param_count(self):
        return sum(t.data.size for _, t in self.named_params())


def _uniform_init(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


# -- fused kernels ------------------------------------------------------------


def affine(x, weight, bias=None):
    """out = x @ W (+ b) over the last axis, one tape node."""
    c_in, c_out = weight.data.shape
    lead = x.data.shape[:-1]
    flat = x.data.reshape(-1, c_in)
    out = flat @ weight.data
    if bias is not None:
        out += bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        g2 = g.reshape(-1, c_out)
        gx = (g2 @ weight.data.T).reshape(x.data.shape)
        gw = flat.T @ g2
        if bias is None:
            return (gx, gw)
        return (gx, gw, g2.sum(axis=0))

    return Tensor._node(out.reshape(*lead, c_out), parents, backward)


def batchnorm_train(x, gamma, beta, eps):
    """Batch-stat normalization over all axes but the last, one tape node.

    Forward applies the equivalent per-channel affine (no normalized
    temporary); backward reconstructs xhat once from the saved statistics.
    """
    data = x.data
    c = data.shape[-1]
    flat = data.reshape(-1, c)
    count = flat.shape[0]
    mean = flat.mean(axis=0)
    sq = np.einsum("ij,ij->j", flat, flat, optimize=True) / count
    var = np.maximum(sq - mean * mean, 0.0)
    inv = 1.0 / np.sqrt(var + eps)
    scale = gamma.data * inv
    out = data * scale + (beta.data - mean * scale)

    def backward(g):
        g2 = g.reshape(-1, c)
        xhat = (flat - mean) * inv
        ggamma = np.einsum("ij,ij->j", g2, xhat, optimize=True)
        gbeta = g2.sum(axis=0)
        # d/dx of batch-stat normalization, folded per channel
        gx = scale / count * (count * g2 - gbeta - xhat * ggamma)
        return (gx.reshape(data.shape), ggamma, gbeta)

    node = Tensor._node(out, (x, gamma, beta), backward)
    return node, mean, var


def graph_conv(x, weight, edge_mask, adj):
    """Per-partition neighbor aggregation + fused 1x1 convolution.

    x: (..., N, C_in); weight: (K*C_in, C_out); edge_mask: (K, N, N) raw
    (applied as relu(mask) so the effective mask stays non-negative);
    adj: list of K constant (N, N) receiver-major matrices.
    """
    k = len(adj)
    n = adj[0].shape[0]
    c_in = x.data.shape[-1]
    c_out = weight.data.shape[1]
    lead = x.data.shape[:-2]
    size = int(np.prod(lead)) if lead else 1
    mask_on = edge_mask.data > 0
    a_eff = [adj[p] * np.where(mask_on[p], edge_mask.data[p], 0.0) for p in range(k)]

    u = x.data.reshape(size, n, c_in)
    agg = [np.matmul(a_eff[p], u) for p in range(k)]        # (size, N, C_in) each
    out = np.zeros((size * n, c_out), dtype=x.data.dtype)
    for p in range(k):
        out += agg[p].reshape(size * n, c_in) @ weight.data[p * c_in:(p + 1) * c_in]

    def backward(g):
        g2 = np.ascontiguousarray(g).reshape(size * n, c_out)
        gw = np.empty_like(weight.data)
        gu = np.zeros_like(u)
        gmask = np.zeros_like(edge_mask.data)
        for p in range(k):
            w_p = weight.data[p * c_in:(p + 1) * c_in]
            gw[p * c_in:(p + 1) * c_in] = agg[p].reshape(size * n, c_in).T @ g2
            g_agg = (g2 @ w_p.T).reshape(size, n, c_in)
            gu += np.matmul(a_eff[p].T, g_agg)
            ga = np.einsum("lic,ljc->ij", g_agg, u, optimize=True)
            gmask[p] = ga * adj[p] * mask_on[p]
        return (gu.reshape(x.data.shape), gw, gmask)

    return Tensor._node(out.reshape(*lead, n, c_out), (x, weight, edge_mask), backward)


def gru_scan(u, h0, w_zr, w_cand):
    """Full GRU recurrence over a (B, T, N, 3C) input-projection sequence;
    one tape node covering the whole scan (hand-written BPTT backward).

    Returns the stacked hidden states (B, T, N, C); h0 is a constant array.
    """
    b, t, n, _ = u.data.shape
    c = h0.shape[-1]
    h = h0.reshape(-1, c)
    zs, rs, cands, hs = [], [], [], []
    h_prevs = []
    for step in range(t):
        u2 = u.data[:, step].reshape(-1, 3 * c)
        hv = h @ w_zr.data
        z = 0.5 * (1.0 + np.tanh(0.5 * (u2[:, :c] + hv[:, :c])))
        r = 0.5 * (1.0 + np.tanh(0.5 * (u2[:, c:2 * c] + hv[:, c:])))
        cand = np.tanh(u2[:, 2 * c:] + (r * h) @ w_cand.data)
        h_prevs.append(h)
        h = (1.0 - z) * h + z * cand
        zs.append(z)
        rs.append(r)
        cands.append(cand)
        hs.append(h.reshape(b, n, c))
    out = np.stack(hs, axis=1)

    def backward(g):
        gu = np.empty_like(u.data)
        gw_zr = np.zeros_like(w_zr.data)
        gw_cand = np.zeros_like(w_cand.data)
        gh_next = np.zeros((b * n, c), dtype=u.data.dtype)
        for step in range(t - 1, -1, -1):
            g2 = g[:, step].reshape(-1, c) + gh_next
            z, r, cand, h_prev = zs[step], rs[step], cands[step], h_prevs[step]
            gz = g2 * (cand - h_prev)
            gcand_pre = (g2 * z) * (1.0 - cand * cand)
            gh = g2 * (1.0 - z)
            grh = gcand_pre @ w_cand.data.T
            gw_cand += (r * h_prev).T @ gcand_pre
            gr = grh * h_prev
            gh += grh * r
            gz_pre = gz * z * (1.0 - z)
            gr_pre = gr * r * (1.0 - r)
            ghv = np.concatenate([gz_pre, gr_pre], axis=1)
            gh += ghv @ w_zr.data.T
            gw_zr += h_prev.T @ ghv
            gu[:, step] = np.concatenate(
                [gz_pre, gr_pre, gcand_pre], axis=1).reshape(b, n, 3 * c)
            gh_next = gh
        return (gu, gw_zr, gw_cand)

    return Tensor._node(out, (u, w_zr, w_cand), backward)


def temporal_conv(x, weight, kernel, stride):
    """Same-padded 1-D convolution along the frame axis of (B, T, N, C).

    Runs as one GEMM per tap accumulated in place, avoiding the kernel-fold
    im2col buffer.
    """
    b, t, n, c = x.data.shape
    c_out = weight.data.shape[1]
    pad = (kernel - 1) // 2
    xp = np.zeros((b, t + 2 * pad, n, c), dtype=x.data.dtype)
    xp[:, pad:pad + t] = x.data
    t_out = (t - 1) // stride + 1
    span = (t_out - 1) * stride + 1
    taps = [np.ascontiguousarray(xp[:, j:j + span:stride]).reshape(-1, c)
            for j in range(kernel)]
    out = np.zeros((b * t_out * n, c_out), dtype=x.data.dtype)
    for j, tap in enumerate(taps):
        out += tap @ weight.data[j * c:(j + 1) * c]

    def backward(g):
        g2 = np.ascontiguousarray(g).reshape(-1, c_out)
        gw = np.empty_like(weight.data)
        gxp = np.zeros_like(xp)
        for j, tap in enumerate(taps):
            w_j = weight.data[j * c:(j + 1) * c]
            gw[j * c:(j + 1) * c] = tap.T @ g2
            gxp[:, j:j + span:stride] += (g2 @ w_j.T).reshape(b, t_out, n, c)
        return (gxp[:, pad:pad + t], gw)

    return Tensor._node(out.reshape(b, t_out, n, c_out), (x, weight), backward)


def gru_gates(u, h, w_zr, w_cand):
    """One GRU recurrence given the precomputed input projection u
    (B, N, 3C: update | reset | candidate blocks), all in one tape node.

    h' = (1 - z) * h + z * tanh(u_h + V_h (r * h)),
    z = sigmoid(u_z + V_z h), r = sigmoid(u_r + V_r h).
    """
    c = h.data.shape[-1]
    lead = h.data.shape[:-1]
    h2 = h.data.reshape(-1, c)
    hv = h2 @ w_zr.data                       # (.., 2C)
    u2 = u.data.reshape(-1, 3 * c)
    z = 0.5 * (1.0 + np.tanh(0.5 * (u2[:, :c] + hv[:, :c])))
    r = 0.5 * (1.0 + np.tanh(0.5 * (u2[:, c:2 * c] + hv[:, c:])))
    rh = r * h2
    cand = np.tanh(u2[:, 2 * c:] + rh @ w_cand.data)
    out = (1.0 - z) * h2 + z * cand

    def backward(g):
        g2 = g.reshape(-1, c)
        gz = g2 * (cand - h2)
        gcand_pre = (g2 * z) * (1.0 - cand * cand)
        gh = g2 * (1.0 - z)
        grh = gcand_pre @ w_cand.data.T
        gw_cand = rh.T @ gcand_pre
        gr = grh * h2
        gh += grh * r
        gz_pre = gz * z * (1.0 - z)
        gr_pre = gr * r * (1.0 - r)
        ghv = np.concatenate([gz_pre, gr_pre], axis=1)
        gh += ghv @ w_zr.data.T
        gw_zr = h2.T @ ghv
        gu = np.concatenate([gz_pre, gr_pre, gcand_pre], axis=1)
        return (gu.reshape(u.data.shape), gh.reshape(h.data.shape),
                gw_zr, gw_cand)

    return Tensor._node(out.reshape(*lead, c), (u, h, w_zr, w_cand), backward)


# -- layers -----------------------------------------------------------------------


class Linear(Module):
    """Affine map over the last axis (a 1x1 convolution in sequence layouts)."""

    def __init__(self, c_in, c_out, rng, dtype=np.float32, bias=True):
        self.weight = Tensor(_uniform_init(rng, (c_in, c_out), c_in, dtype),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True) if bias else None

    def __call__(self, x):
        return affine(x, self.weight, self.bias)


class BatchNorm(Module):
    """Batch normalization over every axis except the channel (last) axis.

    Training mode normalizes with batch statistics; evaluation uses the
    running averages (momentum 0.1).  `update_stats=False` lets the target
    network run in training mode without touching its buffers (those are
    maintained by the EMA).
    """

    buffer_names = ("run_mean", "run_var")

    def __init__(self, channels, dtype=np.float32, eps=1e-5, momentum=0.1):
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.run_mean = np.zeros(channels, dtype=dtype)
        self.run_var = np.ones(channels, dtype=dtype)
        self.eps = eps
        self.momentum = momentum

    def __call__(self, x, train, update_stats=True):
        if train:
            out, mean, var = batchnorm_train(x, self.gamma, self.beta, self.eps)
            if update_stats:
                m = self.momentum
                self.run_mean += m * (mean.astype(self.run_mean.dtype) - self.run_mean)
                self.run_var += m * (var.astype(self.run_var.dtype) - self.run_var)
            return out
        inv = 1.0 / np.sqrt(self.run_var + self.eps)
        scale = self.gamma * inv
        shift = self.beta - self.gamma * (self.run_mean * inv)
        return x * scale + shift


class SpatialGraphConv(Module):
    """Graph convolution: per-partition neighbor aggregation followed by a
    fused per-partition 1x1 convolution.

    Each partition matrix is modulated by a learnable mask; the applied
    mask is relu(raw) so it stays non-negative while remaining trainable
    (raw starts at all-ones).
    """

    def __init__(self, c_in, c_out, adjacency, rng, dtype=np.float32, bias=True,
                 gain=1.0):
        k = len(adjacency.matrices)
        n = adjacency.joint_count
        self.adj = [m.astype(dtype) for m in adjacency.matrices]
        weight = _uniform_init(rng, (k * c_in, c_out), k * c_in, dtype)
        if gain != 1.0:
            weight = (weight * gain).astype(dtype)
        self.weight = Tensor(weight, requires_grad=True)
        self.bias = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True) if bias else None
        self.edge_mask = Tensor(np.ones((k, n, n), dtype=dtype), requires_grad=True)
        self.c_in = c_in
        self.c_out = c_out

    def __call__(self, x):
        if x.shape[-1] != self.c_in:
            raise StructureError(f"expected {self.c_in} channels, got {x.shape[-1]}")
        if x.shape[-2] != self.adj[0].shape[0]:
            raise StructureError(
                f"expected {self.adj[0].shape[0]} joints, got {x.shape[-2]}")
        out = graph_conv(x, self.weight, self.edge_mask, self.adj)
        if self.bias is not None:
            out = out + self.bias
        return out


class TemporalConv(Module):
    """1-D convolution along the frame axis, independently per joint, with
    same padding; stride 2 halves the frame count (ceil division)."""

    def __init__(self, c_in, c_out, rng, kernel=9, stride=1, dtype=np.float32, bias=True):
        assert kernel % 2 == 1, "same padding assumes an odd kernel"
        self.weight = Tensor(_uniform_init(rng, (kernel * c_in, c_out), kernel * c_in, dtype),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True) if bias else None
        self.kernel = kernel
        self.stride = stride
        self.c_in = c_in
        self.c_out = c_out

    def out_frames(self, t):
        return (t - 1) // self.stride + 1

    def __call__(self, x):
        if x.shape[-1] != self.c_in:
            raise StructureError(f"expected {self.c_in} channels, got {x.shape[-1]}")
        out = temporal_conv(x, self.weight, self.kernel, self.stride)
        if self.bias is not None:
            out = out + self.bias
        return out


class MLPHead(Module):
    """Projector/predictor: Linear -> BatchNorm -> ReLU -> Linear."""

    def __init__(self, c_in, hidden, c_out, rng, dtype=np.float32):
        self.fc1 = Linear(c_in, hidden, rng, dtype)
        self.bn = BatchNorm(hidden, dtype)
        self.fc2 = Linear(hidden, c_out, rng, dtype)

    def __call__(self, x, train, update_stats=True):
        h = self.bn(self.fc1(x), train, update_stats).relu()
        return self.fc2(h)
