"""Brute-force loop oracles shared by the unit and acceptance tests.

These intentionally mirror the math with explicit Python loops and stay
independent of the tape-based implementations they check.
"""

import numpy as np


def spatial_gconv_oracle(x, layer):
    """Triple-loop oracle over (partition, receiver, sender) joints."""
    mats = [np.maximum(layer.edge_mask.data[k], 0.0) * a
            for k, a in enumerate(layer.adj)]
    lead = x.shape[:-2]
    n, c_in = x.shape[-2], layer.c_in
    flat = x.reshape(-1, n, c_in)
    k = len(mats)
    gathered = np.zeros((flat.shape[0], n, k * c_in))
    for s in range(flat.shape[0]):
        for p in range(k):
            for i in range(n):
                for j in range(n):
                    gathered[s, i, p * c_in:(p + 1) * c_in] += mats[p][i, j] * flat[s, j]
    out = gathered @ layer.weight.data + layer.bias.data
    return out.reshape(*lead, n, layer.c_out)


def temporal_conv_oracle(x, layer):
    """Explicit sliding-window loop with zero padding."""
    b, t, n, c = x.shape
    pad = (layer.kernel - 1) // 2
    xp = np.zeros((b, t + 2 * pad, n, c))
    xp[:, pad:pad + t] = x
    t_out = layer.out_frames(t)
    out = np.zeros((b, t_out, n, layer.c_out))
    for s in range(b):
        for to in range(t_out):
            for j in range(layer.kernel):
                w = layer.weight.data[j * c:(j + 1) * c]
                out[s, to] += xp[s, to * layer.stride + j] @ w
    return out + layer.bias.data


def gru_step_oracle(x_t, h, gru):
    """Element-wise recurrence, joint by joint."""
    c = gru.c_h
    u_w, u_b = gru.input_proj.weight.data, gru.input_proj.bias.data
    vzr = gru.hidden_zr.weight.data
    vh = gru.hidden_cand.weight.data
    b, n, _ = x_t.shape
    out = np.zeros((b, n, c))
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    for s in range(b):
        for j in range(n):
            u = x_t[s, j] @ u_w + u_b
            v = h[s, j] @ vzr
            z = sig(u[:c] + v[:c])
            r = sig(u[c:2 * c] + v[c:])
            cand = np.tanh(u[2 * c:] + (r * h[s, j]) @ vh)
            out[s, j] = (1.0 - z) * h[s, j] + z * cand
    return out


def mlp_head_eval_oracle(x, head):
    """Projector/predictor chain in evaluation mode (running statistics)."""
    h = x @ head.fc1.weight.data + head.fc1.bias.data
    inv = 1.0 / np.sqrt(head.bn.run_var + head.bn.eps)
    h = (h - head.bn.run_mean) * inv * head.bn.gamma.data + head.bn.beta.data
    h = np.maximum(h, 0.0)
    return h @ head.fc2.weight.data + head.fc2.bias.data


def decode_oracle(last_hidden, frames, decoder, reversed_target=None,
                  teacher_forcing=False):
    """Step-by-step decoder recurrence using the layer oracles."""
    b, n, _ = last_hidden.shape
    if decoder.bridge is not None:
        h = last_hidden @ decoder.bridge.weight.data + decoder.bridge.bias.data
    else:
        h = last_hidden
    prev = np.broadcast_to(decoder.seed_skeleton.data, (b, n, 3)).copy()
    outputs = []
    for t in range(frames):
        d = spatial_gconv_oracle(prev, decoder.input_gcn)
        h = gru_step_oracle(d, h, decoder.gru)
        s = spatial_gconv_oracle(h, decoder.gru.out_gconv)
        frame = s @ decoder.out_conv.weight.data + decoder.out_conv.bias.data
        outputs.append(frame)
        prev = reversed_target[:, t].copy() if teacher_forcing else frame
    return np.stack(outputs, axis=1)
