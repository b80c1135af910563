"""Learning-rate schedule and optimizers (LARS and momentum SGD).

The schedule ramps linearly from 0 to the peak over the warmup epochs and
follows a cosine from the peak down to the final value afterwards; both
branches meet at the peak, so it is continuous at the junction.
"""

from __future__ import annotations

import numpy as np

from .errors import TrainingFault


def lr_schedule(epoch, cfg):
    """Learning rate at a (possibly fractional) epoch."""
    warmup, total = cfg.warmup_epochs, cfg.epochs
    if epoch <= warmup:
        return cfg.peak_lr * epoch / warmup
    span = (epoch - warmup) / (total - warmup)
    return cfg.final_lr + 0.5 * (cfg.peak_lr - cfg.final_lr) * (1.0 + np.cos(np.pi * span))


def _check_finite(name, grad):
    if not np.all(np.isfinite(grad)):
        bad = int(np.count_nonzero(~np.isfinite(grad)))
        raise TrainingFault(f"non-finite gradient in {name!r} ({bad} entries)")


class SGDMomentum:
    """Classic momentum update: m <- momentum*m + lr*(g + wd*p); p <- p - m.

    Parameters with ndim <= 1 (biases, norm scales/shifts) skip weight decay.
    """

    def __init__(self, momentum=0.9, weight_decay=0.0):
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.buffers = {}

    def step(self, params, lr):
        for name, p in params.items():
            if p.grad is None:
                continue
            _check_finite(name, p.grad)
            g = p.grad
            if self.weight_decay and p.data.ndim > 1:
                g = g + self.weight_decay * p.data
            buf = self.buffers.get(name)
            if buf is None:
                buf = np.zeros_like(p.data)
                self.buffers[name] = buf
            buf *= self.momentum
            buf += lr * g
            p.data = p.data - buf

    def state_arrays(self):
        return {f"momentum.{k}": v for k, v in self.buffers.items()}

    def load_state_arrays(self, arrays):
        self.buffers = {k[len("momentum."):]: v.copy()
                        for k, v in arrays.items() if k.startswith("momentum.")}


class LARS(SGDMomentum):
    """Layer-wise adaptive rate scaling.

    Per parameter: trust ratio eta = ||p|| / (||g|| + wd*||p|| + eps), update
    direction g + wd*p, momentum buffer advanced at the effective rate
    lr*eta.  Biases and norm parameters (ndim <= 1) are excluded from both
    weight decay and trust scaling (eta = 1), as is anything with ||p|| = 0.
    The trust coefficient scales the incoming rate globally (default 1,
    keeping the bare formula above); the training presets lower it so the
    published peak rates stay stable at desk scale.
    """

    def __init__(self, momentum=0.9, weight_decay=0.0, eps=1e-9,
                 trust_coefficient=1.0, trust_ratio_override=None):
        super().__init__(momentum, weight_decay)
        self.eps = eps
        self.trust_coefficient = trust_coefficient
        #: forcing eta (e.g. to 1.0) turns LARS into plain momentum SGD;
        #: kept for the equivalence check
        self.trust_ratio_override = trust_ratio_override

    def step(self, params, lr):
        lr = lr * self.trust_coefficient
        for name, p in params.items():
            if p.grad is None:
                continue
            _check_finite(name, p.grad)
            g = p.grad
            excluded = p.data.ndim <= 1
            if excluded:
                eta = 1.0
            else:
                p_norm = float(np.linalg.norm(p.data))
                g_norm = float(np.linalg.norm(g))
                if self.weight_decay:
                    g = g + self.weight_decay * p.data
                eta = (p_norm / (g_norm + self.weight_decay * p_norm + self.eps)
                       if p_norm > 0 else 1.0)
            if self.trust_ratio_override is not None:
                eta = self.trust_ratio_override
            buf = self.buffers.get(name)
            if buf is None:
                buf = np.zeros_like(p.data)
                self.buffers[name] = buf
            buf *= self.momentum
            buf += (lr * eta) * g
            p.data = p.data - buf


def make_optimizer(cfg):
    if cfg.optimizer == "lars":
        return LARS(momentum=cfg.momentum, weight_decay=cfg.weight_decay,
                    trust_coefficient=cfg.trust_coefficient)
    if cfg.optimizer == "sgd_momentum":
        return SGDMomentum(momentum=cfg.momentum, weight_decay=cfg.weight_decay)
    from .errors import ConfigError
    raise ConfigError(f"unknown optimizer {cfg.optimizer!r}")
