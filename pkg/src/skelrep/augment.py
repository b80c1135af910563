"""Stochastic skeleton-sequence augmentation producing paired training views.

Each op takes an explicit numpy Generator, so identical (sequence, config,
rng state) triples reproduce bit-identical outputs and callers parallelize
by splitting seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .skeleton import SkeletonSequence

#: off-diagonal positions, in application order, of the elementary shears
_SHEAR_SLOTS = ((0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1))


@dataclass
class AugmentConfig:
    rotation_max_deg: float = 30.0
    jitter_sigma: float = 0.05
    jitter_joint_fraction: float = 0.15
    shear_magnitude: float = 0.5
    crop_min_fraction: float = 0.5
    out_frames: int = 50
    rng_seed: int = 0
    #: stage application order; "spatial" picks pose_augment or joint_jitter
    stage_order: tuple = ("spatial", "temporal", "rotation")

    def __post_init__(self):
        if not 0.0 < self.crop_min_fraction <= 1.0:
            raise ConfigError("crop_min_fraction must be in (0, 1]")
        if not 0.0 <= self.rotation_max_deg <= 180.0:
            raise ConfigError("rotation_max_deg must be in [0, 180]")
        if self.jitter_sigma < 0:
            raise ConfigError("jitter_sigma must be non-negative")
        if self.out_frames < 1:
            raise ConfigError("out_frames must be positive")
        if set(self.stage_order) != {"spatial", "temporal", "rotation"}:
            raise ConfigError("stage_order must permute spatial/temporal/rotation")


def identity_augment(out_frames=50, rng_seed=0):
    """Config whose pipeline is the identity on out_frames-long sequences."""
    return AugmentConfig(rotation_max_deg=0.0, jitter_sigma=0.0,
                         jitter_joint_fraction=0.0, shear_magnitude=0.0,
                         crop_min_fraction=1.0, out_frames=out_frames,
                         rng_seed=rng_seed)


def rotation_matrix(axis, angle_rad):
    """Rodrigues rotation about a unit axis."""
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle_rad) * k + (1.0 - np.cos(angle_rad)) * (k @ k)


def rotate_random(seq: SkeletonSequence, cfg: AugmentConfig, rng) -> SkeletonSequence:
    """Rotate every frame by one shared rotation: uniformly random unit axis,
    angle ~ U(-rotation_max_deg, +rotation_max_deg)."""
    axis = rng.normal(size=3)
    norm = np.linalg.norm(axis)
    while norm < 1e-12:
        axis = rng.normal(size=3)
        norm = np.linalg.norm(axis)
    axis = axis / norm
    angle = np.deg2rad(rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg))
    r = rotation_matrix(axis, angle)
    return seq.with_coords(seq.coords @ r.T)


def joint_jitter(seq: SkeletonSequence, cfg: AugmentConfig, rng) -> SkeletonSequence:
    """Add N(0, jitter_sigma^2) noise to a random subset of joints, all frames."""
    n = seq.joints
    count = int(np.ceil(cfg.jitter_joint_fraction * n))
    out = seq.coords.copy()
    if count > 0 and cfg.jitter_sigma > 0.0:
        picked = rng.choice(n, size=count, replace=False)
        out[:, picked] += rng.normal(0.0, cfg.jitter_sigma,
                                     size=(seq.frames, count, 3))
    return seq.with_coords(out)


def shear_matrix(offsets):
    """Ordered product of six elementary shears (one per off-diagonal slot).

    Each factor is unit-diagonal and triangular, so the product has
    determinant exactly 1 regardless of the drawn offsets.
    """
    m = np.eye(3)
    for (i, j), s in zip(_SHEAR_SLOTS, offsets):
        e = np.eye(3)
        e[i, j] = s
        m = m @ e
    return m


def pose_augment(seq: SkeletonSequence, cfg: AugmentConfig, rng) -> SkeletonSequence:
    """Apply one shared shear (offsets ~ U(-shear_magnitude, +shear_magnitude))
    to all joints and frames."""
    offsets = rng.uniform(-cfg.shear_magnitude, cfg.shear_magnitude, size=6)
    m = shear_matrix(offsets)
    return seq.with_coords(seq.coords @ m.T)


def resize_frames(coords, out_frames):
    """Linear per-joint per-axis interpolation to exactly out_frames frames.

    Sample positions hitting source frames exactly reproduce them bit-for-bit.
    """
    f = coords.shape[0]
    if f == 1:
        return np.repeat(coords, out_frames, axis=0)
    pos = np.linspace(0.0, f - 1.0, out_frames)
    lo = np.floor(pos).astype(int)
    lo = np.minimum(lo, f - 2)
    frac = (pos - lo)[:, None, None]
    return (1.0 - frac) * coords[lo] + frac * coords[lo + 1]


def temporal_crop_resize(seq: SkeletonSequence, cfg: AugmentConfig, rng) -> SkeletonSequence:
    """Crop a random sub-sequence of length >= ceil(crop_min_fraction * F)
    and resize it to out_frames frames."""
    f = seq.frames
    if f < 2:
        raise ValueError("temporal_crop_resize needs at least 2 frames")
    min_len = max(1, int(np.ceil(cfg.crop_min_fraction * f)))
    length = int(rng.integers(min_len, f + 1))
    start = int(rng.integers(0, f - length + 1))
    crop = seq.coords[start:start + length]
    return seq.with_coords(resize_frames(crop, cfg.out_frames))


def augment_view(seq: SkeletonSequence, cfg: AugmentConfig, rng) -> SkeletonSequence:
    """Full view pipeline; emits exactly cfg.out_frames frames and never
    touches the joint set or graph."""
    out = seq
    for stage in cfg.stage_order:
        if stage == "spatial":
            if rng.random() < 0.5:
                out = pose_augment(out, cfg, rng)
            else:
                out = joint_jitter(out, cfg, rng)
        elif stage == "temporal":
            out = temporal_crop_resize(out, cfg, rng)
        else:
            out = rotate_random(out, cfg, rng)
    assert out.frames == cfg.out_frames
    return out


def make_view_rng(seed, *stream):
    """Deterministic per-(run, epoch, sample, view) generator."""
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream)))
