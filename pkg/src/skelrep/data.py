"""Datasets: synthetic skeleton-action generation, NTU .skeleton file
ingestion, dataset persistence and embedding export.

The synthetic generator builds class-parameterized sinusoidal motion on a
rest pose.  Per-sample nuisances (view rotation, global phase, speed,
noise) make the classes non-trivial to separate from raw coordinates
while keeping them recoverable by a representation that is invariant to
those nuisances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .augment import resize_frames, rotation_matrix
from .encoder import Encoder
from .errors import ConfigError, DataError, ParseError, StructureError
from .skeleton import (
    SkeletonSequence,
    STICK_FIGURE_REST,
    derive_bone,
    derive_motion,
    graph_from_dict,
    graph_to_dict,
    stick_figure_graph,
)


@dataclass
class SkeletonDataset:
    """Column storage for a labeled set of equally-shaped sequences."""

    coords: np.ndarray          # (S, F, N, 3)
    labels: np.ndarray          # (S,), -1 marks unlabeled
    graph: SkeletonGraph
    sample_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.coords = np.asarray(self.coords)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.coords.ndim != 4 or self.coords.shape[3] != 3:
            raise StructureError(f"coords must be (S, F, N, 3), got {self.coords.shape}")
        if self.coords.shape[2] != self.graph.joint_count:
            raise StructureError("joint count does not match the graph")
        if len(self.labels) != len(self.coords):
            raise StructureError("labels and coords disagree on sample count")
        if not self.sample_ids:
            self.sample_ids = [f"s{idx:05d}" for idx in range(len(self.coords))]

    def __len__(self):
        return len(self.coords)

    def __getitem__(self, idx) -> SkeletonSequence:
        label = int(self.labels[idx])
        return SkeletonSequence(self.coords[idx],
                                label=None if label < 0 else label,
                                meta={"id": self.sample_ids[idx]})

    @property
    def frames(self):
        return self.coords.shape[1]

    def class_count(self):
        present = self.labels[self.labels >= 0]
        return int(present.max()) + 1 if present.size else 0

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return SkeletonDataset(self.coords[indices], self.labels[indices],
                               self.graph,
                               [self.sample_ids[i] for i in indices])

    def with_coords(self, coords):
        return SkeletonDataset(coords, self.labels, self.graph, list(self.sample_ids))

    def map_modality(self, modality):
        """Derive the bone or motion stream for every sample."""
        if modality == "joint":
            return self
        out = np.empty_like(self.coords)
        for i in range(len(self)):
            seq = SkeletonSequence(self.coords[i])
            if modality == "bone":
                out[i] = derive_bone(seq, self.graph).coords
            elif modality == "motion":
                out[i] = derive_motion(seq).coords
            else:
                raise ConfigError(f"unknown modality {modality!r}")
        return self.with_coords(out)

    def resample(self, frames):
        if self.frames == frames:
            return self
        out = np.empty((len(self), frames) + self.coords.shape[2:],
                       dtype=self.coords.dtype)
        for i in range(len(self)):
            out[i] = resize_frames(self.coords[i], frames)
        return self.with_coords(out)


# -- synthetic generation ------------------------------------------------------


@dataclass
class ClassMotion:
    freqs: tuple                # cycles per clip, one per harmonic
    amps: np.ndarray            # (H, N, 3)
    phases: np.ndarray          # (H, N, 3)

    def signature(self):
        return (tuple(round(float(f), 9) for f in self.freqs),
                tuple(np.round(self.amps, 9).ravel()))


def _derive_class_motions(rng, class_count, joint_count):
    """Class signatures are chosen to survive the training augmentations:
    which joints co-move, their relative phases and the harmonic balance
    are invariant to rotation, shear and temporal crop-resize, while the
    absolute tempo (which crop-resize rescales) barely separates classes."""
    motions = []
    for k in range(class_count):
        freqs = (1.3 + 0.08 * k + rng.uniform(-0.02, 0.02),
                 2.6 + 0.16 * k + rng.uniform(-0.02, 0.02))
        amps = np.zeros((2, joint_count, 3))
        phases = np.zeros((2, joint_count, 3))
        for h in range(2):
            moving = rng.choice(joint_count, size=max(2, joint_count // 2),
                                replace=False)
            # coherent linear oscillation per joint: one direction, one phase
            direction = rng.normal(size=(len(moving), 3))
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            magnitude = rng.uniform(0.12, 0.32, size=(len(moving), 1))
            amps[h, moving] = direction * magnitude
            phases[h, moving] = rng.uniform(0.0, 2 * np.pi, size=(len(moving), 1))
        motions.append(ClassMotion(freqs=freqs, amps=amps, phases=phases))
    return motions


@dataclass
class SyntheticActionSpec:
    class_count: int = 5
    samples_per_class: int = 100
    frame_count: int = 50
    graph: SkeletonGraph = field(default_factory=stick_figure_graph)
    class_motions: list | None = None
    noise_sigma: float = 0.02
    #: per-sample rigid view change: yaw about the vertical axis ...
    view_rotation_deg: float = 60.0
    #: ... plus a camera tilt about a random horizontal axis
    view_tilt_deg: float = 20.0
    #: per-sample frequency multiplier drawn from U(1-j, 1+j)
    speed_jitter: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.class_count < 2:
            raise ConfigError("need at least 2 classes")
        if self.samples_per_class < 1 or self.frame_count < 1:
            raise ConfigError("samples_per_class and frame_count must be positive")
        if self.class_motions is None:
            rng = np.random.default_rng(np.random.SeedSequence((self.seed, 0xC1A55)))
            self.class_motions = _derive_class_motions(rng, self.class_count,
                                                       self.graph.joint_count)
        if len(self.class_motions) != self.class_count:
            raise ConfigError("one ClassMotion per class required")
        signatures = [m.signature() for m in self.class_motions]
        if len({s for s in signatures}) != len(signatures):
            raise ConfigError("classes must have distinct frequency/amplitude tuples")

    def rest_pose(self):
        if self.graph.joint_count == STICK_FIGURE_REST.shape[0]:
            return STICK_FIGURE_REST.copy()
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, 0x9E57)))
        return rng.uniform(-0.5, 0.5, size=(self.graph.joint_count, 3))


def generate_synthetic(spec: SyntheticActionSpec) -> SkeletonDataset:
    """Deterministic labeled dataset: class_count * samples_per_class clips."""
    rest = spec.rest_pose()
    f, n = spec.frame_count, spec.graph.joint_count
    t = np.arange(f)[:, None, None] / f
    total = spec.class_count * spec.samples_per_class
    coords = np.empty((total, f, n, 3), dtype=np.float32)
    labels = np.empty(total, dtype=np.int64)
    ids = []
    idx = 0
    for k, motion in enumerate(spec.class_motions):
        for s in range(spec.samples_per_class):
            rng = np.random.default_rng(
                np.random.SeedSequence((spec.seed, 0x5A3B, k, s)))
            speed = rng.uniform(1.0 - spec.speed_jitter, 1.0 + spec.speed_jitter)
            psi = rng.uniform(0.0, 2 * np.pi)
            wave = np.zeros((f, n, 3))
            for freq, amp, phase in zip(motion.freqs, motion.amps, motion.phases):
                wave += amp * np.sin(2 * np.pi * freq * speed * t + phase + psi)
            pose = rest + wave
            if spec.view_rotation_deg > 0 or spec.view_tilt_deg > 0:
                yaw = np.deg2rad(rng.uniform(-spec.view_rotation_deg,
                                             spec.view_rotation_deg))
                azimuth = rng.uniform(0.0, 2 * np.pi)
                tilt_axis = np.array([np.cos(azimuth), np.sin(azimuth), 0.0])
                tilt = np.deg2rad(rng.uniform(-spec.view_tilt_deg,
                                              spec.view_tilt_deg))
                view = rotation_matrix(tilt_axis, tilt) @ rotation_matrix(
                    np.array([0.0, 0.0, 1.0]), yaw)
                pose = pose @ view.T
            if spec.noise_sigma > 0:
                pose = pose + rng.normal(0.0, spec.noise_sigma, size=pose.shape)
            coords[idx] = pose
            labels[idx] = k
            ids.append(f"c{k}_{s:04d}")
            idx += 1
    return SkeletonDataset(coords, labels, spec.graph, ids)


def make_benchmark(class_count=5, train_per_class=100, test_per_class=50,
                   frame_count=50, seed=0, **spec_overrides):
    """Train/test pair sharing one set of class motion parameters."""
    spec = SyntheticActionSpec(class_count=class_count,
                               samples_per_class=train_per_class + test_per_class,
                               frame_count=frame_count, seed=seed,
                               **spec_overrides)
    full = generate_synthetic(spec)
    per = train_per_class + test_per_class
    train_idx, test_idx = [], []
    for k in range(class_count):
        base = k * per
        train_idx.extend(range(base, base + train_per_class))
        test_idx.extend(range(base + train_per_class, base + per))
    return full.subset(train_idx), full.subset(test_idx)


# -- dataset persistence ----------------------------------------------------------


def save_dataset(ds: SkeletonDataset, path):
    np.savez_compressed(path, coords=ds.coords, labels=ds.labels,
                        sample_ids=np.array(ds.sample_ids),
                        graph=json.dumps(graph_to_dict(ds.graph)))
    return path


def load_dataset(path) -> SkeletonDataset:
    try:
        with np.load(path, allow_pickle=False) as bundle:
            graph = graph_from_dict(json.loads(str(bundle["graph"])))
            return SkeletonDataset(bundle["coords"], bundle["labels"], graph,
                                   [str(s) for s in bundle["sample_ids"]])
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load dataset {path}: {exc}") from exc


# -- NTU RGB+D .skeleton text format ---------------------------------------------


class _LineReader:
    def __init__(self, fh):
        self.fh = fh
        self.line_no = 0

    def next_fields(self, what):
        line = self.fh.readline()
        if not line:
            raise ParseError(f"unexpected end of file while reading {what}",
                             line=self.line_no + 1)
        self.line_no += 1
        return line.split()

    def next_int(self, what):
        fields = self.next_fields(what)
        try:
            return int(fields[0])
        except (ValueError, IndexError):
            raise ParseError(f"expected integer {what}", line=self.line_no)

    def next_floats(self, count, what):
        fields = self.next_fields(what)
        if len(fields) < count:
            raise ParseError(f"expected {count} fields for {what}, got {len(fields)}",
                             line=self.line_no)
        try:
            return [float(v) for v in fields[:count]]
        except ValueError:
            raise ParseError(f"malformed float in {what}", line=self.line_no)


def load_ntu_skeleton(path) -> SkeletonSequence:
    """Parse the community .skeleton text layout; keeps the first body of
    each frame and drops frames with no body at all."""
    with open(path) as fh:
        reader = _LineReader(fh)
        frame_count = reader.next_int("frame count")
        if frame_count < 1:
            raise DataError(f"{path}: no frames")
        frames = []
        for _ in range(frame_count):
            body_count = reader.next_int("body count")
            first_body = None
            for b in range(body_count):
                reader.next_fields("body info")
                joint_count = reader.next_int("joint count")
                joints = np.empty((joint_count, 3))
                for j in range(joint_count):
                    values = reader.next_floats(3, f"joint {j}")
                    joints[j] = values
                if b == 0:
                    first_body = joints
            if first_body is not None:
                frames.append(first_body)
        if not frames:
            raise DataError(f"{path}: zero bodies in all frames")
        return SkeletonSequence(np.stack(frames), meta={"path": str(path)})


def save_ntu_skeleton(seq: SkeletonSequence, path):
    """Writer counterpart of load_ntu_skeleton (one body per frame); float
    repr formatting makes the round trip exact."""
    with open(path, "w") as fh:
        fh.write(f"{seq.frames}\n")
        for t in range(seq.frames):
            fh.write("1\n")
            fh.write("0 0 0 0 0 0 0 0 0 2\n")
            fh.write(f"{seq.joints}\n")
            for j in range(seq.joints):
                x, y, z = (repr(float(v)) for v in seq.coords[t, j])
                fh.write(f"{x} {y} {z} 0 0 0 0 0 0 0 0 2\n")
    return path


# -- embedding export ---------------------------------------------------------------


def export_embeddings(encoder: Encoder, ds: SkeletonDataset, path,
                      batch_size=128) -> int:
    """One CSV row per sample: id, label, embedding floats; returns row count."""
    dim = encoder.config.feature_dim
    target_frames = encoder.config.expected_frames
    if target_frames is not None:
        ds = ds.resample(target_frames)
    with open(path, "w", newline="") as fh:
        fh.write("id,label," + ",".join(f"e{i}" for i in range(dim)) + "\n")
        from .encoder import embed_batch
        for start in range(0, len(ds), batch_size):
            chunk = ds.coords[start:start + batch_size]
            pooled = embed_batch(encoder, chunk)
            for row, emb in enumerate(pooled):
                idx = start + row
                values = ",".join(repr(float(v)) for v in emb)
                fh.write(f"{ds.sample_ids[idx]},{int(ds.labels[idx])},{values}\n")
    return len(ds)
