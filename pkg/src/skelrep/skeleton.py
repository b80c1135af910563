"""Skeleton topology, sequences, adjacency normalization and modality streams.

Everything here is plain numpy over immutable inputs; all functions are
pure and thread-safe.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import StructureError

PARTITION_STRATEGIES = ("uniform", "distance", "spatial")


@dataclass(frozen=True)
class SkeletonGraph:
    """Joint topology of a single skeleton.

    `center_joint` is the gravity-center joint used both for spatial
    partitioning and as the root of the bone-stream spanning tree.
    """

    joint_count: int
    edges: tuple
    center_joint: int = 0
    partition_strategy: str = "spatial"

    def __post_init__(self):
        n = self.joint_count
        if n < 1:
            raise StructureError("joint_count must be positive")
        norm = []
        seen = set()
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            if not (0 <= i < n and 0 <= j < n):
                raise StructureError(f"edge ({i},{j}) endpoint out of range [0,{n})")
            if i == j:
                raise StructureError(f"self-loop edge at joint {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise StructureError(f"duplicate edge {key}")
            seen.add(key)
            norm.append(key)
        object.__setattr__(self, "edges", tuple(norm))
        if not (0 <= self.center_joint < n):
            raise StructureError("center_joint out of range")
        if self.partition_strategy not in PARTITION_STRATEGIES:
            raise StructureError(f"unknown partition strategy {self.partition_strategy!r}")
        if np.any(self.hop_distance() < 0):
            raise StructureError("graph is not connected")

    def adjacency(self):
        """Symmetric 0/1 adjacency without self loops, shape (N, N)."""
        a = np.zeros((self.joint_count, self.joint_count))
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a

    def neighbors(self):
        out = [[] for _ in range(self.joint_count)]
        for i, j in self.edges:
            out[i].append(j)
            out[j].append(i)
        return [sorted(v) for v in out]

    def hop_distance(self):
        """BFS hop count from every joint to the center joint (-1: unreachable)."""
        dist = np.full(self.joint_count, -1, dtype=int)
        dist[self.center_joint] = 0
        nb = self.neighbors()
        q = deque([self.center_joint])
        while q:
            u = q.popleft()
            for v in nb[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    q.append(v)
        return dist

    def spanning_parents(self):
        """Parent of each joint in the BFS spanning tree rooted at the center.

        The root's parent is -1.  Neighbor order is sorted, so the tree is
        deterministic for a given edge set.
        """
        parent = np.full(self.joint_count, -1, dtype=int)
        seen = np.zeros(self.joint_count, dtype=bool)
        seen[self.center_joint] = True
        nb = self.neighbors()
        q = deque([self.center_joint])
        while q:
            u = q.popleft()
            for v in nb[u]:
                if not seen[v]:
                    seen[v] = True
                    parent[v] = u
                    q.append(v)
        return parent


@dataclass
class SkeletonSequence:
    """A skeleton clip: coords has shape (frames, joints, 3)."""

    coords: np.ndarray
    label: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coords = np.asarray(self.coords)
        if self.coords.ndim != 3 or self.coords.shape[2] != 3:
            raise StructureError(f"coords must be (F, N, 3), got {self.coords.shape}")
        if self.coords.shape[0] < 1:
            raise StructureError("sequence needs at least one frame")
        if not np.all(np.isfinite(self.coords)):
            raise StructureError("coords contain non-finite values")

    @property
    def frames(self):
        return self.coords.shape[0]

    @property
    def joints(self):
        return self.coords.shape[1]

    def with_coords(self, coords):
        return SkeletonSequence(coords, label=self.label, meta=self.meta)


@dataclass(frozen=True)
class PartitionedAdjacency:
    """Normalized adjacency split into partition subsets.

    matrices[k][i, j] is the weight with which joint j contributes to
    joint i's aggregation.  The subsets tile the symmetric normalization
    of (A + I): summed over k they reproduce it exactly.
    """

    matrices: tuple
    strategy: str

    def __post_init__(self):
        for m in self.matrices:
            if np.any(m < 0):
                raise StructureError("adjacency partitions must be non-negative")

    @property
    def joint_count(self):
        return self.matrices[0].shape[0]

    def total(self):
        return sum(self.matrices)


def normalized_adjacency(graph: SkeletonGraph):
    """Symmetric normalization D^{-1/2} (A + I) D^{-1/2}, degrees from A + I."""
    a_hat = graph.adjacency() + np.eye(graph.joint_count)
    d_inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return d_inv_sqrt[:, None] * a_hat * d_inv_sqrt[None, :]


def build_partitioned_adjacency(graph: SkeletonGraph) -> PartitionedAdjacency:
    """Normalize (A + I) and split it per the graph's partition strategy.

    uniform: one subset (the whole normalized matrix).
    distance: self-connections vs. one-hop neighbors.
    spatial: root (equal hop distance to center, incl. self), centripetal
    (source closer to center) and centrifugal (source farther).
    """
    norm = normalized_adjacency(graph)
    strategy = graph.partition_strategy
    if strategy == "uniform":
        mats = (norm,)
    elif strategy == "distance":
        eye = np.eye(graph.joint_count, dtype=bool)
        mats = (np.where(eye, norm, 0.0), np.where(eye, 0.0, norm))
    else:
        hops = graph.hop_distance()
        # entry (i, j): receiver i, sender j
        equal = hops[None, :] == hops[:, None]
        closer = hops[None, :] < hops[:, None]
        mats = (
            np.where(equal, norm, 0.0),
            np.where(closer, norm, 0.0),
            np.where(~equal & ~closer, norm, 0.0),
        )
    return PartitionedAdjacency(matrices=tuple(m.copy() for m in mats), strategy=strategy)


def derive_bone(seq: SkeletonSequence, graph: SkeletonGraph) -> SkeletonSequence:
    """Bone stream: each joint minus its spanning-tree parent; root stays zero."""
    parent = graph.spanning_parents()
    out = np.zeros_like(seq.coords)
    child = parent >= 0
    out[:, child] = seq.coords[:, child] - seq.coords[:, parent[child]]
    return seq.with_coords(out)


def derive_motion(seq: SkeletonSequence) -> SkeletonSequence:
    """Motion stream: forward frame difference, zero-padded at the last frame."""
    out = np.zeros_like(seq.coords)
    out[:-1] = seq.coords[1:] - seq.coords[:-1]
    return seq.with_coords(out)


def reverse(seq: SkeletonSequence) -> SkeletonSequence:
    """Reverse the frame order (an involution)."""
    return seq.with_coords(seq.coords[::-1].copy())


def graph_to_dict(graph: SkeletonGraph) -> dict:
    return {"joint_count": graph.joint_count,
            "edges": [list(e) for e in graph.edges],
            "center_joint": graph.center_joint,
            "partition_strategy": graph.partition_strategy}


def graph_from_dict(data: dict) -> SkeletonGraph:
    return SkeletonGraph(joint_count=int(data["joint_count"]),
                         edges=tuple(tuple(e) for e in data["edges"]),
                         center_joint=int(data["center_joint"]),
                         partition_strategy=data["partition_strategy"])


# -- ready-made topologies ----------------------------------------------------


def chain_graph(n, **kwargs):
    return SkeletonGraph(n, tuple((i, i + 1) for i in range(n - 1)), **kwargs)


def star_graph(n, **kwargs):
    """Hub at joint 0 with n-1 leaves."""
    kwargs.setdefault("center_joint", 0)
    return SkeletonGraph(n, tuple((0, i) for i in range(1, n)), **kwargs)


#: 10-joint stick figure used by the synthetic generator:
#: 0 pelvis, 1 chest, 2 head, 3-4 left arm, 5-6 right arm,
#: 7-8 left leg, 9 right leg.
STICK_FIGURE_EDGES = ((0, 1), (1, 2), (1, 3), (3, 4), (1, 5), (5, 6),
                      (0, 7), (7, 8), (0, 9))

STICK_FIGURE_REST = np.array([
    [0.0, 0.0, 1.0],     # pelvis
    [0.0, 0.0, 1.5],     # chest
    [0.0, 0.0, 1.8],     # head
    [-0.3, 0.0, 1.5],    # left elbow
    [-0.55, 0.0, 1.25],  # left hand
    [0.3, 0.0, 1.5],     # right elbow
    [0.55, 0.0, 1.25],   # right hand
    [-0.18, 0.0, 0.5],   # left knee
    [-0.2, 0.0, 0.0],    # left foot
    [0.18, 0.0, 0.45],   # right knee
])


def stick_figure_graph(**kwargs):
    kwargs.setdefault("center_joint", 0)
    return SkeletonGraph(10, STICK_FIGURE_EDGES, **kwargs)


#: Kinect-v2 25-joint topology used by the NTU RGB+D skeleton files
#: (1-based convention converted to 0-based); center is the spine joint 21.
NTU_EDGES_1BASED = ((1, 2), (2, 21), (3, 21), (4, 3), (5, 21), (6, 5),
                    (7, 6), (8, 7), (9, 21), (10, 9), (11, 10), (12, 11),
                    (13, 1), (14, 13), (15, 14), (16, 15), (17, 1), (18, 17),
                    (19, 18), (20, 19), (22, 23), (23, 8), (24, 25), (25, 12))


def ntu_rgbd_graph(**kwargs):
    edges = tuple((i - 1, j - 1) for i, j in NTU_EDGES_1BASED)
    kwargs.setdefault("center_joint", 20)
    return SkeletonGraph(25, edges, **kwargs)
