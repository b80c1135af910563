import numpy as np
import numpy.testing as npt
import pytest

from skelrep.errors import StructureError
from skelrep.skeleton import (
    PartitionedAdjacency,
    SkeletonGraph,
    SkeletonSequence,
    build_partitioned_adjacency,
    chain_graph,
    derive_bone,
    derive_motion,
    normalized_adjacency,
    ntu_rgbd_graph,
    reverse,
    star_graph,
    stick_figure_graph,
)


def brute_force_normalization(n, edges):
    """Independent oracle: explicit loops for D^{-1/2} (A+I) D^{-1/2}."""
    a = [[0.0] * n for _ in range(n)]
    for i, j in edges:
        a[i][j] = 1.0
        a[j][i] = 1.0
    for i in range(n):
        a[i][i] += 1.0
    deg = [sum(row) for row in a]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = a[i][j] / np.sqrt(deg[i]) / np.sqrt(deg[j])
    return out


def random_connected_graph(rng, n):
    edges = [(int(rng.integers(0, i)), i) for i in range(1, n)]  # random tree
    extra = rng.integers(0, n)
    while extra:
        i, j = rng.integers(0, n, size=2)
        if i != j and (min(i, j), max(i, j)) not in [tuple(sorted(e)) for e in edges]:
            edges.append((int(min(i, j)), int(max(i, j))))
            extra -= 1
    return SkeletonGraph(n, tuple(edges), center_joint=int(rng.integers(0, n)))


# -- graph validation ----------------------------------------------------------


def test_graph_rejects_bad_edges():
    with pytest.raises(StructureError):
        SkeletonGraph(3, ((0, 3),))
    with pytest.raises(StructureError):
        SkeletonGraph(3, ((1, 1), (0, 1)))
    with pytest.raises(StructureError):
        SkeletonGraph(3, ((0, 1), (1, 0), (1, 2)))
    with pytest.raises(StructureError):
        SkeletonGraph(3, ((0, 1), (1, 2)), center_joint=5)


def test_graph_rejects_disconnected():
    with pytest.raises(StructureError):
        SkeletonGraph(4, ((0, 1), (2, 3)))


def test_ntu_graph_is_a_connected_tree():
    g = ntu_rgbd_graph()
    assert g.joint_count == 25 and len(g.edges) == 24
    assert np.all(g.hop_distance() >= 0)


# -- adjacency normalization & partitioning ------------------------------------


def test_single_node_uniform():
    g = SkeletonGraph(1, (), partition_strategy="uniform")
    parts = build_partitioned_adjacency(g)
    assert len(parts.matrices) == 1
    npt.assert_allclose(parts.matrices[0], [[1.0]])


def test_two_node_chain_uniform():
    g = chain_graph(2, partition_strategy="uniform")
    parts = build_partitioned_adjacency(g)
    npt.assert_allclose(parts.matrices[0], [[0.5, 0.5], [0.5, 0.5]])


def test_star_spatial_matches_brute_force_oracle():
    g = star_graph(5, partition_strategy="spatial")
    parts = build_partitioned_adjacency(g)
    assert len(parts.matrices) == 3
    oracle = brute_force_normalization(5, g.edges)
    npt.assert_allclose(parts.total(), oracle, atol=1e-12)
    # hub row: self-connection in root subset, leaves in centrifugal
    root, centripetal, centrifugal = parts.matrices
    assert root[0, 0] > 0 and np.all(root[0, 1:] == 0)
    assert np.all(centripetal[0] == 0) and np.all(centrifugal[0, 1:] > 0)
    # leaf rows aggregate the hub via the centripetal subset
    assert centripetal[1, 0] > 0 and centrifugal[1, 0] == 0


@pytest.mark.parametrize("strategy,k", [("uniform", 1), ("distance", 2), ("spatial", 3)])
def test_partitions_tile_the_normalization(strategy, k):
    rng = np.random.default_rng(11)
    for n in (2, 5, 9, 13):
        base = random_connected_graph(rng, n)
        g = SkeletonGraph(n, base.edges, center_joint=base.center_joint,
                          partition_strategy=strategy)
        parts = build_partitioned_adjacency(g)
        assert len(parts.matrices) == k
        npt.assert_allclose(parts.total(), normalized_adjacency(g), atol=1e-9)
        for m in parts.matrices:
            assert np.all(m >= 0)


def test_partitioning_is_deterministic():
    g1 = stick_figure_graph()
    g2 = stick_figure_graph()
    p1 = build_partitioned_adjacency(g1)
    p2 = build_partitioned_adjacency(g2)
    for a, b in zip(p1.matrices, p2.matrices):
        assert np.array_equal(a, b)


def test_partitioned_adjacency_rejects_negative():
    with pytest.raises(StructureError):
        PartitionedAdjacency((np.array([[-0.1]]),), "uniform")


# -- modality streams -----------------------------------------------------------


def test_bone_zero_for_origin_pose():
    g = chain_graph(3)
    seq = SkeletonSequence(np.zeros((4, 3, 3)))
    npt.assert_array_equal(derive_bone(seq, g).coords, 0.0)


def test_bone_translation_invariant():
    rng = np.random.default_rng(12)
    g = stick_figure_graph()
    coords = rng.normal(size=(6, 10, 3))
    seq = SkeletonSequence(coords)
    shifted = SkeletonSequence(coords + np.array([1.5, -2.0, 0.25]))
    npt.assert_allclose(derive_bone(shifted, g).coords,
                        derive_bone(seq, g).coords, atol=1e-12)


def test_bone_three_joint_chain_oracle():
    g = chain_graph(3, center_joint=0)
    coords = np.array([[[0.0, 0, 0], [1.0, 0, 0], [1.0, 2.0, 0]],
                       [[1.0, 1, 1], [2.0, 1, 1], [2.0, 0.0, 1]]])
    seq = SkeletonSequence(coords)
    bones = derive_bone(seq, g).coords
    parent = g.spanning_parents()
    # per-joint subtraction oracle
    expected = np.zeros_like(coords)
    for t in range(coords.shape[0]):
        for j in range(3):
            if parent[j] >= 0:
                expected[t, j] = coords[t, j] - coords[t, parent[j]]
    npt.assert_array_equal(bones, expected)
    npt.assert_array_equal(bones[:, 0], 0.0)
    npt.assert_array_equal(bones[0, 1], [1.0, 0, 0])
    npt.assert_array_equal(bones[0, 2], [0.0, 2.0, 0])


def test_motion_constant_and_single_frame():
    seq = SkeletonSequence(np.ones((5, 4, 3)))
    npt.assert_array_equal(derive_motion(seq).coords, 0.0)
    one = SkeletonSequence(np.ones((1, 4, 3)))
    npt.assert_array_equal(derive_motion(one).coords, 0.0)
    assert derive_motion(one).coords.shape == (1, 4, 3)


def test_motion_linear_trajectory():
    d = np.array([0.1, -0.2, 0.3])
    coords = np.arange(6)[:, None, None] * d[None, None, :] * np.ones((6, 4, 3))
    motion = derive_motion(SkeletonSequence(coords)).coords
    npt.assert_allclose(motion[:-1], np.broadcast_to(d, (5, 4, 3)), atol=1e-12)
    npt.assert_array_equal(motion[-1], 0.0)


def test_motion_of_reversed_sequence_relation():
    rng = np.random.default_rng(13)
    coords = rng.normal(size=(7, 5, 3))
    seq = SkeletonSequence(coords)
    m = derive_motion(seq).coords
    mr = derive_motion(reverse(seq)).coords
    npt.assert_allclose(mr[:-1], -m[::-1][1:], atol=1e-12)
    npt.assert_array_equal(mr[-1], 0.0)


def test_reverse_is_involution():
    rng = np.random.default_rng(14)
    seq = SkeletonSequence(rng.normal(size=(9, 6, 3)), label=3, meta={"id": "a"})
    assert np.array_equal(reverse(reverse(seq)).coords, seq.coords)
    one = SkeletonSequence(rng.normal(size=(1, 6, 3)))
    assert np.array_equal(reverse(one).coords, one.coords)
    abc = SkeletonSequence(np.stack([np.full((2, 3), v) for v in (1.0, 2.0, 3.0)]))
    npt.assert_array_equal(reverse(abc).coords[:, 0, 0], [3.0, 2.0, 1.0])
    assert reverse(seq).label == 3 and reverse(seq).meta["id"] == "a"


def test_sequence_validation():
    with pytest.raises(StructureError):
        SkeletonSequence(np.zeros((0, 4, 3)))
    with pytest.raises(StructureError):
        SkeletonSequence(np.zeros((2, 4, 2)))
    bad = np.zeros((2, 4, 3))
    bad[0, 0, 0] = np.nan
    with pytest.raises(StructureError):
        SkeletonSequence(bad)
