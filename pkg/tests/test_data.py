import numpy as np
import numpy.testing as npt
import pytest

from skelrep.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from skelrep.data import (
    ClassMotion,
    SkeletonDataset,
    SyntheticActionSpec,
    export_embeddings,
    generate_synthetic,
    load_dataset,
    load_ntu_skeleton,
    make_benchmark,
    save_dataset,
    save_ntu_skeleton,
)
from skelrep.encoder import Encoder, EncoderConfig
from skelrep.errors import (
    ConfigError,
    DataError,
    IntegrityError,
    ParseError,
    VersionError,
)
from skelrep.skeleton import (
    SkeletonSequence,
    chain_graph,
    derive_bone,
    derive_motion,
    stick_figure_graph,
)


# -- synthetic generation -------------------------------------------------------


def small_spec(**kw):
    defaults = dict(class_count=3, samples_per_class=4, frame_count=12, seed=5)
    defaults.update(kw)
    return SyntheticActionSpec(**defaults)


def test_generation_is_deterministic():
    a = generate_synthetic(small_spec())
    b = generate_synthetic(small_spec())
    npt.assert_array_equal(a.coords, b.coords)
    npt.assert_array_equal(a.labels, b.labels)


def test_generation_shapes_and_labels():
    ds = generate_synthetic(small_spec())
    assert ds.coords.shape == (12, 12, 10, 3)
    assert ds.class_count() == 3
    assert np.all(np.isfinite(ds.coords))
    counts = np.bincount(ds.labels)
    assert np.all(counts == 4)


def test_zero_noise_per_sample_draw_reproducible():
    spec = small_spec(noise_sigma=0.0)
    a = generate_synthetic(spec)
    b = generate_synthetic(small_spec(noise_sigma=0.0))
    npt.assert_array_equal(a.coords[0], b.coords[0])


def test_spec_rejects_bad_configs():
    with pytest.raises(ConfigError):
        small_spec(class_count=1)
    with pytest.raises(ConfigError):
        small_spec(samples_per_class=0)
    motions = small_spec().class_motions
    dup = [motions[0], motions[0], motions[2]]
    with pytest.raises(ConfigError):
        SyntheticActionSpec(class_count=3, samples_per_class=2, frame_count=8,
                            class_motions=dup)


def test_nearest_centroid_oracle_above_chance():
    # the trivial classifier validates the benchmark's learnability before
    # any model training: flatten coords, nearest class centroid
    train, test = make_benchmark(class_count=5, train_per_class=100,
                                 test_per_class=50, seed=0)
    flat_train = train.coords.reshape(len(train), -1)
    flat_test = test.coords.reshape(len(test), -1)
    centroids = np.stack([flat_train[train.labels == k].mean(axis=0)
                          for k in range(5)])
    dists = ((flat_test[:, None, :] - centroids[None]) ** 2).sum(-1)
    acc = float((dists.argmin(axis=1) == test.labels).mean())
    assert acc > 0.20, f"nearest-centroid accuracy {acc:.3f} not above chance"


def test_benchmark_split_is_stratified_and_disjoint():
    train, test = make_benchmark(class_count=3, train_per_class=5,
                                 test_per_class=2, frame_count=10, seed=1)
    assert len(train) == 15 and len(test) == 6
    assert np.all(np.bincount(train.labels) == 5)
    assert np.all(np.bincount(test.labels) == 2)
    assert not set(train.sample_ids) & set(test.sample_ids)


# -- dataset container ----------------------------------------------------------


def test_dataset_accessors_and_modalities():
    ds = generate_synthetic(small_spec())
    seq = ds[0]
    assert isinstance(seq, SkeletonSequence)
    assert seq.label == 0 and seq.meta["id"] == ds.sample_ids[0]

    bone = ds.map_modality("bone")
    expected = derive_bone(SkeletonSequence(ds.coords[3]), ds.graph).coords
    npt.assert_allclose(bone.coords[3], expected, atol=1e-7)

    motion = ds.map_modality("motion")
    expected = derive_motion(SkeletonSequence(ds.coords[3])).coords
    npt.assert_allclose(motion.coords[3], expected, atol=1e-7)

    assert ds.map_modality("joint") is ds


def test_dataset_resample():
    ds = generate_synthetic(small_spec(frame_count=20))
    out = ds.resample(10)
    assert out.coords.shape[1] == 10
    assert ds.resample(20) is ds


def test_dataset_npz_round_trip(tmp_path):
    ds = generate_synthetic(small_spec())
    path = tmp_path / "ds.npz"
    save_dataset(ds, path)
    back = load_dataset(path)
    npt.assert_array_equal(back.coords, ds.coords)
    npt.assert_array_equal(back.labels, ds.labels)
    assert back.graph == ds.graph
    assert back.sample_ids == ds.sample_ids
    with pytest.raises(DataError):
        load_dataset(tmp_path / "missing.npz")


# -- NTU skeleton files ------------------------------------------------------------


def test_ntu_round_trip_exact(tmp_path):
    rng = np.random.default_rng(2)
    seq = SkeletonSequence(rng.normal(size=(7, 25, 3)))
    path = tmp_path / "clip.skeleton"
    save_ntu_skeleton(seq, path)
    back = load_ntu_skeleton(path)
    npt.assert_array_equal(back.coords, seq.coords)


def test_ntu_hand_written_fixture(tmp_path):
    # 2 frames, 2 joints, authored by hand; only x y z are consumed
    lines = [
        "2",
        "1",
        "72057594037931101 0 1 1 1 1 0 0.1 -0.2 2",
        "2",
        "0.5 1.25 -0.75 10 20 100 200 1 0 0 0 2",
        "-1.5 0.25 3.0 11 21 101 201 1 0 0 0 2",
        "1",
        "72057594037931101 0 1 1 1 1 0 0.1 -0.2 2",
        "2",
        "0.625 1.5 -0.5 10 20 100 200 1 0 0 0 2",
        "-1.375 0.5 3.25 11 21 101 201 1 0 0 0 2",
    ]
    path = tmp_path / "tiny.skeleton"
    path.write_text("\n".join(lines) + "\n")
    seq = load_ntu_skeleton(path)
    expected = np.array([[[0.5, 1.25, -0.75], [-1.5, 0.25, 3.0]],
                         [[0.625, 1.5, -0.5], [-1.375, 0.5, 3.25]]])
    npt.assert_array_equal(seq.coords, expected)


def test_ntu_keeps_first_body_and_drops_empty_frames(tmp_path):
    body = lambda v: ["0 0 0 0 0 0 0 0 0 2", "1", f"{v} {v} {v} 0 0 0 0 0 0 0 0 2"]
    lines = ["3", "2", *body(1.0), *body(9.0), "0", "1", *body(2.0)]
    path = tmp_path / "multi.skeleton"
    path.write_text("\n".join(lines) + "\n")
    seq = load_ntu_skeleton(path)
    assert seq.frames == 2  # the empty frame is dropped
    npt.assert_array_equal(seq.coords[:, 0, 0], [1.0, 2.0])


def test_ntu_error_cases(tmp_path):
    zero = tmp_path / "zero.skeleton"
    zero.write_text("0\n")
    with pytest.raises(DataError):
        load_ntu_skeleton(zero)

    empty_bodies = tmp_path / "empty.skeleton"
    empty_bodies.write_text("2\n0\n0\n")
    with pytest.raises(DataError, match="zero bodies"):
        load_ntu_skeleton(empty_bodies)

    malformed = tmp_path / "bad.skeleton"
    malformed.write_text("1\n1\n0 0 0 0 0 0 0 0 0 2\n1\nnot-a-float 0 0\n")
    with pytest.raises(ParseError, match="line 5"):
        load_ntu_skeleton(malformed)

    truncated = tmp_path / "trunc.skeleton"
    truncated.write_text("2\n1\n0 0 0 0 0 0 0 0 0 2\n2\n1 2 3 0 0 0 0 0 0 0 0 2\n")
    with pytest.raises(ParseError):
        load_ntu_skeleton(truncated)


# -- checkpoint container -------------------------------------------------------------


def sample_checkpoint():
    rng = np.random.default_rng(3)
    arrays = {
        "online_encoder/blocks.0.spatial.weight": rng.normal(size=(6, 4)).astype(np.float32),
        "decoder/seed_skeleton": rng.normal(size=(5, 3)),
        "optimizer/momentum.w": rng.normal(size=(6, 4)).astype(np.float32),
    }
    return Checkpoint(epoch=7, config={"train": {"seed": 1}, "graph": {}},
                      rng_state={"seed": 1, "next_epoch": 7},
                      arrays=arrays, tau=0.99)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    ckpt = sample_checkpoint()
    path = tmp_path / "run.skcp"
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    assert back.epoch == 7 and back.tau == 0.99
    assert back.config == ckpt.config and back.rng_state == ckpt.rng_state
    assert set(back.arrays) == set(ckpt.arrays)
    for name in ckpt.arrays:
        assert back.arrays[name].dtype == ckpt.arrays[name].dtype
        npt.assert_array_equal(back.arrays[name], ckpt.arrays[name])


def test_checkpoint_version_mismatch(tmp_path):
    ckpt = sample_checkpoint()
    ckpt.version = 99
    path = tmp_path / "future.skcp"
    save_checkpoint(ckpt, path)
    with pytest.raises(VersionError):
        load_checkpoint(path)


def test_checkpoint_corruption_detected(tmp_path):
    path = tmp_path / "run.skcp"
    save_checkpoint(sample_checkpoint(), path)
    raw = bytearray(path.read_bytes())

    truncated = tmp_path / "trunc.skcp"
    truncated.write_bytes(raw[:len(raw) // 2])
    with pytest.raises(IntegrityError):
        load_checkpoint(truncated)

    flipped = bytearray(raw)
    flipped[len(flipped) // 2] ^= 0xFF
    corrupt = tmp_path / "corrupt.skcp"
    corrupt.write_bytes(bytes(flipped))
    with pytest.raises(IntegrityError):
        load_checkpoint(corrupt)


# -- embedding export --------------------------------------------------------------------


def test_export_embeddings(tmp_path):
    ds = generate_synthetic(small_spec(frame_count=8))
    enc = Encoder(EncoderConfig(channels=(4, 4), gru_hidden=6, expected_frames=8),
                  stick_figure_graph(), np.random.default_rng(4))
    path = tmp_path / "emb.csv"
    count = export_embeddings(enc, ds, path)
    lines = path.read_text().splitlines()
    assert count == len(ds) == len(lines) - 1
    assert lines[0] == "id,label," + ",".join(f"e{i}" for i in range(6))
    first = lines[1].split(",")
    assert first[0] == ds.sample_ids[0] and first[1] == "0"
    assert len(first) == 2 + 6

    again = tmp_path / "emb2.csv"
    export_embeddings(enc, ds, again)
    assert again.read_bytes() == path.read_bytes()


def test_export_embeddings_empty_dataset(tmp_path):
    ds = generate_synthetic(small_spec(frame_count=8)).subset([])
    enc = Encoder(EncoderConfig(channels=(4, 4), gru_hidden=6, expected_frames=8),
                  stick_figure_graph(), np.random.default_rng(5))
    path = tmp_path / "empty.csv"
    assert export_embeddings(enc, ds, path) == 0
    assert path.read_text().splitlines() == [
        "id,label," + ",".join(f"e{i}" for i in range(6))]
