import numpy as np
import pytest

from skelrep.augment import AugmentConfig
from skelrep.byol import HeadConfig
from skelrep.config import TrainConfig
from skelrep.data import SyntheticActionSpec, generate_synthetic
from skelrep.encoder import EncoderConfig
from skelrep.skeleton import chain_graph


def tiny_train_config(**overrides):
    """A configuration small enough for second-scale training tests:
    4-joint chain, 8 frames, 2-block encoder."""
    base = dict(
        epochs=2, warmup_epochs=1, batch_size=4, peak_lr=0.05, final_lr=0.005,
        tau=0.99, seed=11, frames=8,
        encoder=EncoderConfig(channels=(3, 4), gru_hidden=4, temporal_kernel=3,
                              expected_frames=8),
        augment=AugmentConfig(out_frames=8, rng_seed=0),
        heads=HeadConfig(hidden=8, out=4),
    )
    base.update(overrides)
    return TrainConfig(**base)


def tiny_dataset(classes=2, per_class=4, frames=8, seed=3, joints=4):
    graph = chain_graph(joints, center_joint=0, partition_strategy="spatial")
    spec = SyntheticActionSpec(class_count=classes, samples_per_class=per_class,
                               frame_count=frames, graph=graph, seed=seed,
                               noise_sigma=0.01, view_rotation_deg=30.0,
                               view_tilt_deg=10.0)
    return generate_synthetic(spec)


@pytest.fixture(scope="session")
def tiny_cfg_factory():
    return tiny_train_config


@pytest.fixture(scope="session")
def tiny_data():
    return tiny_dataset()


@pytest.fixture(scope="session")
def tiny_checkpoint(tiny_data):
    from skelrep.training import pretrain
    return pretrain(tiny_train_config(), tiny_data)
