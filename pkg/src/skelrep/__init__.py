"""skelrep: unsupervised skeleton action representation learning in numpy.

An ST-GCN + graph-convolutional-GRU encoder is trained jointly with a
BYOL-style feature-enrichment objective and a reversed-sequence
prediction pretext objective; evaluation is by frozen-encoder linear
probing, semi-supervised fine-tuning and three-stream ensembling.
"""

from .augment import (
    AugmentConfig,
    augment_view,
    identity_augment,
    joint_jitter,
    pose_augment,
    rotate_random,
    temporal_crop_resize,
)
from .byol import (
    BYOLState,
    HeadConfig,
    byol_loss,
    byol_loss_cosine_form,
    ema_update,
    stop_gradient_check,
    symmetric_byol_loss,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import (
    TrainConfig,
    config_from_dict,
    config_to_dict,
    desk_preset,
    load_config,
    paper_preset,
    save_config,
)
from .data import (
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
from .decoder import Decoder, decode, pretext_loss, total_loss
from .encoder import (
    Encoder,
    EncoderConfig,
    EncoderOutput,
    encode,
    make_encoder_variant,
)
from .errors import (
    ConfigError,
    DataError,
    IntegrityError,
    ParseError,
    SkelrepError,
    StructureError,
    TrainingFault,
    VersionError,
)
from .evaluate import (
    embed_dataset,
    ensemble_3s,
    linear_eval,
    semi_supervised_finetune,
    stratified_subset,
    train_probe,
)
from .optim import LARS, SGDMomentum, lr_schedule
from .skeleton import (
    PartitionedAdjacency,
    SkeletonGraph,
    SkeletonSequence,
    build_partitioned_adjacency,
    derive_bone,
    derive_motion,
    ntu_rgbd_graph,
    reverse,
    stick_figure_graph,
)
from .training import (
    encoder_from_checkpoint,
    pretrain,
    state_from_checkpoint,
)

__version__ = "0.1.0"
