"""A complete (miniature) pretraining run: two augmented views per clip,
feature-enrichment loss + reversed-prediction loss, LARS with warmup and
cosine decay, EMA target updates, then a frozen-encoder linear probe.

Scaled far below the shipped desk preset so it finishes in about a
minute; raise epochs / sizes to reproduce the benchmark numbers.
"""

import numpy as np

from skelrep import desk_preset, linear_eval, make_benchmark, pretrain
from skelrep.augment import AugmentConfig
from skelrep.byol import HeadConfig
from skelrep.encoder import EncoderConfig

train_set, test_set = make_benchmark(class_count=3, train_per_class=24,
                                     test_per_class=12, seed=7)
print(f"benchmark: {len(train_set)} train / {len(test_set)} test clips, "
      f"{train_set.graph.joint_count} joints")

cfg = desk_preset(
    epochs=12, warmup_epochs=3, batch_size=24, seed=7,
    encoder=EncoderConfig(channels=(6, 8, 8, 16), gru_hidden=16,
                          expected_frames=50),
    heads=HeadConfig(hidden=64, out=32),
)

records = []
checkpoint = pretrain(cfg, train_set, epoch_records=records)
print("\nepoch  loss   enrich  predict  embed-std")
for r in records[::3] + [records[-1]]:
    print(f"{r['epoch']:>5}  {r['loss']:.3f}  {r['loss_byol']:.3f}   "
          f"{r['loss_pretext']:.3f}    {r['embed_std']:.4f}")

accuracy = linear_eval(checkpoint, train_set, test_set)
print(f"\nfrozen-encoder linear probe accuracy: {accuracy:.3f} "
      f"(chance {1.0 / 3:.3f})")
