"""Augmented failing-sample pools for counterexample-guided fine-tuning."""

from __future__ import annotations

import numpy as np

from ..data import CORRUPTION_KINDS, CorruptionSpec, LabeledDataset, corrupt, draw_mix_ratio, mix_samples
from .config import RepairConfig


def build_augmented_set(failing: LabeledDataset, train: LabeledDataset, config: RepairConfig,
                        seed: int | None = None, blur: bool = True, mixes_per_sample: int = 1) -> LabeledDataset:
    """Per failing sample: the original, one blur of each kind, then ``mixes_per_sample`` mixes.

    Blur severities are drawn from 1..3. Each mix pairs the sample with a random
    training partner, uses cutmix with probability ``cutmix_prob`` (blend
    otherwise) and a ratio ``max(ratio, Beta(beta, beta))``.
    """
    if len(failing) == 0:
        raise ValueError("the failing set is empty; nothing to augment")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    images, labels, kinds = [], [], []
    for x, y in zip(failing.images, failing.labels):
        images.append(x)
        labels.append(y)
        kinds.append("original")
        if blur:
            for kind in CORRUPTION_KINDS:
                sev = int(rng.integers(1, 4))
                images.append(corrupt(x, CorruptionSpec(kind, sev, int(rng.integers(2**31)))))
                labels.append(y)
                kinds.append(kind)
        for _ in range(mixes_per_sample):
            j = int(rng.integers(len(train)))
            mode = "cutmix" if rng.random() < config.cutmix_prob else "blend"
            r = draw_mix_ratio(rng, config.beta, config.ratio)
            img, lab = mix_samples((x, y), (train.images[j], train.labels[j]), r, mode, int(rng.integers(2**31)))
            images.append(img)
            labels.append(lab)
            kinds.append(mode)
    return LabeledDataset(np.stack(images), np.asarray(labels), failing.class_count, "train", tags=kinds)
