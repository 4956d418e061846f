"""
Pieces shared by the experiment protocols: seeds, configs, data domains.
"""
import logging
import time

import numpy as np

from inv_transfer.transforms2d import assets
from inv_transfer.transforms2d.algo.supervised import DataSplits, TrainConfig, train
from inv_transfer.transforms2d.dataset import (DatasetConfig, augment_dataset, class_subset,
                                               generate_splits)
from inv_transfer.transforms2d.model import ModelConfig, init_model
from inv_transfer.transforms2d.rng import MASK64, RngStream, mix

logger = logging.getLogger(__name__)

SYNTHETIC_FLAG = 'synthetic-base'


def derived_seed(seed, *tags):
    """Stable 63-bit seed for a named sub-task of a run."""
    words = [int(seed)] + [mix(*[ord(ch) for ch in t]) if isinstance(t, str) else int(t)
                           for t in tags]
    return mix(*words) & (MASK64 >> 1)


def train_config(cfg, epochs, seed, schedule='constant'):
    return TrainConfig(lr=cfg.lr, epochs=epochs, batch_size=cfg.batch_size, seed=seed,
                       schedule=schedule)


def model_config(cfg, class_count, seed, arch=None, resolution=32):
    return ModelConfig(arch or cfg.arch, cfg.rep_dim, class_count, seed, (3, resolution, resolution))


def pretrain(cfg, splits, class_count, seed, arch=None, tag=''):
    start = time.time()
    resolution = splits.train.images.shape[1]
    m = init_model(model_config(cfg, class_count, derived_seed(seed, 'init', tag), arch, resolution))
    m = train(m, splits, train_config(cfg, cfg.pretrain_epochs, derived_seed(seed, 'train', tag)))
    logger.info('trained %s (seed %d, %d classes, %d samples): best val acc %.3f in %.1fs',
                tag or 'model', seed, class_count, len(splits.train), m.best_val_acc or 0.0,
                time.time() - start)
    return m


def load_base_set(cfg, n=None):
    """CIFAR records from cfg.cifar_dir, or a procedural stand-in of `n` records."""
    if cfg.cifar_dir:
        return assets.import_assets(cfg.cifar_dir, assets.AssetKind.CIFAR_BINARY)
    n = n or cfg.n_train + cfg.n_val + cfg.n_test
    logger.warning('no CIFAR directory given, using a %d-record synthetic base set', n)
    return assets.generate_synthetic_base(n, derived_seed(0, 'base'))


def partition(base, sizes, seed):
    """Disjoint random slices of `base` with the requested sizes, shrunk to fit."""
    total = sum(sizes)
    if total > len(base):
        ratio = len(base) / float(total)
        sizes = [int(s * ratio) for s in sizes]
        logger.warning('base set holds %d records, shrinking parts to %s', len(base), sizes)
    order = RngStream(seed).permutation(len(base))
    parts, start = [], 0
    for s in sizes:
        parts.append(base.select(np.sort(order[start:start + s])))
        start += s
    return parts


class ObjectDomain(object):
    """Transforms-2D data: objects are sprite ids."""
    name = 'transforms2d'
    resolution = 32

    def __init__(self, cfg, assets_cfg=None):
        self.cfg = cfg
        self.assets = assets_cfg or cfg.assets
        self.available_objects = self.assets.sprite_count
        self.n_objects = cfg.classes

    def dataset_config(self, objects, tset, seed, n_train=None):
        cfg = self.cfg
        return DatasetConfig(objects, tset, n_train or cfg.n_train, cfg.n_val, cfg.n_test,
                             self.resolution, seed, self.assets, cfg.kernel)

    def splits(self, objects, tset, seed, n_train=None):
        return DataSplits(*generate_splits(self.dataset_config(objects, tset, seed, n_train),
                                           self.cfg.workers))

    def finetune_sizes(self, target):
        return [int(n) for n in self.cfg.finetune_sizes]


class AugmentedDomain(object):
    """Base image classes with augmentation-mode transforms."""
    name = 'cifar'

    def __init__(self, cfg, base):
        self.cfg = cfg
        self.base = base
        self.resolution = base.images.shape[1]
        self.parts = partition(base, [cfg.n_train, cfg.n_val, cfg.n_test], derived_seed(0, 'parts'))
        self.available_objects = base.class_count
        self.n_objects = base.class_count // 2

    def splits(self, objects, tset, seed, n_train=None):
        out = []
        for k, part in enumerate(self.parts):
            sub = class_subset(part, objects)
            if k == 0 and n_train:
                sub = sub.select(np.arange(min(n_train, len(sub))))
            out.append(augment_dataset(sub, tset, derived_seed(seed, 'augment', k),
                                       self.cfg.kernel, self.cfg.workers))
        return DataSplits(*out)

    def finetune_sizes(self, target):
        # 1% and 10% of the target training set
        return [max(1, len(target.train) // 100), max(1, len(target.train) // 10)]


def make_domain(cfg, report=None):
    if cfg.domain == 'cifar':
        base = load_base_set(cfg)
        if base.synthetic and report is not None:
            report.flag(SYNTHETIC_FLAG)
        return AugmentedDomain(cfg, base)
    return ObjectDomain(cfg)
