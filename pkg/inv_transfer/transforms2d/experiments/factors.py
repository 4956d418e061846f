"""
Invariance versus other factors of the pretraining data.

For every factor value a pair of models is pretrained on the same objects,
once with the target task's transformations (Same) and once with a disjoint
set (Disjoint); both are then linearly probed on the target task.
"""
import logging

import numpy as np
import pandas as pd

from inv_transfer.transforms2d.algo.supervised import (attach_head, evaluate, fine_tune_full,
                                                       linear_probe)
from inv_transfer.transforms2d.dataset import derive_split
from inv_transfer.transforms2d.experiments.common import (derived_seed, make_domain, pretrain,
                                                          train_config)
from inv_transfer.transforms2d.experiments.report import RunReport
from inv_transfer.transforms2d.transforms import Mode

logger = logging.getLogger(__name__)

SAME, DISJOINT = 'Same', 'Disjoint'


def _pretraining_setup(cfg, split, value):
    """(objects, arch, n_train) for one factor value."""
    if cfg.factor == 'sample_count':
        return split.o_train, None, int(value)
    if cfg.factor == 'architecture':
        return split.o_train, value, None
    return split.relationship(value), None, None


def _trained_pairs(cfg, domain, seed, grid):
    """Yield (value, rel, model, pretraining splits, target splits) per factor value and relation."""
    split = derive_split(seed, domain.available_objects, n_objects=domain.n_objects,
                         n_transforms=cfg.n_transforms)
    mode = Mode.AUGMENTATION if domain.name == 'cifar' else Mode.OBJECT
    t_same, t_disj = split.t_eval.with_mode(mode), split.t_train.with_mode(mode)
    target = domain.splits(split.o_eval, t_same, derived_seed(seed, 'target'))
    logger.info('seed %d: train transforms %s, eval transforms %s', seed, t_disj.names(),
                t_same.names())
    for value in grid:
        objects, arch, n_train = _pretraining_setup(cfg, split, value)
        for rel, tset in ((SAME, t_same), (DISJOINT, t_disj)):
            data = domain.splits(objects, tset, derived_seed(seed, 'pretrain', rel, str(value)),
                                 n_train)
            m = pretrain(cfg, data, len(objects), seed, arch, tag='{}-{}'.format(rel, value))
            yield value, rel, m, data, target


def run_factor_comparison(cfg):
    report = RunReport('factor_comparison', cfg.to_dict())
    domain = make_domain(cfg, report)
    probe_cfg = train_config(cfg, cfg.probe_epochs, 0)
    for seed in cfg.seeds:
        for value, rel, m, data, target in _trained_pairs(cfg, domain, seed,
                                                          cfg.factor_grid()):
            _, acc = linear_probe(m, target, probe_cfg.replace(seed=derived_seed(seed, 'probe')))
            report.add(seed, cfg.factor, value, rel, train_acc=evaluate(m, data.test),
                       transfer_acc=acc)
    report.add_table('gap_summary', gap_summary(report.frame()))
    return report


def gap_summary(frame):
    """Per factor: min-max span of Same and Disjoint transfer means across factor values, and
    the mean and standard deviation of the per-value difference."""
    rows = []
    for factor, group in frame.groupby('factor', sort=False):
        means = group.groupby(['factor_value', 'transform_rel'], sort=False)['transfer_acc'] \
            .mean().unstack('transform_rel')
        diff = means[SAME] - means[DISJOINT]
        rows.append({
            'factor': factor,
            'same_min': means[SAME].min(), 'same_max': means[SAME].max(),
            'disjoint_min': means[DISJOINT].min(), 'disjoint_max': means[DISJOINT].max(),
            'span_same': means[SAME].max() - means[SAME].min(),
            'span_disjoint': means[DISJOINT].max() - means[DISJOINT].min(),
            'mean_diff': diff.mean(),
            'std_diff': diff.std(ddof=1) if len(diff) > 1 else np.nan,
        })
    return pd.DataFrame(rows).set_index('factor')


def run_full_finetune(cfg):
    """Linear probe, then fine-tune every parameter on a low and a high number of target
    samples.  Size 0 is the probe-only reference."""
    report = RunReport('full_finetune', cfg.to_dict())
    domain = make_domain(cfg, report)
    probe_cfg = train_config(cfg, cfg.probe_epochs, 0)
    grid = cfg.factor_grid()[-1:]
    for seed in cfg.seeds:
        for value, rel, m, data, target in _trained_pairs(cfg, domain, seed, grid):
            train_acc = evaluate(m, data.test)
            head, acc = linear_probe(m, target, probe_cfg.replace(seed=derived_seed(seed, 'probe')))
            report.add(seed, 'finetune_samples', 0, rel, train_acc=train_acc, transfer_acc=acc)
            probed = attach_head(m, head)
            for n in domain.finetune_sizes(target):
                tuned = fine_tune_full(probed, target,
                                       train_config(cfg, cfg.finetune_epochs,
                                                    derived_seed(seed, 'finetune', n)), n)
                report.add(seed, 'finetune_samples', n, rel, train_acc=train_acc,
                           transfer_acc=evaluate(tuned, target.test))
    frame = report.frame()
    means = frame.groupby(['factor_value', 'transform_rel'], sort=False)['transfer_acc'].mean() \
        .unstack('transform_rel')
    means['gap'] = means[SAME] - means[DISJOINT]
    report.add_table('finetune_gap', means)
    return report
