"""
Irrelevant features: base images (C) with small pasted objects (O).

Pretraining datasets differ in inputs X and labels Y:
(X=C, Y=C), (X=C+O, Y=C), (X=C+O, Y=O) and (X=O, Y=O) on a black canvas.
"""
import logging

from inv_transfer.transforms2d.algo.supervised import DataSplits, evaluate, linear_probe
from inv_transfer.transforms2d.dataset import (HybridConfig, LabelTarget, PastePosition, Vary,
                                               build_hybrid, generate_hybrid_sens_pairs,
                                               load_catalog)
from inv_transfer.transforms2d.experiments.common import (SYNTHETIC_FLAG, derived_seed,
                                                          load_base_set, partition, pretrain,
                                                          train_config)
from inv_transfer.transforms2d.experiments.report import RunReport
from inv_transfer.transforms2d.invariance import estimate_sens
from inv_transfer.transforms2d.model import representation_fn

logger = logging.getLogger(__name__)

N_PROTOTYPES = 10

DATASETS = {
    'C/C': dict(beta=0.0, label_target=LabelTarget.BASE_CLASSES),
    'C+O/C': dict(beta=1.0, label_target=LabelTarget.BASE_CLASSES),
    'C+O/O': dict(beta=1.0, label_target=LabelTarget.OBJECT_CLASSES),
    'O/O': dict(beta=1.0, label_target=LabelTarget.OBJECT_CLASSES, black_background=True),
}


class _HybridSource(object):
    """Base parts for pretraining and for the target tasks, plus the object prototypes."""

    def __init__(self, cfg, report):
        self.cfg = cfg
        sizes = [cfg.n_train, cfg.n_val, cfg.n_test]
        base = load_base_set(cfg, n=2 * sum(sizes))
        if base.synthetic:
            report.flag(SYNTHETIC_FLAG)
        parts = partition(base, sizes + sizes, derived_seed(0, 'hybrid-parts'))
        self.pretrain_parts, self.target_parts = parts[:3], parts[3:]
        protos, _ = load_catalog(cfg.assets)
        self.prototypes = tuple(p.sprite for p in protos[:N_PROTOTYPES])

    def splits(self, parts, seed, tag, **kw):
        return DataSplits(*[
            build_hybrid(HybridConfig(part, self.prototypes, **kw), derived_seed(seed, tag, k),
                         self.cfg.workers)
            for k, part in enumerate(parts)])

    def pretraining(self, seed, tag, **kw):
        return self.splits(self.pretrain_parts, seed, tag, **kw)

    def targets(self, seed, datasets, **common):
        return {name: self.splits(self.target_parts, seed, 'target-' + name, **dict(common, **kw))
                for name, kw in datasets.items()}


def run_irrelevant_features(cfg):
    report = RunReport('irrelevant_features', cfg.to_dict())
    source = _HybridSource(cfg, report)
    for seed in cfg.seeds:
        targets = source.targets(seed, DATASETS)
        sens_cfg = HybridConfig(source.target_parts[2], source.prototypes)
        pairs_bg = generate_hybrid_sens_pairs(sens_cfg, cfg.sens_pairs, derived_seed(seed, 'sens-bg'),
                                              Vary.BASE, cfg.workers)
        pairs_obj = generate_hybrid_sens_pairs(sens_cfg, cfg.sens_pairs,
                                               derived_seed(seed, 'sens-obj'), Vary.OBJECT,
                                               cfg.workers)
        for name, kw in DATASETS.items():
            data = source.pretraining(seed, 'pretrain-' + name, **kw)
            m = pretrain(cfg, data, data.train.class_count, seed, tag=name)
            train_acc = evaluate(m, data.test)
            rep_fn = representation_fn(m)
            sens_bg = estimate_sens(rep_fn, pairs_bg).sens
            sens_obj = estimate_sens(rep_fn, pairs_obj).sens
            for target_name, target in targets.items():
                probe_cfg = train_config(cfg, cfg.probe_epochs, derived_seed(seed, 'probe', target_name))
                _, acc = linear_probe(m, target, probe_cfg)
                report.add(seed, 'pretrain', name, target_name, train_acc=train_acc,
                           transfer_acc=acc, sens_same=sens_bg, sens_other=sens_obj)
    report.add_table('pretraining_summary', pretraining_summary(report.frame()))
    return report


def pretraining_summary(frame):
    """Pretraining dataset rows; one transfer column per target, then the two sensitivities."""
    acc = frame.pivot_table(index='factor_value', columns='transform_rel', values='transfer_acc',
                            aggfunc='mean', sort=False)
    sens = frame.groupby('factor_value', sort=False)[['sens_same', 'sens_other']].mean()
    sens.columns = ['sens_background', 'sens_object']
    table = acc.join(sens)
    table.index.name = 'pretrain'
    return table


def run_relevance_availability(cfg):
    """Sweep how predictive (alpha) and how frequent (beta) the pasted object is during
    pretraining, then probe for base labels and for object labels."""
    report = RunReport('relevance_availability', cfg.to_dict())
    source = _HybridSource(cfg, report)
    corner = dict(paste_position=PastePosition.UPPER_RIGHT)
    for seed in cfg.seeds:
        targets = source.targets(seed, {
            'base_labels': dict(beta=1.0, label_target=LabelTarget.BASE_CLASSES),
            'object_labels': dict(beta=1.0, label_target=LabelTarget.OBJECT_CLASSES),
        }, **corner)
        sweeps = [('alpha', v, dict(alpha=v, beta=1.0)) for v in cfg.alpha_grid] + \
                 [('beta', v, dict(alpha=0.0, beta=v)) for v in cfg.beta_grid]
        for factor, value, kw in sweeps:
            tag = '{}={}'.format(factor, value)
            data = source.pretraining(seed, tag, label_target=LabelTarget.BASE_CLASSES,
                                      **dict(corner, **kw))
            m = pretrain(cfg, data, data.train.class_count, seed, tag=tag)
            train_acc = evaluate(m, data.test)
            for target_name, target in targets.items():
                probe_cfg = train_config(cfg, cfg.probe_epochs, derived_seed(seed, 'probe', tag))
                _, acc = linear_probe(m, target, probe_cfg)
                report.add(seed, factor, value, target_name, train_acc=train_acc, transfer_acc=acc)
    frame = report.frame()
    report.add_table('relevance_availability', frame.pivot_table(
        index=['factor', 'factor_value'], columns='transform_rel', values='transfer_acc',
        aggfunc='mean', sort=False))
    return report
