"""
Transfer of invariance out of distribution.

One model per transformation type (plus an untransformed baseline) is trained
for each prototype family; each model's sensitivity to each of the 18 types is
then measured in distribution, on unseen prototypes of the same family (mild),
on the other family (strong) and on augmented base images.
"""
import logging
from dataclasses import replace

import numpy as np
import pandas as pd

from inv_transfer.transforms2d.algo.supervised import evaluate
from inv_transfer.transforms2d.dataset import (DatasetConfig, generate_augmented_sens_pairs,
                                               generate_sens_pairs)
from inv_transfer.transforms2d.experiments.common import (SYNTHETIC_FLAG, ObjectDomain,
                                                          derived_seed, load_base_set, pretrain)
from inv_transfer.transforms2d.experiments.report import RunReport
from inv_transfer.transforms2d.invariance import NONE_ROW, sens_matrix
from inv_transfer.transforms2d.transforms import ALL_KINDS, Mode, TransformSet

logger = logging.getLogger(__name__)

EVAL_DOMAINS = ('in', 'mild', 'strong', 'cifar')


def family_assets(cfg):
    n = max(cfg.assets.sprite_count, 2 * cfg.classes)
    return {
        'image': replace(cfg.assets, sprites='procedural', sprite_count=n,
                         backgrounds='smooth_noise'),
        'random': replace(cfg.assets, sprites='random_pattern', sprite_count=n,
                          backgrounds='uniform_random'),
    }


def _train_family(cfg, domain, objects, seed, family):
    models, train_acc = {}, {}
    for kind in (None,) + ALL_KINDS:
        name = kind.value if kind else NONE_ROW
        tset = TransformSet((kind,)) if kind else None
        data = domain.splits(objects, tset, derived_seed(seed, family, name))
        m = pretrain(cfg, data, len(objects), seed, tag='{}/{}'.format(family, name))
        models[kind] = m
        train_acc[name] = evaluate(m, data.test)
    return models, train_acc


def _pairs_source(cfg, seed, domain_name, family_cfg, objects, base):
    def pairs_for(kind):
        s = derived_seed(seed, 'sens', domain_name, kind.value)
        if domain_name == 'cifar':
            return generate_augmented_sens_pairs(base, TransformSet((kind,), Mode.AUGMENTATION),
                                                 cfg.sens_pairs, s, cfg.kernel, cfg.workers)
        dcfg = DatasetConfig(objects, TransformSet((kind,)), seed=s, assets=family_cfg,
                             kernel=cfg.kernel)
        return generate_sens_pairs(dcfg, cfg.sens_pairs, s, workers=cfg.workers)
    return pairs_for


def run_ood_invariance(cfg):
    report = RunReport('ood_invariance', cfg.to_dict())
    base = load_base_set(cfg)
    if base.synthetic:
        report.flag(SYNTHETIC_FLAG)
    families = family_assets(cfg)
    k = cfg.classes
    in_objects, mild_objects = tuple(range(k)), tuple(range(k, 2 * k))
    matrices = {}
    for seed in cfg.seeds:
        for family, other in (('image', 'random'), ('random', 'image')):
            models, train_acc = _train_family(cfg, ObjectDomain(cfg, families[family]),
                                              in_objects, seed, family)
            sources = {
                'in': (families[family], in_objects),
                'mild': (families[family], mild_objects),
                'strong': (families[other], in_objects),
                'cifar': (None, None),
            }
            for domain_name in EVAL_DOMAINS:
                family_cfg, objects = sources[domain_name]
                matrix = sens_matrix(models, ALL_KINDS,
                                     _pairs_source(cfg, seed, domain_name, family_cfg, objects, base))
                matrices.setdefault((family, domain_name), []).append(matrix)
                _add_rows(report, seed, family, domain_name, matrix, train_acc)
                summary = matrix.summary()
                logger.info('%s models on %s data (seed %d): same %.3f, other %.3f, none %.3f, '
                            'diagonal wins %d/%d', family, domain_name, seed, summary['same'],
                            summary['other'], summary['none'], summary['diagonal_wins'],
                            summary['rows'])
    for (family, domain_name), ms in matrices.items():
        mean = sum(m.to_frame() for m in ms) / float(len(ms))
        report.add_table('sens_matrix_{}_{}'.format(family, domain_name), mean)
    report.add_table('sens_summary', sens_summary(report.frame()))
    report.add_table('diagonal_wins', pd.DataFrame(
        [{'family': f, 'domain': d, 'seed': i, 'diagonal_wins': m.diagonal_wins()}
         for (f, d), ms in matrices.items() for i, m in enumerate(ms)]))
    return report


def _add_rows(report, seed, family, domain_name, matrix, train_acc):
    """One row per trained model: diagonal cell and mean of its other cells."""
    for row in matrix.rows:
        cells = matrix.to_frame().loc[row]
        if row == NONE_ROW:
            same, other, rel = np.nan, cells.mean(), 'None'
        else:
            same, other, rel = cells[row], cells.drop(row).mean(), 'Same'
        report.add(seed, '{}:{}'.format(family, domain_name), row, rel,
                   train_acc=train_acc[row], sens_same=same, sens_other=other)


def sens_summary(frame):
    """Same/Other/None sensitivities per family and evaluation domain."""
    rows = []
    for factor, group in frame.groupby('factor', sort=False):
        family, domain_name = factor.split(':')
        kinds = group[group.transform_rel == 'Same']
        none = group[group.transform_rel == 'None']
        for label, value in (('Same', kinds.sens_same.mean()), ('Other', kinds.sens_other.mean()),
                             ('None', none.sens_other.mean())):
            rows.append({'family': family, 'row': label, 'domain': domain_name, 'sens': value})
    table = pd.DataFrame(rows).pivot_table(index=['family', 'row'], columns='domain',
                                           values='sens', sort=False)
    return table.reindex(columns=[d for d in EVAL_DOMAINS if d in table.columns])
