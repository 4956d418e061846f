"""
Nested transformation mismatch: a model trained on the j-th set of a chain of
nested transformation sets is probed on data built from every set of the chain.
"""
import logging

from inv_transfer.transforms2d.algo.supervised import evaluate, linear_probe
from inv_transfer.transforms2d.dataset import derive_split, nested_transform_sets
from inv_transfer.transforms2d.experiments.common import (ObjectDomain, derived_seed, pretrain,
                                                          train_config)
from inv_transfer.transforms2d.experiments.report import RunReport

logger = logging.getLogger(__name__)


def relation(j, i):
    if j > i:
        return 'Superset'
    return 'Same' if j == i else 'Subset'


def run_nested_mismatch(cfg):
    report = RunReport('nested_mismatch', cfg.to_dict())
    domain = ObjectDomain(cfg)
    for seed in cfg.seeds:
        split = derive_split(seed, domain.available_objects, n_objects=domain.n_objects)
        chain = nested_transform_sets(cfg.nested_max_k, derived_seed(seed, 'nested'))
        logger.info('seed %d: nested chain ends in %s', seed, chain[-1].names())
        targets = [domain.splits(split.o_eval, t, derived_seed(seed, 'target', i))
                   for i, t in enumerate(chain, 1)]
        for j, tset in enumerate(chain, 1):
            data = domain.splits(split.o_train, tset, derived_seed(seed, 'pretrain', j))
            m = pretrain(cfg, data, len(split.o_train), seed, tag='T{}'.format(j))
            train_acc = evaluate(m, data.test)
            for i, target in enumerate(targets, 1):
                _, acc = linear_probe(m, target, train_config(cfg, cfg.probe_epochs,
                                                              derived_seed(seed, 'probe', j, i)))
                report.add(seed, 'nested', '{}->{}'.format(j, i), relation(j, i),
                           train_acc=train_acc, transfer_acc=acc)
    report.add_table('accuracy_grid', accuracy_grid(report.frame()))
    return report


def accuracy_grid(frame):
    """Mean transfer accuracy with training set size j as rows and evaluation size i as columns."""
    pairs = frame.factor_value.str.split('->', expand=True).astype(int)
    grid = frame.assign(train_k=pairs[0], eval_k=pairs[1]).pivot_table(
        index='train_k', columns='eval_k', values='transfer_acc', aggfunc='mean')
    return grid.sort_index().sort_index(axis=1)
