import json
import logging
import os

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ['experiment', 'seed', 'factor', 'factor_value', 'transform_rel',
                  'train_acc', 'transfer_acc', 'sens_same', 'sens_other']
GROUP_KEYS = ['experiment', 'factor', 'factor_value', 'transform_rel']
VALUE_COLUMNS = ['train_acc', 'transfer_acc', 'sens_same', 'sens_other']


class RunReport(object):
    """Per-run rows plus derived tables for one experiment."""

    def __init__(self, experiment, config=None):
        self.experiment = experiment
        self.config = config or {}
        self.rows = []
        self.tables = {}
        self.flags = []

    def add(self, seed, factor, factor_value, transform_rel, train_acc=np.nan,
            transfer_acc=np.nan, sens_same=np.nan, sens_other=np.nan):
        self.rows.append({
            'experiment': self.experiment, 'seed': int(seed), 'factor': factor,
            'factor_value': str(factor_value), 'transform_rel': transform_rel,
            'train_acc': float(train_acc), 'transfer_acc': float(transfer_acc),
            'sens_same': float(sens_same), 'sens_other': float(sens_other),
        })

    def flag(self, name):
        if name not in self.flags:
            self.flags.append(name)

    def add_table(self, name, frame):
        self.tables[name] = frame

    def frame(self):
        return pd.DataFrame(self.rows, columns=REPORT_COLUMNS)

    def aggregates(self):
        return aggregate(self.frame())

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        frame = self.frame()
        frame.to_csv(os.path.join(out_dir, 'report.csv'), index=False)
        for name, table in self.tables.items():
            table.to_csv(os.path.join(out_dir, '{}.csv'.format(name)))
        payload = {
            'experiment': self.experiment,
            'flags': self.flags,
            'config': self.config,
            'rows': _records(frame),
            'aggregates': _records(self.aggregates()),
            'tables': sorted(self.tables),
        }
        with open(os.path.join(out_dir, 'report.json'), 'w') as f:
            json.dump(payload, f, indent=2, sort_keys=True)
        logger.info('wrote %d rows and %d tables to %s', len(frame), len(self.tables), out_dir)


def aggregate(frame):
    """Mean and sample standard deviation of every value column per factor cell."""
    grouped = frame.groupby(GROUP_KEYS, sort=False)[VALUE_COLUMNS]
    means = grouped.mean().add_suffix('_mean')
    stds = grouped.std(ddof=1).add_suffix('_std')
    counts = grouped.size().rename('runs')
    return pd.concat([means, stds, counts], axis=1).reset_index()


def _records(frame):
    return json.loads(frame.to_json(orient='records'))
