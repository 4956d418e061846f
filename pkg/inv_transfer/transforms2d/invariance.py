"""
Sensitivity of a representation to a transformation set.

    sens = mean ||rep(x1) - rep(x2)|| / C

where (x1, x2) share object and background and differ only in the sampled
transformation, and C is the same expectation over unconstrained pairs.
Numerator and C are estimated from independent pair streams.
"""
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from inv_transfer.transforms2d.errors import BadParameterError, DegenerateRepresentationError
from inv_transfer.transforms2d.model import ModelState, representation_fn
from inv_transfer.transforms2d.transforms import TransformKind

logger = logging.getLogger(__name__)

DEGENERATE_EPS = 1e-9
NONE_ROW = 'none'


@dataclass(frozen=True)
class SensReport:
    sens: float
    numerator_mean: float
    normalizer: float
    n_pairs: int
    stderr: float

    @property
    def half_width(self):
        """95% normal-approximation half-width."""
        return 1.96 * self.stderr

    def to_dict(self):
        return {'sens': self.sens, 'numerator_mean': self.numerator_mean,
                'normalizer': self.normalizer, 'n_pairs': self.n_pairs,
                'stderr': self.stderr, 'half_width': self.half_width}


def _distances(rep_fn, a, b, chunk):
    out = []
    for i in range(0, len(a), chunk):
        za = np.asarray(rep_fn(a[i:i + chunk]), dtype=np.float64)
        zb = np.asarray(rep_fn(b[i:i + chunk]), dtype=np.float64)
        out.append(np.linalg.norm(za.reshape(len(za), -1) - zb.reshape(len(zb), -1), axis=1))
    return np.concatenate(out)


def estimate_sens(rep_fn, pairs, n_pairs=None, eps=DEGENERATE_EPS, chunk=1024):
    n = len(pairs) if n_pairs is None else int(n_pairs)
    if n < 1 or n > len(pairs) or n > len(pairs.free_a):
        raise BadParameterError('n_pairs must lie in 1..{}, got {}'.format(len(pairs), n))
    d = _distances(rep_fn, pairs.matched_a[:n], pairs.matched_b[:n], chunk)
    e = _distances(rep_fn, pairs.free_a[:n], pairs.free_b[:n], chunk)
    num, c = d.mean(), e.mean()
    if c < eps:
        raise DegenerateRepresentationError(c, eps)
    sens = num / c
    # delta method for a ratio of independent means
    var_d = d.var(ddof=1) / n if n > 1 else 0.0
    var_e = e.var(ddof=1) / n if n > 1 else 0.0
    stderr = float(np.sqrt(var_d / c ** 2 + num ** 2 * var_e / c ** 4))
    return SensReport(float(sens), float(num), float(c), n, stderr)


def _label(row):
    if row is None:
        return NONE_ROW
    if isinstance(row, TransformKind):
        return row.value
    return str(row)


@dataclass(eq=False)
class SensMatrix:
    rows: list
    cols: list
    cells: np.ndarray
    reports: dict = None

    def cell(self, row, col):
        return float(self.cells[self.rows.index(_label(row)), self.cols.index(_label(col))])

    def _kind_rows(self):
        return [r for r in self.rows if r != NONE_ROW and r in self.cols]

    def same(self):
        vals = [self.cell(r, r) for r in self._kind_rows()]
        return float(np.mean(vals)) if vals else float('nan')

    def other(self):
        vals = [self.cell(r, c) for r in self._kind_rows() for c in self.cols if c != r]
        return float(np.mean(vals)) if vals else float('nan')

    def none(self):
        if NONE_ROW not in self.rows:
            return float('nan')
        return float(self.cells[self.rows.index(NONE_ROW)].mean())

    def diagonal_wins(self):
        """Number of transforms whose diagonal cell is below its row's off-diagonal mean."""
        wins = 0
        for r in self._kind_rows():
            off = [self.cell(r, c) for c in self.cols if c != r]
            if off and self.cell(r, r) < np.mean(off):
                wins += 1
        return wins

    def summary(self):
        return {'same': self.same(), 'other': self.other(), 'none': self.none(),
                'diagonal_wins': self.diagonal_wins(), 'rows': len(self._kind_rows())}

    def to_frame(self):
        return pd.DataFrame(self.cells, index=pd.Index(self.rows, name='train_transform'),
                            columns=self.cols)

    def to_csv(self, path):
        self.to_frame().to_csv(path)


def _as_rep_fn(model):
    if isinstance(model, ModelState):
        return representation_fn(model)
    return model


def sens_matrix(models, eval_kinds, pairs_for, n_pairs=None):
    """`models` maps a training TransformKind (or None for the baseline) to a model or rep_fn;
    `pairs_for(kind)` returns the SensPairs evaluating that transform."""
    rows = [_label(k) for k in models]
    cols = [_label(k) for k in eval_kinds]
    fns = [_as_rep_fn(m) for m in models.values()]
    cells = np.empty((len(rows), len(cols)))
    reports = {}
    for j, kind in enumerate(eval_kinds):
        pairs = pairs_for(kind)
        for i, fn in enumerate(fns):
            report = estimate_sens(fn, pairs, n_pairs)
            cells[i, j] = report.sens
            reports[(rows[i], cols[j])] = report
        logger.info('sens column %s done (%d models)', cols[j], len(rows))
    return SensMatrix(rows, cols, cells, reports)
