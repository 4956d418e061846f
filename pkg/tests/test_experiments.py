import json
import os

import numpy as np
import pandas as pd
import pytest
import yaml

from inv_transfer.transforms2d.dataset import AssetConfig
from inv_transfer.transforms2d.errors import BadParameterError
from inv_transfer.transforms2d.experiments import (RUNNERS, ExperimentConfig, ExperimentKind,
                                                   RunReport, build_config, run_experiment)
from inv_transfer.transforms2d.experiments.common import derived_seed, partition
from inv_transfer.transforms2d.experiments.factors import DISJOINT, SAME, gap_summary
from inv_transfer.transforms2d.experiments.nested import relation
from inv_transfer.transforms2d.experiments.report import REPORT_COLUMNS, aggregate
from inv_transfer.transforms2d.invariance import SensMatrix


def tiny(kind, **overrides):
    values = dict(classes=3, n_train=30, n_val=10, n_test=10, pretrain_epochs=1, probe_epochs=2,
                  finetune_epochs=1, sens_pairs=8, seeds=(0,), sample_grid=(10, 20),
                  nested_max_k=2, arch='mlp-small', rep_dim=8, batch_size=16,
                  finetune_sizes=(5, 10),
                  assets=AssetConfig(sprite_count=12, background_count=8))
    values.update(overrides)
    return ExperimentConfig.from_scale(kind, 'desk', **values)


def test_every_kind_has_a_runner():
    assert set(RUNNERS) == set(ExperimentKind)


def test_scale_presets():
    desk = ExperimentConfig.from_scale('factor_comparison')
    assert (desk.classes, desk.n_train, desk.pretrain_epochs, len(desk.seeds)) == (10, 5000, 20, 3)
    full = ExperimentConfig.from_scale('factor_comparison', 'full')
    assert full.sample_grid == (1000, 10000, 50000, 100000, 500000)
    assert (full.classes, full.probe_epochs, len(full.seeds)) == (30, 200, 10)


def test_config_validation():
    with pytest.raises(BadParameterError):
        tiny('factor_comparison', seeds=())
    with pytest.raises(BadParameterError):
        tiny('factor_comparison', factor='colour')
    with pytest.raises(BadParameterError):
        ExperimentConfig.from_scale('factor_comparison', 'huge')
    with pytest.raises(BadParameterError):
        ExperimentConfig.from_scale('factor_comparison', bogus=1)


def test_config_round_trip():
    cfg = tiny('ood_invariance')
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_build_config_layers(tmp_path):
    path = str(tmp_path / 'exp.yaml')
    with open(path, 'w') as f:
        yaml.safe_dump({'scale': 'desk', 'classes': 4, 'seeds': [5, 6],
                        'assets': {'sprite_count': 20}}, f)
    cfg = build_config('nested_mismatch', path, seeds=(9,), out=None)
    assert cfg.classes == 4 and cfg.seeds == (9,)
    assert cfg.assets.sprite_count == 20 and cfg.out == 'results'


def test_scale_flag_overrides_config_file(tmp_path):
    path = str(tmp_path / 'full.yaml')
    with open(path, 'w') as f:
        yaml.safe_dump({'scale': 'full', 'n_test': 7}, f)
    from_file = build_config('nested_mismatch', path)
    assert (from_file.scale, from_file.classes, from_file.n_test) == ('full', 30, 7)
    flagged = build_config('nested_mismatch', path, 'desk')
    assert (flagged.scale, flagged.classes, flagged.n_test) == ('desk', 10, 7)
    assert build_config('nested_mismatch', path, 'paper').scale == 'full'
    assert ExperimentConfig.from_scale('factor_comparison', 'paper') == \
        ExperimentConfig.from_scale('factor_comparison', 'full')


def test_factor_grids():
    assert tiny('factor_comparison').factor_grid() == (10, 20)
    assert len(tiny('factor_comparison', factor='architecture').factor_grid()) == 4
    assert tiny('factor_comparison', factor='class_relationship').factor_grid() == \
        ('sub', 'disj', 'same', 'sup')


def test_derived_seed_is_stable():
    assert derived_seed(1, 'train', 3) == derived_seed(1, 'train', 3)
    assert derived_seed(1, 'train', 3) != derived_seed(1, 'probe', 3)
    assert 0 <= derived_seed(7, 'x') < 2 ** 63


def test_partition_is_disjoint(base_set):
    parts = partition(base_set, [20, 10, 10], seed=1)
    assert [len(p) for p in parts] == [20, 10, 10]
    shrunk = partition(base_set, [100, 100], seed=1)
    assert sum(len(p) for p in shrunk) <= len(base_set)


def _check_report(report, rows):
    frame = report.frame()
    assert list(frame.columns) == REPORT_COLUMNS
    assert len(frame) == rows
    return frame


@pytest.mark.parametrize('factor,grid', [('sample_count', 2), ('architecture', 4),
                                         ('class_relationship', 4)])
def test_factor_comparison(factor, grid):
    cfg = tiny('factor_comparison', factor=factor)
    frame = _check_report(run_experiment(cfg), len(cfg.seeds) * grid * 2)
    assert set(frame.transform_rel) == {SAME, DISJOINT}
    assert frame.transfer_acc.between(0, 1).all()


def test_factor_comparison_on_augmented_domain():
    report = run_experiment(tiny('factor_comparison', domain='cifar', n_train=80, n_val=40,
                                 n_test=40, sample_grid=(40,)))
    assert 'synthetic-base' in report.flags
    frame = _check_report(report, 2)
    assert frame.transfer_acc.notna().all()


def test_gap_summary():
    frame = pd.DataFrame({
        'factor': ['n'] * 4, 'factor_value': ['1', '1', '2', '2'],
        'transform_rel': [SAME, DISJOINT, SAME, DISJOINT],
        'transfer_acc': [0.9, 0.5, 0.95, 0.7]})
    row = gap_summary(frame).loc['n']
    assert row.span_same == pytest.approx(0.05)
    assert row.span_disjoint == pytest.approx(0.2)
    assert row.mean_diff == pytest.approx(0.325)


def test_full_finetune():
    report = run_experiment(tiny('full_finetune'))
    frame = _check_report(report, 2 * 3)
    assert sorted(set(frame.factor_value)) == ['0', '10', '5']
    assert 'gap' in report.tables['finetune_gap'].columns


def test_irrelevant_features(tmp_path):
    report = run_experiment(tiny('irrelevant_features'))
    frame = _check_report(report, 4 * 4)
    assert set(frame.factor_value) == {'C/C', 'C+O/C', 'C+O/O', 'O/O'}
    assert frame.sens_same.notna().all() and frame.sens_other.notna().all()
    table = report.tables['pretraining_summary']
    assert list(table.columns[-2:]) == ['sens_background', 'sens_object']
    report.write(str(tmp_path))
    with open(str(tmp_path / 'report.json')) as f:
        payload = json.load(f)
    assert payload['flags'] == ['synthetic-base']
    assert payload['config']['kind'] == 'irrelevant_features'
    assert os.path.exists(str(tmp_path / 'pretraining_summary.csv'))


def test_relevance_availability():
    cfg = tiny('relevance_availability', alpha_grid=(0.0, 1.0), beta_grid=(0.5,))
    frame = _check_report(run_experiment(cfg), 3 * 2)
    assert set(frame.transform_rel) == {'base_labels', 'object_labels'}


def test_ood_invariance():
    report = run_experiment(tiny('ood_invariance'))
    # 19 models per family, 2 families, 4 evaluation domains
    frame = _check_report(report, 19 * 2 * 4)
    table = report.tables['sens_summary']
    assert list(table.columns) == ['in', 'mild', 'strong', 'cifar']
    assert set(table.index.get_level_values('row')) == {'Same', 'Other', 'None'}
    matrix = report.tables['sens_matrix_image_in']
    assert matrix.shape == (19, 18)
    assert frame.sens_other.notna().all()


def test_nested_mismatch():
    report = run_experiment(tiny('nested_mismatch'))
    frame = _check_report(report, 2 * 2)
    assert set(frame.transform_rel) == {'Superset', 'Same', 'Subset'}
    assert report.tables['accuracy_grid'].shape == (2, 2)
    assert relation(3, 1) == 'Superset' and relation(1, 3) == 'Subset'


def test_aggregate_recomputable():
    report = RunReport('x')
    for seed, acc in ((0, 0.5), (1, 0.7)):
        report.add(seed, 'f', 1, SAME, train_acc=1.0, transfer_acc=acc)
    agg = aggregate(report.frame())
    assert agg.runs.tolist() == [2]
    assert agg.transfer_acc_mean[0] == pytest.approx(0.6)
    assert agg.transfer_acc_std[0] == pytest.approx(np.std([0.5, 0.7], ddof=1))


@pytest.mark.slow
@pytest.mark.parametrize('factor', ['sample_count', 'architecture', 'class_relationship'])
def test_desk_same_transforms_transfer_better(factor):
    frame = run_experiment(ExperimentConfig.from_scale('factor_comparison', 'desk',
                                                       factor=factor)).frame()
    means = frame.groupby(['factor_value', 'transform_rel'], sort=False)[
        ['train_acc', 'transfer_acc']].mean().unstack('transform_rel')
    for value in means.index:
        assert means.loc[value, ('transfer_acc', SAME)] >= \
            means.loc[value, ('transfer_acc', DISJOINT)] + 0.10
        assert abs(means.loc[value, ('train_acc', SAME)] -
                   means.loc[value, ('train_acc', DISJOINT)]) <= 0.03


@pytest.mark.slow
def test_desk_ood_same_below_other():
    report = run_experiment(ExperimentConfig.from_scale('ood_invariance', 'desk'))
    table = report.tables['sens_summary']
    for family in ('image', 'random'):
        assert table.loc[(family, 'Same'), 'in'] < table.loc[(family, 'Other'), 'in']
        assert table.loc[(family, 'Same'), 'in'] < table.loc[(family, 'None'), 'in']
        assert table.loc[(family, 'Same'), 'mild'] < table.loc[(family, 'Other'), 'mild']
        mean = report.tables['sens_matrix_{}_in'.format(family)]
        matrix = SensMatrix(list(mean.index), list(mean.columns), mean.values)
        assert matrix.diagonal_wins() >= 15


@pytest.mark.slow
def test_desk_irrelevant_features_orderings():
    table = run_experiment(
        ExperimentConfig.from_scale('irrelevant_features', 'desk')).tables['pretraining_summary']
    assert table.loc['C+O/C', 'C+O/O'] < 0.30
    assert table.loc['C+O/O', 'C+O/O'] > 0.95
    assert table.loc['C+O/C', 'sens_object'] < table.loc['C/C', 'sens_object']
    assert (table['O/O'] >= 0.99).all()


@pytest.mark.slow
def test_desk_relevance_and_availability():
    frame = run_experiment(ExperimentConfig.from_scale('relevance_availability', 'desk')).frame()
    objects = frame[frame.transform_rel == 'object_labels']
    acc = objects.groupby(['factor', 'factor_value']).transfer_acc.mean()
    alpha = acc.loc['alpha'].rename(float).sort_index()
    assert (np.diff(alpha.values) >= -0.02).all()
    assert alpha.loc[1.0] >= 0.99
    beta = acc.loc['beta'].rename(float).sort_index()
    for value in beta.index[beta.index >= 0.2]:
        assert beta.loc[value] <= beta.loc[0.0] - 0.20


@pytest.mark.slow
def test_desk_finetune_gap_shrinks():
    gap = run_experiment(ExperimentConfig.from_scale('full_finetune', 'desk')).tables[
        'finetune_gap']['gap']
    assert gap.loc['200'] > 0
    assert gap.loc['2000'] < gap.loc['200']


@pytest.mark.slow
def test_desk_nested_superset_matches_diagonal():
    grid = run_experiment(ExperimentConfig.from_scale('nested_mismatch', 'desk')).tables['accuracy_grid']
    for i in grid.columns:
        for j in grid.index:
            if j > i:
                assert grid.loc[j, i] >= grid.loc[i, i] - 0.02
        # shrinking the training set below the target set never helps
        for j in range(1, i):
            assert grid.loc[j, i] <= grid.loc[j + 1, i] + 0.02
