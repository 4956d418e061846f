import json
import os

import pandas as pd
import pytest
import yaml

from inv_transfer.run import dataset_config, main
from inv_transfer.transforms2d.arguments import get_args
from inv_transfer.transforms2d.experiments import build_config
from inv_transfer.transforms2d.storage import DatasetArchive

SMALL_ASSETS = {'sprite_count': 12, 'background_count': 8}


@pytest.fixture
def config_file(tmp_path):
    path = str(tmp_path / 'data.yaml')
    with open(path, 'w') as f:
        yaml.safe_dump({'objects': [0, 1, 2], 'seed': 5, 'assets': SMALL_ASSETS}, f)
    return path


@pytest.fixture
def data_dir(tmp_path, config_file):
    out = str(tmp_path / 'data')
    assert main(['generate', '--config', config_file, '--transforms', 'rotate,hue',
                 '--n-train', '24', '--n-val', '8', '--n-test', '8', '--out', out]) == 0
    return out


def test_defaults():
    args = get_args(['train', '--data', 'd'])
    assert (args.arch, args.rep_dim, args.lr, args.batch_size) == ('cnn-32', 128, 1e-3, 128)
    assert args.workers == 1 and args.num_threads == 1 and args.epochs is None
    args = get_args(['experiment', 'ood_invariance'])
    assert args.kind == 'ood_invariance' and args.scale is None


def test_paper_scale_name(tmp_path):
    args = get_args(['experiment', 'nested_mismatch', '--scale', 'paper'])
    assert args.scale == 'paper'
    path = str(tmp_path / 'exp.yaml')
    with open(path, 'w') as f:
        yaml.safe_dump({'scale': 'desk'}, f)
    cfg = build_config(args.kind, path, args.scale)
    assert cfg.scale == 'full' and cfg.classes == 30


def test_bad_arguments():
    with pytest.raises(SystemExit):
        get_args([])
    with pytest.raises(SystemExit):
        get_args(['train', '--data', 'd', '--workers', '0'])
    with pytest.raises(SystemExit):
        get_args(['experiment', 'unknown'])


def test_dataset_config_layers(config_file):
    cfg = dataset_config(get_args(['generate', '--config', config_file, '--objects', '4',
                                   '--n-train', '10']))
    assert cfg.objects == (0, 1, 2, 3) and cfg.n_train == 10 and cfg.seed == 5
    assert cfg.assets.sprite_count == 12 and cfg.transforms is None
    cfg = dataset_config(get_args(['generate', '--objects', '3,7', '--transforms', 'none',
                                   '--seed', '2']))
    assert cfg.objects == (3, 7) and cfg.seed == 2 and cfg.transforms is None


def test_generate(data_dir):
    assert sorted(f for f in os.listdir(data_dir) if f.endswith('.t2d')) == \
        ['test.t2d', 'train.t2d', 'val.t2d']
    train = DatasetArchive.load(os.path.join(data_dir, 'train.t2d'))
    assert len(train) == 24 and train.class_count == 3 and train.seed == 5
    assert train.manifest['config']['transforms'] is not None


def test_train_probe_sens(tmp_path, data_dir, config_file):
    model = str(tmp_path / 'model.t2dm')
    log = str(tmp_path / 'train.csv')
    assert main(['train', '--data', data_dir, '--arch', 'mlp-small', '--rep-dim', '8',
                 '--epochs', '2', '--log-path', log, '--out', model]) == 0
    assert os.path.exists(model) and len(pd.read_csv(log)) == 2

    probe = str(tmp_path / 'probe.json')
    assert main(['probe', '--model', model, '--data', data_dir, '--epochs', '2',
                 '--out', probe]) == 0
    with open(probe) as f:
        assert 0.0 <= json.load(f)['transfer_acc'] <= 1.0

    sens = str(tmp_path / 'sens.json')
    assert main(['sens', '--model', model, '--config', config_file, '--transforms', 'rotate',
                 '--pairs', '16', '--out', sens]) == 0
    with open(sens) as f:
        payload = json.load(f)
    assert payload['n_pairs'] == 16 and payload['sens'] >= 0.0
    assert main(['sens', '--model', model, '--config', config_file, '--pairs', '16']) == 2


def test_errors_exit_with_code_2(tmp_path):
    assert main(['train', '--data', str(tmp_path / 'missing')]) == 2
    assert main(['probe', '--model', str(tmp_path / 'none.t2dm'), '--data', str(tmp_path)]) == 2


def test_experiment_command(tmp_path):
    path = str(tmp_path / 'exp.yaml')
    with open(path, 'w') as f:
        yaml.safe_dump({'classes': 3, 'n_train': 30, 'n_val': 10, 'n_test': 10,
                        'pretrain_epochs': 1, 'probe_epochs': 1, 'nested_max_k': 2,
                        'arch': 'mlp-small', 'rep_dim': 8, 'assets': SMALL_ASSETS}, f)
    out = str(tmp_path / 'results')
    assert main(['experiment', 'nested_mismatch', '--config', path, '--seed', '4',
                 '--out', out]) == 0
    frame = pd.read_csv(os.path.join(out, 'nested_mismatch', 'report.csv'))
    assert len(frame) == 4 and set(frame.seed) == {4}
    assert os.path.exists(os.path.join(out, 'nested_mismatch', 'accuracy_grid.csv'))
