import itertools

import numpy as np
import pandas as pd
import pytest

from inv_transfer.transforms2d.dataset import SensPairs, generate_sens_pairs
from inv_transfer.transforms2d.errors import BadParameterError, DegenerateRepresentationError
from inv_transfer.transforms2d.invariance import NONE_ROW, SensMatrix, estimate_sens, sens_matrix
from inv_transfer.transforms2d.model import ModelConfig, init_model
from inv_transfer.transforms2d.transforms import TransformKind, TransformSet


def flat(images):
    return np.asarray(images, dtype=np.float64).reshape(len(images), -1)


# toy world: 2 objects x 2 transforms x 2 backgrounds, 3-pixel images
WORLD = {key: np.array(value, dtype=np.uint8) for key, value in zip(
    itertools.product(range(2), range(2), range(2)),
    [[0, 10, 20], [5, 10, 40], [30, 0, 20], [35, 0, 40],
     [90, 10, 20], [99, 30, 40], [60, 0, 20], [61, 50, 40]])}


def _toy_pairs(n, seed):
    rng = np.random.RandomState(seed)
    o, b, t1, t2 = (rng.randint(0, 2, n) for _ in range(4))
    matched_a = np.stack([WORLD[(o[i], t1[i], b[i])] for i in range(n)])
    matched_b = np.stack([WORLD[(o[i], t2[i], b[i])] for i in range(n)])
    keys = list(WORLD)
    free_a = np.stack([WORLD[keys[k]] for k in rng.randint(0, 8, n)])
    free_b = np.stack([WORLD[keys[k]] for k in rng.randint(0, 8, n)])
    return SensPairs(matched_a, matched_b, free_a, free_b)


def _exhaustive_sens():
    matched = [np.linalg.norm(WORLD[(o, t1, b)].astype(float) - WORLD[(o, t2, b)])
               for o, b, t1, t2 in itertools.product(range(2), repeat=4)]
    free = [np.linalg.norm(WORLD[k1].astype(float) - WORLD[k2])
            for k1, k2 in itertools.product(WORLD, repeat=2)]
    return np.mean(matched) / np.mean(free)


def test_transform_blind_representation_has_zero_sens():
    pairs = _toy_pairs(500, 0)
    # object id only
    report = estimate_sens(lambda x: np.eye(2)[(flat(x)[:, 0] >= 60).astype(int)], pairs)
    assert report.sens == 0.0 and report.numerator_mean == 0.0


def test_constant_representation_is_degenerate():
    with pytest.raises(DegenerateRepresentationError):
        estimate_sens(lambda x: np.ones((len(x), 4)), _toy_pairs(50, 1))


def test_random_representation_has_unit_sens():
    rng = np.random.RandomState(3)
    report = estimate_sens(lambda x: rng.normal(size=(len(x), 16)), _toy_pairs(10000, 2))
    assert report.sens == pytest.approx(1.0, abs=0.05)


def test_matches_exhaustive_average():
    report = estimate_sens(flat, _toy_pairs(10000, 4))
    assert abs(report.sens - _exhaustive_sens()) < 2 * report.stderr + 1e-9


def test_stderr_shrinks_with_pairs():
    small = estimate_sens(flat, _toy_pairs(400, 5))
    big = estimate_sens(flat, _toy_pairs(6400, 5))
    assert big.stderr < small.stderr / 2
    assert small.half_width == pytest.approx(1.96 * small.stderr)


def test_isometry_and_scale_invariance():
    pairs = _toy_pairs(2000, 6)
    q, _ = np.linalg.qr(np.random.RandomState(0).normal(size=(3, 3)))
    offset = np.array([3.0, -1.0, 7.0])
    base = estimate_sens(flat, pairs).sens
    assert estimate_sens(lambda x: flat(x).dot(q) + offset, pairs).sens == pytest.approx(base, abs=1e-6)
    assert estimate_sens(lambda x: -2.5 * flat(x), pairs).sens == pytest.approx(base, abs=1e-6)


def test_pair_count_bounds():
    pairs = _toy_pairs(10, 7)
    assert estimate_sens(flat, pairs, n_pairs=5).n_pairs == 5
    with pytest.raises(BadParameterError):
        estimate_sens(flat, pairs, n_pairs=11)
    with pytest.raises(BadParameterError):
        estimate_sens(flat, pairs, n_pairs=0)


def test_sens_on_generated_pairs(small_config):
    cfg = small_config.replace(transforms=TransformSet(('rotate',)))
    pairs = generate_sens_pairs(cfg, 64, seed=1)
    report = estimate_sens(flat, pairs)
    assert 0.0 < report.sens
    assert report.to_dict()['n_pairs'] == 64


def test_sens_matrix_on_models(small_config, tmp_path):
    kinds = (TransformKind.ROTATE, TransformKind.INVERT)

    def pairs_for(kind):
        return generate_sens_pairs(small_config.replace(transforms=TransformSet((kind,))), 32,
                                   seed=kind.index)

    models = {None: init_model(ModelConfig('mlp-small', rep_dim=8)), TransformKind.ROTATE: flat,
              TransformKind.INVERT: init_model(ModelConfig('cnn-32', rep_dim=8))}
    matrix = sens_matrix(models, kinds, pairs_for)
    assert matrix.rows == [NONE_ROW, 'rotate', 'invert']
    assert matrix.cols == ['rotate', 'invert']
    assert matrix.cells.shape == (3, 2) and (matrix.cells >= 0).all()
    assert matrix.cell(TransformKind.ROTATE, 'invert') == matrix.cells[1, 1]
    path = str(tmp_path / 'matrix.csv')
    matrix.to_csv(path)
    frame = pd.read_csv(path, index_col=0)
    assert list(frame.index) == matrix.rows


def test_matrix_summary():
    cells = np.array([[0.5, 0.6, 0.7],
                      [0.1, 0.4, 0.5],
                      [0.6, 0.2, 0.4],
                      [0.3, 0.3, 0.9]])
    matrix = SensMatrix([NONE_ROW, 'a', 'b', 'c'], ['a', 'b', 'c'], cells)
    summary = matrix.summary()
    assert summary['same'] == pytest.approx((0.1 + 0.2 + 0.9) / 3)
    assert summary['other'] == pytest.approx((0.4 + 0.5 + 0.6 + 0.4 + 0.3 + 0.3) / 6)
    assert summary['none'] == pytest.approx(0.6)
    assert summary['diagonal_wins'] == 2 and summary['rows'] == 3
