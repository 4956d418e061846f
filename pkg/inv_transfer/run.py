import json
import logging
import os
import sys
import time

import torch

from inv_transfer.transforms2d.algo import DataSplits, TrainConfig, evaluate, linear_probe, train
from inv_transfer.transforms2d.arguments import get_args
from inv_transfer.transforms2d.dataset import (DatasetConfig, Split, archive_path,
                                               generate_dataset, generate_sens_pairs)
from inv_transfer.transforms2d.errors import T2DError
from inv_transfer.transforms2d.experiments import build_config, run_experiment
from inv_transfer.transforms2d.experiments.config import load_yaml
from inv_transfer.transforms2d.invariance import estimate_sens
from inv_transfer.transforms2d.model import (ModelConfig, init_model, load_checkpoint,
                                             representation_fn, save_checkpoint)
from inv_transfer.transforms2d.storage import DatasetArchive
from inv_transfer.transforms2d.transforms import TransformSet

logger = logging.getLogger('inv_transfer')


def _objects(value):
    if value is None:
        return None
    if ',' not in value:
        return tuple(range(int(value)))
    return tuple(int(v) for v in value.split(',') if v)


def _transforms(value):
    if value is None:
        return None
    if value.lower() == 'none':
        return 'none'
    return TransformSet(tuple(v.strip() for v in value.split(',') if v.strip()))


def dataset_config(args):
    """DatasetConfig from --config, then the dataset flags."""
    values = load_yaml(args.config) if args.config else {}
    values.setdefault('objects', list(range(10)))
    cfg = DatasetConfig.from_dict(values)
    changes = {'objects': _objects(args.objects), 'seed': args.seed,
               'resolution': args.resolution}
    for flag in ('n_train', 'n_val', 'n_test'):
        changes[flag] = getattr(args, flag, None)
    changes = {k: v for k, v in changes.items() if v is not None}
    tset = _transforms(args.transforms)
    if tset == 'none':
        changes['transforms'] = None
    elif tset is not None:
        changes['transforms'] = tset
    return cfg.replace(**changes)


def load_splits(directory):
    archives = []
    for split in Split:
        path = archive_path(directory, split)
        archives.append(DatasetArchive.load(path) if os.path.exists(path) or split == Split.TRAIN
                        else None)
    return DataSplits(*archives)


def cmd_generate(args):
    cfg = dataset_config(args)
    out = args.out or 'data'
    for split in Split:
        archive = generate_dataset(cfg, split, args.workers)
        archive.save(archive_path(out, split))
        if args.export_png:
            archive.export_png(os.path.join(out, split.value))
    return 0


def cmd_train(args):
    data = load_splits(args.data)
    images = data.train.images
    cfg = ModelConfig(args.arch, args.rep_dim, data.train.class_count, args.seed or 0,
                      (images.shape[3], images.shape[1], images.shape[2]))
    train_cfg = TrainConfig(lr=args.lr, epochs=50 if args.epochs is None else args.epochs,
                            batch_size=args.batch_size, seed=args.seed or 0,
                            log_path=args.log_path)
    start = time.time()
    m = train(init_model(cfg), data, train_cfg)
    if data.test is not None:
        logger.info('test accuracy %.4f after %d epochs (%.1fs)', evaluate(m, data.test),
                    m.epochs_seen, time.time() - start)
    save_checkpoint(m, args.out or 'model.t2dm')
    return 0


def cmd_probe(args):
    m = load_checkpoint(args.model)
    data = load_splits(args.data)
    probe_cfg = TrainConfig(lr=args.lr, epochs=200 if args.epochs is None else args.epochs,
                            batch_size=args.batch_size, seed=args.seed or 0,
                            log_path=args.log_path)
    _, acc = linear_probe(m, data, probe_cfg)
    logger.info('linear probe accuracy %.4f', acc)
    _write_json(args.out, {'model': args.model, 'data': args.data, 'transfer_acc': acc})
    return 0


def cmd_sens(args):
    m = load_checkpoint(args.model)
    cfg = dataset_config(args)
    if cfg.transforms is None:
        logger.error('sens needs at least one transform kind')
        return 2
    pairs = generate_sens_pairs(cfg, args.pairs, cfg.seed, workers=args.workers)
    report = estimate_sens(representation_fn(m), pairs)
    logger.info('sens %.4f +- %.4f over %d pairs (transforms %s)', report.sens, report.half_width,
                report.n_pairs, cfg.transform_names())
    _write_json(args.out, dict(report.to_dict(), config=cfg.to_dict()))
    return 0


def cmd_experiment(args):
    seeds = None
    if args.seeds is not None:
        seeds = tuple(range(args.seeds))
    elif args.seed is not None:
        seeds = (args.seed,)
    cfg = build_config(args.kind, args.config, args.scale, seeds=seeds, out=args.out,
                       cifar_dir=args.cifar_dir, workers=args.workers, factor=args.factor,
                       domain=args.domain)
    start = time.time()
    report = run_experiment(cfg)
    report.write(os.path.join(cfg.out, cfg.kind.value))
    logger.info('%s finished in %.1fs', cfg.kind.value, time.time() - start)
    return 0


def _write_json(path, payload):
    if not path:
        return
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2, sort_keys=True)


COMMANDS = {
    'generate': cmd_generate,
    'train': cmd_train,
    'probe': cmd_probe,
    'sens': cmd_sens,
    'experiment': cmd_experiment,
}


def main(argv=None):
    args = get_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    torch.set_num_threads(args.num_threads)
    try:
        return COMMANDS[args.command](args)
    except T2DError as e:
        logger.error('%s: %s', type(e).__name__, e)
        return 2


if __name__ == '__main__':
    sys.exit(main())
