import argparse

from inv_transfer.transforms2d.experiments.config import SCALE_ALIASES, SCALES, ExperimentKind
from inv_transfer.transforms2d.model import ARCHITECTURES


def _common(parser):
    parser.add_argument('--config', default=None,
                        help='YAML file with config values, overridden by explicit flags (default: None)')
    parser.add_argument('--seed', type=int, default=None,
                        help='random seed (default: taken from the config, else 0)')
    parser.add_argument('--out', default=None,
                        help='output path (default: depends on the command)')
    parser.add_argument('--workers', type=int, default=1,
                        help='threads used for data generation (default: 1)')
    parser.add_argument('--num-threads', type=int, default=1,
                        help='torch intra-op threads (default: 1)')
    parser.add_argument('--log-level', default='INFO',
                        help='logging level (default: INFO)')


def _dataset_flags(parser):
    parser.add_argument('--objects', default=None,
                        help='comma separated sprite ids, or a count n for ids 0..n-1 (default: 10)')
    parser.add_argument('--transforms', default=None,
                        help='comma separated transform kinds, or "none" (default: none)')
    parser.add_argument('--resolution', type=int, default=None,
                        help='image side length in pixels (default: 32)')


def _training_flags(parser):
    parser.add_argument('--data', required=True,
                        help='directory holding train.t2d, val.t2d and test.t2d')
    parser.add_argument('--epochs', type=int, default=None,
                        help='training epochs (default: 50 for train, 200 for probe)')
    parser.add_argument('--lr', type=float, default=1e-3,
                        help='Adam learning rate (default: 1e-3)')
    parser.add_argument('--batch-size', type=int, default=128,
                        help='minibatch size (default: 128)')
    parser.add_argument('--log-path', default=None,
                        help='CSV file for the per-epoch training log (default: None)')


def get_args(argv=None):
    parser = argparse.ArgumentParser(description='Transforms-2D invariance transfer')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    generate = commands.add_parser('generate', help='generate a Transforms-2D dataset')
    _common(generate)
    _dataset_flags(generate)
    generate.add_argument('--n-train', type=int, default=None,
                          help='training samples (default: 50000)')
    generate.add_argument('--n-val', type=int, default=None,
                          help='validation samples (default: 10000)')
    generate.add_argument('--n-test', type=int, default=None,
                          help='test samples (default: 10000)')
    generate.add_argument('--export-png', action='store_true', default=False,
                          help='also write every split as per-class PNG folders')

    train = commands.add_parser('train', help='train a classifier on a generated dataset')
    _common(train)
    _training_flags(train)
    train.add_argument('--arch', default='cnn-32', choices=sorted(ARCHITECTURES),
                       help='network architecture (default: cnn-32)')
    train.add_argument('--rep-dim', type=int, default=128,
                       help='representation size (default: 128)')

    probe = commands.add_parser('probe', help='linear probe of a trained model on a dataset')
    _common(probe)
    _training_flags(probe)
    probe.add_argument('--model', required=True,
                       help='checkpoint written by the train command')

    sens = commands.add_parser('sens', help='estimate the sensitivity of a trained model')
    _common(sens)
    _dataset_flags(sens)
    sens.add_argument('--model', required=True,
                      help='checkpoint written by the train command')
    sens.add_argument('--pairs', type=int, default=10000,
                      help='matched and unconstrained pairs (default: 10000)')

    experiment = commands.add_parser('experiment', help='run a full experiment protocol')
    experiment.add_argument('kind', choices=[k.value for k in ExperimentKind],
                            help='experiment to run')
    _common(experiment)
    experiment.add_argument('--scale', default=None,
                            choices=sorted(SCALES) + sorted(SCALE_ALIASES),
                            help='size preset; paper is another name for full (default: desk)')
    experiment.add_argument('--cifar-dir', default=None,
                            help='directory with CIFAR binary batches (default: synthetic base set)')
    experiment.add_argument('--seeds', type=int, default=None,
                            help='number of repeats, seeds 0..n-1 (default: from the scale)')
    experiment.add_argument('--factor', default=None,
                            help='factor for factor_comparison (default: sample_count)')
    experiment.add_argument('--domain', default=None,
                            help='transforms2d or cifar (default: transforms2d)')

    args = parser.parse_args(argv)
    if args.num_threads < 1:
        parser.error('--num-threads must be at least 1')
    if args.workers < 1:
        parser.error('--workers must be at least 1')
    return args
