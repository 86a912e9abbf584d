"""
Tiny configurations and datasets shared by the test modules
"""
from contrastforge.config import TrainConfig
from contrastforge.constants import PGAN
from contrastforge.dataset import Dataset, generate_dataset

TINY_SIZE = (16, 16, 16)
TINY_SUBJECTS = 3
TINY_SEED = 5

TINY_CONFIG = {
    'mode': PGAN,
    'seed': 3,
    'k': 1,
    'image_size': 16,
    'base_channels': 4,
    'depth': 2,
    'disc_base_channels': 4,
    'disc_layers': 1,
    'epochs': 2,
    'constant_epochs': 1,
    'steps_per_epoch': 3,
}


def tiny_config(**changes):
    options = dict(TINY_CONFIG)
    options.update(changes)
    return TrainConfig(**options)


def tiny_dataset(root, **options):
    generate_dataset(root, options.pop('subjects', TINY_SUBJECTS), options.pop('size', TINY_SIZE),
                     options.pop('seed', TINY_SEED), **options)
    return Dataset.load(root)
