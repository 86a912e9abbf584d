"""
Run configuration

A TrainConfig is layered from its dataclass defaults, an INI file and
``key=value`` overrides, in that order.
"""
import configparser
import hashlib
import logging
from dataclasses import asdict, dataclass, fields, replace

from contrastforge.constants import (
    BASE_LR, BETA1, BETA2, CGAN_UNREG, CONTRASTS, LAMBDA_CYCLE, LAMBDA_PIX, MODES, PGAN, T1, T2)
from contrastforge.exceptions import ConfigurationError
from contrastforge.losses import LossWeights
from contrastforge.optim import LrSchedule
from contrastforge.utils import dict_merge

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

SECTIONS = {
    'run': ('mode', 'seed', 'checkpoint_every', 'steps_per_epoch'),
    'network': ('k', 'image_size', 'base_channels', 'depth', 'disc_base_channels', 'disc_layers'),
    'optimizer': ('beta1', 'beta2'),
    'schedule': ('base_lr', 'epochs', 'constant_epochs'),
    'loss': ('lambda_pix', 'lambda_cycle'),
    'data': ('dataset', 'source_contrast', 'target_contrast', 'unpaired'),
}
SECTION_OF = {key: section for section, keys in SECTIONS.items() for key in keys}

_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


@dataclass(frozen=True)
class TrainConfig:
    mode: str = PGAN
    seed: int = 0
    checkpoint_every: int = 0
    steps_per_epoch: int = 0
    k: int = 1
    image_size: int = 64
    base_channels: int = 16
    depth: int = 4
    disc_base_channels: int = 16
    disc_layers: int = 3
    beta1: float = BETA1
    beta2: float = BETA2
    base_lr: float = BASE_LR
    epochs: int = 20
    constant_epochs: int = 10
    lambda_pix: float = LAMBDA_PIX
    lambda_cycle: float = LAMBDA_CYCLE
    dataset: str = ''
    source_contrast: str = T1
    target_contrast: str = T2
    unpaired: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError("mode must be one of {0}, got {1}".format(', '.join(MODES), self.mode))
        if self.k < 1 or self.k % 2 == 0:
            raise ConfigurationError("k must be a positive odd number, got {0}".format(self.k))
        if self.epochs < 1:
            raise ConfigurationError("epochs must be at least 1, got {0}".format(self.epochs))
        if self.image_size % 2 ** self.depth:
            raise ConfigurationError("image_size {0} is not divisible by 2^depth ({1})".format(
                self.image_size, 2 ** self.depth))
        if self.checkpoint_every < 0 or self.steps_per_epoch < 0:
            raise ConfigurationError("checkpoint_every and steps_per_epoch must be non-negative")
        if self.source_contrast not in CONTRASTS or self.target_contrast not in CONTRASTS:
            raise ConfigurationError("contrasts must be among {0}".format(', '.join(CONTRASTS)))
        if self.source_contrast == self.target_contrast:
            raise ConfigurationError("source_contrast and target_contrast must differ")
        if self.unpaired and self.mode != CGAN_UNREG:
            raise ConfigurationError("unpaired sampling is only available in {0} mode".format(CGAN_UNREG))
        # validates the remaining groups
        self.schedule
        self.weights

    @property
    def schedule(self):
        return LrSchedule(base_lr=self.base_lr, total_epochs=self.epochs, constant_epochs=self.constant_epochs)

    @property
    def weights(self):
        return LossWeights(lambda_pix=self.lambda_pix, lambda_cycle=self.lambda_cycle)

    @property
    def betas(self):
        return self.beta1, self.beta2

    def override(self, **changes):
        return replace(self, **changes)


_FIELD_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _coerce(key, value):
    kind = _FIELD_TYPES[key]
    if not isinstance(value, str):
        return kind(value)
    text = value.strip()
    try:
        if kind is bool:
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError as e:
        raise ConfigurationError("Invalid value {0!r} for {1}".format(value, key), e)


def _nested(flat):
    nested = {section: {} for section in SECTIONS}
    for key, value in flat.items():
        nested[SECTION_OF[key]][key] = value
    return nested


def parse_overrides(overrides):
    """
    Turns ``["k=3", "lambda_pix=0"]`` into a nested section dict
    """
    parsed = {}
    for item in overrides or ():
        key, sep, value = item.partition('=')
        key = key.strip()
        if not sep:
            raise ConfigurationError("Override {0!r} is not of the form key=value".format(item))
        if key not in SECTION_OF:
            raise ConfigurationError("Unknown config key {0}".format(key))
        parsed.setdefault(SECTION_OF[key], {})[key] = value
    return parsed


def _read_parser(parser, source):
    layered = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigurationError("Unknown config section [{0}] in {1}".format(section, source))
        for key, value in parser[section].items():
            if SECTION_OF.get(key) != section:
                raise ConfigurationError("Unknown key {0} in section [{1}] of {2}".format(key, section, source))
            layered.setdefault(section, {})[key] = value
    return layered


def _build(layers):
    merged = _nested(asdict(TrainConfig()))
    for layer in layers:
        dict_merge(merged, layer)
    flat = {key: _coerce(key, value) for section in merged.values() for key, value in section.items()}
    return TrainConfig(**flat)


def load_config(path=None, overrides=None):
    layers = []
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as f:
                parser.read_file(f)
        except configparser.Error as e:
            raise ConfigurationError("Unreadable config file {0}".format(path), e)
        layers.append(_read_parser(parser, path))
    layers.append(parse_overrides(overrides))
    cfg = _build(layers)
    log.debug("resolved config %s", cfg)
    return cfg


def parse_config_text(text, source='<text>'):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigurationError("Unreadable config text from {0}".format(source), e)
    return _build([_read_parser(parser, source)])


def dump_config(cfg):
    """
    Canonical INI text of every field, grouped by section
    """
    values = asdict(cfg)
    lines = []
    for section, keys in SECTIONS.items():
        lines.append('[{0}]'.format(section))
        for key in keys:
            value = values[key]
            if isinstance(value, bool):
                value = str(value).lower()
            elif isinstance(value, float):
                value = repr(value)
            lines.append('{0} = {1}'.format(key, value))
        lines.append('')
    return '\n'.join(lines)


def write_config(path, cfg):
    with open(path, 'w') as f:
        f.write(dump_config(cfg))


def config_hash(cfg):
    return hashlib.sha256(dump_config(cfg).encode('utf-8')).hexdigest()
