import importlib.util
import logging
import os
from os import getenv

from contrastforge.exceptions import ConfigurationError

log = logging.getLogger(__name__)

default_settings_dict = {
    'threads': 1,
    'default_dtype': 'float64',
    'instance_norm_eps': 1e-5,
    'adam_eps': 1e-8,
    'log_level': 'WARNING',
}

# read on every lookup, after the override file
environment_settings = {
    'threads': 'CONTRASTFORGE_THREADS',
}

OVERRIDE_SETTINGS_PATH = getenv('CONTRASTFORGE_CONFIG', '/etc/contrastforge/global_default_settings.py')


def _load_override_settings(path):
    spec = importlib.util.spec_from_file_location('__contrastforge_override_settings__', path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


override_settings = {}
if os.path.isfile(OVERRIDE_SETTINGS_PATH):
    override_settings = _load_override_settings(OVERRIDE_SETTINGS_PATH)
    log.info('Override settings for contrastforge available {0}'.format(OVERRIDE_SETTINGS_PATH))
else:
    log.info('Override settings for contrastforge not available {0}'.format(OVERRIDE_SETTINGS_PATH))
    log.info('Using Default settings value')


def _parse_int(value, name):
    try:
        return int(value)
    except (TypeError, ValueError) as e:
        raise ConfigurationError("{0} must be an integer, got {1!r}".format(name, value), e)


def get_settings_value(key):
    """
    Fetches the value from the override file.
    If the value is not present, then tries the environment and then default_settings_dict
    """
    if hasattr(override_settings, key):
        return getattr(override_settings, key)

    variable = environment_settings.get(key)
    if variable is not None and getenv(variable) is not None:
        return _parse_int(getenv(variable), variable)

    if key in default_settings_dict:
        return default_settings_dict[key]

    return None


def resolve_threads(threads=None):
    """
    An explicit thread count wins over the environment and the settings file.
    """
    if threads is None:
        threads = get_settings_value('threads')
    threads = _parse_int(threads, 'threads')
    if threads < 1:
        raise ConfigurationError("threads must be at least 1, got {0}".format(threads))
    return threads
