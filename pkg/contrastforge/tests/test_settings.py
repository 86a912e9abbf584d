from types import SimpleNamespace

import pytest

from contrastforge import settings
from contrastforge.exceptions import ConfigurationError
from contrastforge.settings import default_settings_dict, get_settings_value, resolve_threads


class TestSettings:

    def test_defaults(self):
        assert get_settings_value('instance_norm_eps') == 1e-5
        assert get_settings_value('adam_eps') == 1e-8
        assert get_settings_value('default_dtype') == 'float64'

    def test_unknown_key(self):
        assert get_settings_value('no_such_setting') is None

    def test_override_file_wins(self, monkeypatch):
        monkeypatch.setattr(settings, 'override_settings', SimpleNamespace(adam_eps=1e-6))
        assert get_settings_value('adam_eps') == 1e-6
        assert get_settings_value('instance_norm_eps') == default_settings_dict['instance_norm_eps']


class TestThreads:

    def test_explicit(self):
        assert resolve_threads(3) == 3

    def test_from_settings(self, monkeypatch):
        monkeypatch.delenv('CONTRASTFORGE_THREADS', raising=False)
        monkeypatch.setitem(default_settings_dict, 'threads', 2)
        assert resolve_threads() == 2

    def test_from_environment(self, monkeypatch):
        monkeypatch.setenv('CONTRASTFORGE_THREADS', '4')
        assert get_settings_value('threads') == 4
        assert resolve_threads() == 4
        assert resolve_threads(2) == 2

    @pytest.mark.parametrize('value', ['four', '2.5', ''])
    def test_environment_not_an_integer(self, monkeypatch, value):
        monkeypatch.setenv('CONTRASTFORGE_THREADS', value)
        with pytest.raises(ConfigurationError):
            get_settings_value('threads')
        # an explicit count never reads the environment
        assert resolve_threads(1) == 1

    @pytest.mark.parametrize('threads', [0, -2, 'many'])
    def test_invalid(self, threads):
        with pytest.raises(ConfigurationError):
            resolve_threads(threads)
