import pytest

from contrastforge.tests.data import tiny_dataset


@pytest.fixture(scope='session')
def registered_dataset(tmp_path_factory):
    return tiny_dataset(tmp_path_factory.mktemp('registered'))


@pytest.fixture(scope='session')
def misaligned_dataset(tmp_path_factory):
    return tiny_dataset(tmp_path_factory.mktemp('misaligned'), misaligned=True)
