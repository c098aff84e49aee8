"""Общие фикстуры тестов index_workbench."""

import sys
from pathlib import Path

import pytest

# Добавить system/scripts в sys.path для импорта модулей верстака
SCRIPT_DIR = Path(__file__).parent.parent / "scripts"
sys.path.insert(0, str(SCRIPT_DIR))

from lattice_geometry import build_lattice  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: тяжёлые сценарии (минуты)")


@pytest.fixture
def torus8():
    return build_lattice({'kind': 'torus', 'extent': 8})


@pytest.fixture
def window_line():
    """Одномерное окно из 100 узлов."""
    return build_lattice({'kind': 'plane-window', 'extent': 100, 'dimension': 1})


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(0)
