import sys
from pathlib import Path

import numpy as np
import pytest

ROOT_DIR = Path(__file__).resolve().parent
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))


def _dense_vector(state, window):
    vec = np.zeros(window.length, dtype=complex)
    for index in state.window.indices():
        if window.contains(index):
            vec[index - window.offset] = state.amplitude(index)
    return vec


def _transposition(size, i, j, offset=0):
    perm = np.eye(size, dtype=complex)
    a, b = i - offset, j - offset
    perm[[a, b]] = perm[[b, a]]
    return perm


@pytest.fixture(autouse=True)
def _isolated_environment(monkeypatch):
    monkeypatch.delenv("SHIFTKRAUS_DATA", raising=False)
    monkeypatch.delenv("SHIFTKRAUS_DEBUG_LOGGING", raising=False)


@pytest.fixture
def data_dir(tmp_path):
    path = tmp_path / "data"
    path.mkdir()
    return path


@pytest.fixture
def dense_vector():
    """Zero-pad a state onto a window, the brute-force oracle for symbolic application."""

    return _dense_vector


@pytest.fixture
def transposition():
    """Permutation matrix exchanging absolute indices ``i`` and ``j`` on a window."""

    return _transposition
