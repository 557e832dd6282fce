import json

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)


def random_stable(rng, n, rho=0.9):
    """Random matrix rescaled to the requested spectral radius."""
    A = rng.standard_normal((n, n))
    r = np.max(np.abs(np.linalg.eigvals(A)))
    return A * (rho / r)


@pytest.fixture
def write_system(tmp_path):
    def _write(doc, name="system.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)
    return _write
