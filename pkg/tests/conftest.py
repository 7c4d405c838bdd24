import json
from pathlib import Path

import numpy as np
import pytest

from rankverify import validate

DATA = Path(__file__).parent / "data"
SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"


@pytest.fixture(scope="session")
def normal_table():
    return json.loads((DATA / "normal_table.json").read_text())


def load_schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


def random_psd(rng, n, rank=None):
    a = rng.standard_normal((n, rank or n))
    scales = np.exp(rng.uniform(-1.0, 1.0, n))
    sigma = (a @ a.T) * np.outer(scales, scales) / (rank or n)
    return sigma + 0.05 * np.diag(np.diag(sigma))


def random_instance(rng, n_max=8, n_min=2):
    n = int(rng.integers(n_min, n_max + 1))
    sigma = random_psd(rng, n)
    x = rng.multivariate_normal(rng.normal(0.0, 2.0, n), sigma)
    k = int(rng.integers(1, n))
    return validate(x, sigma), k


def random_equicorrelated(rng, n):
    var = float(np.exp(rng.uniform(-1, 1)))
    rho = float(rng.uniform(-1.0 / (n - 1) + 0.02, 0.95))
    sigma = np.full((n, n), rho * var)
    np.fill_diagonal(sigma, var)
    return sigma
