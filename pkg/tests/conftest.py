import pathlib

import numpy as np
import pytest

from tensorlab import f2

DATA_DIR = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def census222():
    return f2.full_census((2, 2, 2))


@pytest.fixture(scope="session")
def cache333(tmp_path_factory):
    """Full 3x3x3 census, computed once per session and cached on disk."""
    path = tmp_path_factory.mktemp("census") / "f2census-333.bin"
    tables = f2.full_census((3, 3, 3))
    f2.save_census(tables, path)
    return tables, path


@pytest.fixture(scope="session")
def census333(cache333):
    return cache333[0]


@pytest.fixture(scope="session")
def expected_table_rows():
    rows = []
    with open(DATA_DIR / "large_orbit_table.tsv") as fh:
        for line in fh:
            idx, rank, size, pattern = line.rstrip("\n").split("\t")
            rows.append((int(idx), int(rank), int(size), pattern))
    return rows


def random_unit_complex(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_invertible_complex(rng, n, min_det=1e-3):
    while True:
        M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        if abs(np.linalg.det(M)) > min_det:
            return M
