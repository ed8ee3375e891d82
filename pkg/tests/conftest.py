import numpy as np
import pytest

from slimboard.interactions import InteractionMatrix


def make_matrix(rows) -> InteractionMatrix:
    """Dense rating grid (0 = absent) to an InteractionMatrix."""
    dense = np.asarray(rows, dtype=float)
    us, its = np.nonzero(dense)
    return InteractionMatrix.from_entries(
        dense.shape[0], dense.shape[1], us, its, dense[us, its]
    )


def random_matrix(rng: np.random.Generator, m: int, n: int, density: float = 0.5) -> InteractionMatrix:
    mask = rng.random((m, n)) < density
    # every item and user keeps at least one rating so columns are non-degenerate
    for u in range(m):
        if not mask[u].any():
            mask[u, int(rng.integers(n))] = True
    for i in range(n):
        if not mask[:, i].any():
            mask[int(rng.integers(m)), i] = True
    us, its = np.nonzero(mask)
    ratings = rng.integers(1, 6, size=len(us)).astype(float)
    return InteractionMatrix.from_entries(m, n, us, its, ratings)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
