from __future__ import annotations

import numpy as np
import pytest

from drcover.model import Instance
from drcover.risk import var_cvar


def random_instance(rng: np.random.Generator, n_max: int = 12, I_max: int = 4, N_max: int = 10,
                    ps=(2.0, 3.0)) -> Instance:
    """Random small instance; the radius spans feasible and infeasible regimes."""
    n = int(rng.integers(3, n_max + 1))
    I = int(rng.integers(1, I_max + 1))
    N = int(rng.integers(2, N_max + 1))
    p = float(rng.choice(ps))
    eps = float(rng.choice([0.1, 0.2, 0.3]))
    density = rng.uniform(0.4, 0.9)
    samples = (rng.random((N, I, n)) < density).astype(np.int64)
    v = np.minimum(rng.integers(1, 4, size=I), n)
    c = rng.integers(1, 101, size=n).astype(float)
    # continuous radius avoids exact ties with the grid thresholds; most radii are
    # scaled to the all-ones score quantile, some exceed the largest possible score
    g_all = np.maximum((samples.sum(axis=-1) - v + 1).min(axis=-1), 0) ** (1.0 / p)
    top = -var_cvar(-g_all, eps)[0]
    if rng.random() < 0.1:
        ratio = rng.uniform(1.0, 1.3) * n ** (1.0 / p)
    else:
        ratio = rng.uniform(0.05, 1.15) * max(top, 0.5)
    return Instance(n=n, I=I, N=N, p=p, delta=ratio * eps, epsilon=eps, c=c, v=v, samples=samples)


def instance_suite(count: int = 200, seed: int = 20240101) -> list[Instance]:
    rng = np.random.default_rng(seed)
    return [random_instance(rng) for _ in range(count)]


@pytest.fixture(scope="session")
def suite() -> list[Instance]:
    return instance_suite()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
