import math

import numpy as np
import pytest

from distsim.distributions import ProbabilityTable, maximal_correlation
from distsim.schemes import BooleanMap, DeterministicScheme, SignedPermutation


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_table(rng, shape, sparsity=0.0):
    arr = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)
    if sparsity:
        arr = arr * (rng.random(shape) >= sparsity)
        if arr.sum() == 0:
            arr.flat[0] = 1.0
        arr = arr / math.fsum(arr.ravel())
    return ProbabilityTable(arr)


def random_signed_perm(rng, n):
    return SignedPermutation(tuple(int(v) for v in rng.permutation(n)),
                             tuple(int(v) for v in rng.choice([1, -1], n)))


def random_map(rng, n, kind):
    if kind == "any":
        return BooleanMap(rng.integers(0, 1 << n, 1 << n), n)
    if kind == "bijection":
        return BooleanMap(rng.permutation(1 << n), n)
    table = random_signed_perm(rng, n).to_map().table.copy()
    table[rng.integers(0, 1 << n)] = rng.integers(0, 1 << n)
    return BooleanMap(table, n)


def random_scheme(rng, n):
    kind = rng.choice(["any", "bijection", "near"])
    return DeterministicScheme(random_map(rng, n, kind), random_map(rng, n, kind))


def admissible_joint(rng, p, na, nb, spread=0.1):
    """(X, Y, A, B) with A, B independent, X-A-B, Y-B-A and rho <= 1-2p; None if rejected."""
    pa, pb = rng.dirichlet(np.ones(na)), rng.dirichlet(np.ones(nb))
    xa = np.clip(0.5 + rng.normal(0, spread, na), 0.01, 0.99)
    yb = np.clip(0.5 + rng.normal(0, spread, nb), 0.01, 0.99)
    arr = np.zeros((2, 2, na, nb))
    for a in range(na):
        for b in range(nb):
            px0, py0 = xa[a], yb[b]
            t = rng.uniform(max(0.0, px0 + py0 - 1), min(px0, py0))
            cell = np.array([[t, px0 - t], [py0 - t, 1 - px0 - py0 + t]])
            if maximal_correlation(ProbabilityTable(cell)) > 1 - 2 * p:
                return None
            arr[:, :, a, b] = cell * pa[a] * pb[b]
    return ProbabilityTable(arr / math.fsum(arr.ravel()))
