"""Block-parity construction: a scheme whose per-coordinate statistics match a
DSBS target while Bob's channel stays far from any memoryless channel.

X^n = U^n.  Y^n is built block by block: every coordinate except the last of
a block is V through BSC(q); the last coordinate copies V with probability
1 - mu and otherwise becomes the parity of the block's other V-coordinates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    CapExceededError,
    ConditionalKernel,
    DivergenceDecomposition,
    ProbabilityTable,
    divergence_decomposition,
    dsbs,
)
from .fourier import popcount
from .schemes import (
    BooleanMap,
    RandomizedScheme,
    ScalarApproximation,
    _kl_cube,
    best_scalar_approximation,
    cube_to_table,
    dsbs_cube,
)

CAP_N = 10
RANDOMIZED_CAP_N = 8
DEFAULT_TV_THRESHOLD = 0.05

DELTA = "delta"
EPSILON = "epsilon"


@dataclass(frozen=True)
class BlockParityScheme:
    n: int
    block_len: int
    q: float
    mu: float
    variant: str
    p: float
    target_q: float  # crossover of the DSBS the scheme is scored against

    def __post_init__(self):
        if self.variant not in (DELTA, EPSILON):
            raise ValueError(f"variant must be {DELTA!r} or {EPSILON!r}")
        if self.block_len < 2:
            raise ValueError("block_len must be at least 2")
        if self.n < 1 or self.n % self.block_len:
            raise ValueError(f"block_len {self.block_len} must divide n = {self.n}")
        if not 0.0 <= self.q <= 0.5:
            raise ValueError(f"q must be in [0, 1/2], got {self.q!r}")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must be in [0, 1], got {self.mu!r}")
        if not 0.0 <= self.p <= 0.5 or not 0.0 <= self.target_q <= 0.5:
            raise ValueError("crossover probabilities must be in [0, 1/2]")

    @property
    def blocks(self) -> int:
        return self.n // self.block_len

    def last_coordinates(self) -> list[int]:
        """0-based indices of the parity-capable coordinates."""
        return [b * self.block_len + self.block_len - 1 for b in range(self.blocks)]


def build_scheme(n: int, block_len: int, p: float, target_delta: float) -> BlockParityScheme:
    """Parameters making every coordinate pair exactly DSBS(p + target_delta)."""
    if not 0.0 <= p < 0.5:
        raise ValueError(f"p must be in [0, 1/2), got {p!r}")
    if target_delta < 0 or p + target_delta > 0.5:
        raise ValueError("need 0 <= target_delta and p + target_delta <= 1/2")
    q = target_delta / (1 - 2 * p)
    mu = 2 * target_delta / (1 - 2 * p)
    return BlockParityScheme(n, block_len, q, mu, DELTA, p, p + target_delta)


def build_epsilon_variant(n: int, block_len: int, p: float, q_param: float, mu_param: float) -> BlockParityScheme:
    """Independently chosen q and mu, scored against the source crossover p itself."""
    return BlockParityScheme(n, block_len, q_param, mu_param, EPSILON, p, p)


def block_kernel(block_len: int, q: float, mu: float) -> np.ndarray:
    """Bob's 2^L x 2^L kernel for one block (bit i-1 is coordinate i)."""
    size = 1 << block_len
    low = block_len - 1
    v = np.arange(size)
    y = np.arange(size)
    head_mask = (1 << low) - 1
    flips = popcount((v[:, None] ^ y[None, :]) & head_mask)
    head = q**flips * (1 - q) ** (low - flips)
    y_last = (y >> low) & 1
    copy = ((v >> low) & 1)[:, None] == y_last[None, :]
    par = (popcount(v & head_mask) & 1)[:, None] == y_last[None, :]
    return head * ((1 - mu) * copy + mu * par)


def y_kernel(s: BlockParityScheme, cap_n: int = CAP_N) -> np.ndarray:
    if s.n > cap_n:
        raise CapExceededError(f"enumeration capped at n={cap_n}, got n={s.n}")
    blk = block_kernel(s.block_len, s.q, s.mu)
    full = np.ones((1, 1))
    for _ in range(s.blocks):
        # later blocks occupy higher bits, i.e. the leading Kronecker factor
        full = np.kron(blk, full)
    return full


def joint_cube(s: BlockParityScheme, cap_n: int = CAP_N) -> np.ndarray:
    return dsbs_cube(s.p, s.n) @ y_kernel(s, cap_n)


def to_randomized(s: BlockParityScheme, cap_n: int = RANDOMIZED_CAP_N) -> RandomizedScheme:
    """The same construction as a mixture of deterministic map pairs.

    Bob's randomness is a flip mask on the non-last coordinates plus one
    activation bit per block.
    """
    if s.n > cap_n:
        raise CapExceededError(f"randomized form capped at n={cap_n}, got n={s.n}")
    n, L = s.n, s.block_len
    lasts = s.last_coordinates()
    free = [i for i in range(n) if i not in lasts]
    v = np.arange(1 << n)
    maps, weights = [], []
    for flips in itertools.product((0, 1), repeat=len(free)):
        for active in itertools.product((0, 1), repeat=s.blocks):
            w = 1.0
            y = v.copy()
            for i, f in zip(free, flips):
                w *= s.q if f else 1 - s.q
                y ^= f << i
            for b, a in enumerate(active):
                w *= s.mu if a else 1 - s.mu
                if a:
                    last = lasts[b]
                    head = ((1 << (L - 1)) - 1) << (b * L)
                    par = popcount(v & head) & 1
                    y = (y & ~(1 << last)) | (par << last)
            maps.append(BooleanMap(y, n))
            weights.append(w)
    one = ProbabilityTable(np.ones(1))
    return RandomizedScheme((BooleanMap.identity(n),), tuple(maps), one, ProbabilityTable(np.array(weights)))


@dataclass(frozen=True)
class CounterexampleMetrics:
    flip_probs: tuple[float, ...]
    divergence_bits: float
    direct_kl_bits: float
    decomposition: DivergenceDecomposition
    scalar: ScalarApproximation

    @property
    def scalar_tv(self) -> float:
        return self.scalar.expected_tv

    def as_dict(self) -> dict:
        return {
            "flip_probs": list(self.flip_probs),
            "divergence_bits": self.divergence_bits,
            "direct_kl_bits": self.direct_kl_bits,
            "mi_terms": list(self.decomposition.mi_terms),
            "marginal_divs": list(self.decomposition.marginal_divs),
            "scalar_tv": self.scalar_tv,
            "scalar_tv_quantiles": self.scalar.tv_quantiles,
            "sigma": list(self.scalar.sigma),
        }


def flip_probabilities(cube: np.ndarray) -> tuple[float, ...]:
    n = cube.shape[0].bit_length() - 1
    idx = np.arange(1 << n)
    diff = idx[:, None] ^ idx[None, :]
    return tuple(float(cube[(diff >> i) & 1 == 1].sum()) for i in range(n))


def exact_metrics(s: BlockParityScheme, cap_n: int = CAP_N) -> CounterexampleMetrics:
    kern = y_kernel(s, cap_n)
    cube = dsbs_cube(s.p, s.n) @ kern
    decomp = divergence_decomposition(cube_to_table(cube), dsbs(s.target_q))
    direct = _kl_cube(cube, dsbs_cube(s.target_q, s.n))
    scalar = best_scalar_approximation(ConditionalKernel(kern), cap_n)
    return CounterexampleMetrics(flip_probabilities(cube), decomp.total, direct, decomp, scalar)


def block_factorization_gap(s: BlockParityScheme, cap_n: int = CAP_N) -> float:
    """Max |joint - product of its own per-block marginals|."""
    table = cube_to_table(joint_cube(s, cap_n))
    n, L = s.n, s.block_len
    prod = np.ones(())
    for b in range(s.blocks):
        coords = list(range(b * L, (b + 1) * L))
        axes = coords + [n + c for c in coords]
        m = table.marginal(axes).probs
        prod = np.multiply.outer(prod, m)
    # prod axes: (X_blk0, Y_blk0, X_blk1, Y_blk1, ...); reorder to (X..., Y...)
    order = [b * 2 * L + k for b in range(s.blocks) for k in range(L)]
    order += [b * 2 * L + L + k for b in range(s.blocks) for k in range(L)]
    prod = np.transpose(prod, order)
    return float(np.max(np.abs(table.probs - prod)))


def parity_correlation(p: float, block_len: int) -> tuple[float, float]:
    """Correlations of an always-active parity coordinate under DSBS(p)^L.

    Returns (E[Y_last * prod of the block's other X], E[X_last * Y_last]);
    the first equals (1 - 2p)^(L - 1) and the second is 0.
    """
    L = block_len
    cube = dsbs_cube(p, L)
    idx = np.arange(1 << L)
    head = (1 << (L - 1)) - 1
    y_last = 1 - 2 * (popcount(idx & head) & 1)          # function of v
    x_head = 1 - 2 * (popcount(idx & head) & 1)          # function of u
    x_last = 1 - 2 * ((idx >> (L - 1)) & 1)
    return float(x_head @ cube @ y_last), float(x_last @ cube @ y_last)


def binary_divergence(a: float, b: float) -> float:
    """d(a || b) in bits for Bernoulli parameters."""
    out = 0.0
    for x, y in ((a, b), (1 - a, 1 - b)):
        if x > 0:
            if y == 0:
                return math.inf
            out += x * math.log2(x / y)
    return out


def marginal_divergence_approx(p: float, q: float) -> float:
    """Small-q approximation of d(p*q || p), where p*q = p + q(1 - 2p)."""
    shift = q * (1 - 2 * p)
    return shift**2 / (2 * math.log(2) * p * (1 - p))
