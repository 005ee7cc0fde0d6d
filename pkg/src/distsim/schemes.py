"""Simulation schemes for DSBS sources, analysed by exact enumeration.

Sequences in {-1,+1}^n are indexed by integers with the encoding of
:mod:`distsim.fourier` (bit i-1 set means coordinate i is -1).  Joints over
(X^n, Y^n) are handled internally as 2^n x 2^n matrices and exposed as
:class:`ProbabilityTable` objects with coordinates (X_1..X_n, Y_1..Y_n).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix

from .distributions import (
    CapExceededError,
    ConditionalKernel,
    ProbabilityTable,
    divergence_decomposition,
    dsbs,
)
from .fourier import (
    BooleanFunction,
    coordinate,
    dictator_distance,
    fourier_weight,
    popcount,
    wht,
)

DEFAULT_CAP_N = 10
HAMMING_CAP_N = 6
EXHAUSTIVE_SIGMA_N = 8
MARKOV_TOL = 1e-9
LN2 = math.log(2)
SIGNS = np.array([1.0, -1.0])  # symbol 0 is +1, symbol 1 is -1


# --- maps on the cube ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BooleanMap:
    """Map {-1,+1}^n -> {-1,+1}^m as an output-index table."""

    table: np.ndarray
    m: int

    def __eq__(self, other):
        return isinstance(other, BooleanMap) and self.m == other.m and np.array_equal(self.table, other.table)

    def __hash__(self):
        return hash((self.m, self.table.tobytes()))

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.int64)
        n = t.size.bit_length() - 1
        if t.ndim != 1 or (1 << n) != t.size:
            raise ValueError("map table length must be a power of two")
        if np.any(t < 0) or np.any(t >= (1 << self.m)):
            raise ValueError(f"map outputs must lie in [0, 2^{self.m})")
        t = t.copy()
        t.flags.writeable = False
        object.__setattr__(self, "table", t)

    @property
    def n(self) -> int:
        return self.table.size.bit_length() - 1

    @classmethod
    def identity(cls, n: int) -> "BooleanMap":
        return cls(np.arange(1 << n), n)

    @classmethod
    def from_functions(cls, funcs: Sequence[BooleanFunction]) -> "BooleanMap":
        if not funcs:
            raise ValueError("need at least one output function")
        n = funcs[0].n
        if any(f.n != n for f in funcs):
            raise ValueError("all component functions must share n")
        table = np.zeros(1 << n, dtype=np.int64)
        for i, f in enumerate(funcs):
            table |= f.bits << i
        return cls(table, len(funcs))

    @classmethod
    def xor_mask(cls, n: int, mask: int) -> "BooleanMap":
        return cls(np.arange(1 << n) ^ mask, n)

    def component(self, i: int) -> BooleanFunction:
        """Output coordinate i (0-based) as a Boolean function."""
        return BooleanFunction.from_bits((self.table >> i) & 1)

    def components(self) -> list[BooleanFunction]:
        return [self.component(i) for i in range(self.m)]

    def is_bijection(self) -> bool:
        return self.m == self.n and np.unique(self.table).size == self.table.size

    def kernel(self) -> ConditionalKernel:
        return ConditionalKernel.deterministic(self.table, 1 << self.m)

    def to_hex(self) -> list[str]:
        return [f.to_hex() for f in self.components()]

    @classmethod
    def from_hex(cls, tables: Sequence[str], n: int) -> "BooleanMap":
        return cls.from_functions([BooleanFunction.from_hex(t, n) for t in tables])


@dataclass(frozen=True)
class SignedPermutation:
    """x_i = signs[i] * u_{sigma[i]} (0-based sigma)."""

    sigma: tuple[int, ...]
    signs: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.sigma) != list(range(len(self.sigma))):
            raise ValueError(f"sigma {self.sigma} is not a permutation")
        if len(self.signs) != len(self.sigma) or any(s not in (1, -1) for s in self.signs):
            raise ValueError("signs must be +-1, one per coordinate")

    def to_map(self) -> BooleanMap:
        n = len(self.sigma)
        funcs = [BooleanFunction.dictator(n, j, s) for j, s in zip(self.sigma, self.signs)]
        return BooleanMap.from_functions(funcs)


def is_signed_permutation(m: BooleanMap) -> SignedPermutation | None:
    """Decompose m as a signed coordinate permutation, or return None."""
    if m.m != m.n:
        return None
    sigma, signs = [], []
    for f in m.components():
        spec = wht(f)
        first = [spec[1 << j] for j in range(m.n)]
        hits = [j for j, c in enumerate(first) if abs(abs(c) - 1.0) < 1e-12]
        if len(hits) != 1:
            return None
        sigma.append(hits[0])
        signs.append(1 if first[hits[0]] > 0 else -1)
    if len(set(sigma)) != m.n:
        return None
    return SignedPermutation(tuple(sigma), tuple(signs))


def preserves_hamming(m: BooleanMap, cap_n: int = HAMMING_CAP_N) -> bool:
    if m.n > cap_n:
        raise CapExceededError(f"pairwise Hamming check capped at n={cap_n}, got n={m.n}")
    idx = np.arange(1 << m.n)
    d_in = popcount(idx[:, None] ^ idx[None, :])
    t = m.table
    d_out = popcount(t[:, None] ^ t[None, :])
    return bool(np.array_equal(d_in, d_out))


def collision_probability(m: BooleanMap) -> float:
    """Pr(|m^{-1}(m(U))| > 1) for uniform U."""
    counts = np.bincount(m.table, minlength=1 << m.m)
    return float(np.sum(counts[m.table] > 1)) / m.table.size


# --- schemes --------------------------------------------------------------------

@dataclass(frozen=True)
class DeterministicScheme:
    f: BooleanMap
    g: BooleanMap

    def __post_init__(self):
        if not (self.f.n == self.g.n == self.f.m == self.g.m):
            raise ValueError("scheme maps must all be n-bit to n-bit with a shared n")

    @property
    def n(self) -> int:
        return self.f.n

    def kernels(self) -> tuple[np.ndarray, np.ndarray]:
        return self.f.kernel().rows, self.g.kernel().rows


@dataclass(frozen=True)
class RandomizedScheme:
    """Alice uses f_by_a[A], Bob g_by_b[B], with A, B independent of everything."""

    f_by_a: tuple[BooleanMap, ...]
    g_by_b: tuple[BooleanMap, ...]
    a_dist: ProbabilityTable
    b_dist: ProbabilityTable

    def __post_init__(self):
        if self.a_dist.alphabet_sizes != (len(self.f_by_a),):
            raise ValueError("a_dist size must match the number of f maps")
        if self.b_dist.alphabet_sizes != (len(self.g_by_b),):
            raise ValueError("b_dist size must match the number of g maps")
        ns = {m.n for m in self.f_by_a + self.g_by_b} | {m.m for m in self.f_by_a + self.g_by_b}
        if len(ns) != 1:
            raise ValueError("all maps must be n-bit to n-bit with a shared n")

    @property
    def n(self) -> int:
        return self.f_by_a[0].n

    @property
    def a_size(self) -> int:
        return len(self.f_by_a)

    @property
    def b_size(self) -> int:
        return len(self.g_by_b)

    @classmethod
    def from_deterministic(cls, s: DeterministicScheme) -> "RandomizedScheme":
        one = ProbabilityTable(np.ones(1))
        return cls((s.f,), (s.g,), one, one)

    def kernels(self) -> tuple[np.ndarray, np.ndarray]:
        kx = sum(w * m.kernel().rows for w, m in zip(self.a_dist.probs, self.f_by_a))
        ky = sum(w * m.kernel().rows for w, m in zip(self.b_dist.probs, self.g_by_b))
        return kx, ky


def bsc_noise_scheme(n: int, q: float, f: BooleanMap | None = None) -> RandomizedScheme:
    """Bob flips each coordinate independently with probability q."""
    masks = np.arange(1 << n)
    w = popcount(masks)
    b = ProbabilityTable(q**w * (1 - q) ** (n - w))
    f = f or BooleanMap.identity(n)
    return RandomizedScheme((f,), tuple(BooleanMap.xor_mask(n, int(z)) for z in masks),
                            ProbabilityTable(np.ones(1)), b)


# --- exact joints ---------------------------------------------------------------

def _check_n(n: int, cap_n: int | None) -> None:
    cap = DEFAULT_CAP_N if cap_n is None else cap_n
    if n > cap:
        raise CapExceededError(f"enumeration capped at n={cap}, got n={n}")


def dsbs_cube(p: float, n: int) -> np.ndarray:
    """DSBS(p)^n as a 2^n x 2^n matrix indexed by (u, v)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"crossover must be in [0, 1], got {p!r}")
    idx = np.arange(1 << n)
    d = popcount(idx[:, None] ^ idx[None, :])
    return (p**d) * ((1 - p) ** (n - d)) / (1 << n)


def cube_to_table(mat: np.ndarray) -> ProbabilityTable:
    """2^n x 2^n matrix -> table with coordinates (X_1..X_n, Y_1..Y_n)."""
    n = mat.shape[0].bit_length() - 1
    arr = np.asarray(mat).reshape((2,) * (2 * n))
    # reshape puts the highest bit first; coordinate i lives in bit i-1
    order = list(range(n - 1, -1, -1)) + list(range(2 * n - 1, n - 1, -1))
    return ProbabilityTable(np.transpose(arr, order))


def table_to_cube(table: ProbabilityTable) -> np.ndarray:
    n = table.arity // 2
    order = list(range(n - 1, -1, -1)) + list(range(2 * n - 1, n - 1, -1))
    arr = np.transpose(table.probs, np.argsort(order))
    return arr.reshape(1 << n, 1 << n)


def _push(q: np.ndarray, kx, ky) -> np.ndarray:
    if isinstance(kx, BooleanMap):
        kx = csr_matrix((np.ones(kx.table.size), (np.arange(kx.table.size), kx.table)),
                        shape=(kx.table.size, 1 << kx.m))
    if isinstance(ky, BooleanMap):
        ky = csr_matrix((np.ones(ky.table.size), (np.arange(ky.table.size), ky.table)),
                        shape=(ky.table.size, 1 << ky.m))
    return np.asarray((kx.T @ q) @ ky)


def induced_cube(s, p: float, cap_n: int | None = None) -> np.ndarray:
    _check_n(s.n, cap_n)
    q = dsbs_cube(p, s.n)
    if isinstance(s, DeterministicScheme):
        return _push(q, s.f, s.g)
    kx, ky = s.kernels()
    return kx.T @ q @ ky


def induced_joint(s: DeterministicScheme, p: float, cap_n: int | None = None) -> ProbabilityTable:
    """Exact joint of (f(U^n), g(V^n)) for (U^n, V^n) ~ DSBS(p)^n."""
    return cube_to_table(induced_cube(s, p, cap_n))


def induced_joint_randomized(s: RandomizedScheme, p: float, cap_n: int | None = None) -> ProbabilityTable:
    """Mixture over (a, b) of the per-randomness pushforwards.

    A and B are independent, so the mixture factors through the averaged
    kernels: sum_{a,b} w_a w_b F_a^T Q G_b = (sum_a w_a F_a)^T Q (sum_b w_b G_b).
    """
    return cube_to_table(induced_cube(s, p, cap_n))


def _kl_cube(p: np.ndarray, q: np.ndarray) -> float:
    a, b = p.ravel(), q.ravel()
    pos = a > 0
    if np.any(b[pos] == 0):
        return math.inf
    return float(math.fsum(a[pos] * np.log2(a[pos] / b[pos])))


def simulation_divergence(s, p: float, q: float, cap_n: int | None = None) -> float:
    """D(p_{X^n Y^n} || DSBS(q)^n) in bits."""
    return _kl_cube(induced_cube(s, p, cap_n), dsbs_cube(q, s.n))


def expected_hamming(s, p: float, cap_n: int | None = None) -> float:
    mat = induced_cube(s, p, cap_n)
    idx = np.arange(1 << s.n)
    return float(np.sum(mat * popcount(idx[:, None] ^ idx[None, :])))


def hamming_lower_bound(s: DeterministicScheme, p: float, q: float, cap_n: int | None = None) -> float:
    """Divergence lower bound from the expected Hamming distance alone.

    Tight exactly when both maps are bijections.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"target crossover must be in (0, 1), got {q!r}")
    n = s.n
    ed = expected_hamming(s, p, cap_n)
    src = p * math.log2((1 - p) / p) if p > 0 else 0.0
    return math.log2((1 - q) / q) * ed + n * (math.log2((1 - p) / (1 - q)) - src)


# --- Fourier level profile --------------------------------------------------------

@dataclass(frozen=True)
class CoordinateProfile:
    side: str
    index: int
    w0: float
    w1: float
    dictator_j: int
    dictator_b: int
    dictator_dist: float


@dataclass(frozen=True)
class LevelProfile:
    coords: tuple[CoordinateProfile, ...]
    divergence: float
    p: float

    @property
    def w0_sum(self) -> float:
        return math.fsum(c.w0 for c in self.coords)

    @property
    def w1_deficit(self) -> float:
        return math.fsum(1 - c.w1 for c in self.coords)

    @property
    def w0_bound(self) -> float:
        return 4 * LN2 * self.divergence

    @property
    def w1_bound(self) -> float:
        p = self.p
        if p <= 0 or p >= 0.5:
            return math.inf
        return 2 * self.divergence / (p * (1 - 2 * p))


def level_profile(s: DeterministicScheme, p: float = 0.1, cap_n: int | None = None) -> LevelProfile:
    coords = []
    for side, m in (("f", s.f), ("g", s.g)):
        for i, fn in enumerate(m.components()):
            fit = dictator_distance(fn)
            spec = wht(fn)
            coords.append(CoordinateProfile(side, i + 1, fourier_weight(spec, 0),
                                            fourier_weight(spec, 1), fit.j, fit.b, fit.dist))
    return LevelProfile(tuple(coords), simulation_divergence(s, p, p, cap_n), p)


# --- scalar approximation of a vector kernel ----------------------------------------

@dataclass(frozen=True)
class ScalarApproximation:
    sigma: tuple[int, ...]          # output coordinate sigma[i] is matched to input i (0-based)
    q: tuple[ConditionalKernel, ...]  # q[i](x | u_i) for the i-th coordinate of sigma(X^n)
    expected_tv: float
    tv_quantiles: dict[str, float]


def _first_level_corr(kernel: np.ndarray, n: int) -> np.ndarray:
    """corr[j, i] = E[X_j U_i] with U uniform."""
    size = 1 << n
    cu = np.stack([coordinate(n, i) for i in range(n)], axis=1)  # (u, i)
    cx = np.stack([coordinate(n, j) for j in range(n)], axis=1)  # (x, j)
    ex = kernel @ cx  # E[X_j | u]
    return (ex.T @ cu) / size


def _best_matching(score: np.ndarray) -> tuple[int, ...]:
    """perm[i] = output coordinate matched to input i, maximizing total score."""
    n = score.shape[0]
    s = np.round(score, 12)
    if n <= EXHAUSTIVE_SIGMA_N:
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
        totals = s[np.arange(n), perms].sum(axis=1)
        return tuple(int(v) for v in perms[int(np.argmax(np.round(totals, 10)))])
    _, cols = linear_sum_assignment(-s)
    return tuple(int(c) for c in cols)


def best_scalar_approximation(kernel: ConditionalKernel, cap_n: int | None = None) -> ScalarApproximation:
    """Closest memoryless approximation of a kernel {-1,+1}^n -> {-1,+1}^n.

    Coordinates are matched by maximizing the total |E[X_j U_i]| under a
    uniform input; each scalar channel is the exact conditional law of the
    matched output coordinate given its input coordinate.
    """
    rows = kernel.rows
    n = rows.shape[0].bit_length() - 1
    if rows.shape != (1 << n, 1 << n):
        raise ValueError("kernel must map {-1,+1}^n to {-1,+1}^n")
    _check_n(n, cap_n)
    size = 1 << n
    corr = _first_level_corr(rows, n)
    sigma = _best_matching(np.abs(corr).T)
    idx = np.arange(size)
    qs = []
    for i, j in enumerate(sigma):
        ubit = (idx >> i) & 1
        xbit = (idx >> j) & 1
        pj1 = rows @ xbit  # Pr(X_j = -1 | u)
        q = np.zeros((2, 2))
        for ub in (0, 1):
            sel = ubit == ub
            q[ub, 1] = pj1[sel].mean()
            q[ub, 0] = 1 - q[ub, 1]
        qs.append(ConditionalKernel(q))
    # permute output columns: new index y has bit i = bit sigma[i] of x
    perm_x = np.zeros(size, dtype=np.int64)
    for i, j in enumerate(sigma):
        perm_x |= ((idx >> j) & 1) << i
    permuted = np.zeros_like(rows)
    permuted[:, perm_x] = rows
    prod = np.ones((size, size))
    for i, q in enumerate(qs):
        ub = (idx >> i) & 1
        yb = (idx >> i) & 1
        prod *= q.rows[ub[:, None], yb[None, :]]
    tv = 0.5 * np.abs(permuted - prod).sum(axis=1)
    quant = {f"q{int(k * 100):02d}": float(np.quantile(tv, k)) for k in (0.1, 0.5, 0.9)}
    quant["max"] = float(tv.max())
    return ScalarApproximation(sigma, tuple(qs), float(tv.mean()), quant)


# --- conditional correlation and finite-instance bound checks -----------------------

def _xy_ab(joint: ProbabilityTable) -> np.ndarray:
    arr = joint.probs
    if arr.ndim != 4 or arr.shape[:2] != (2, 2):
        raise ValueError("need a table over (X, Y, A, B) with binary X and Y")
    return arr


@dataclass(frozen=True)
class ConditionalCorrelation:
    values: np.ndarray   # rho per (a, b); nan where flagged
    flagged: np.ndarray  # zero conditional variance or zero-mass cell

    @property
    def max(self) -> float:
        ok = ~self.flagged
        return float(self.values[ok].max()) if ok.any() else -math.inf


def _conditional_moments(arr: np.ndarray):
    s = SIGNS
    p_ab = arr.sum(axis=(0, 1))
    p_a, p_b = p_ab.sum(axis=1), p_ab.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ex_a = np.einsum("x,xyab->a", s, arr) / p_a
        ey_b = np.einsum("y,xyab->b", s, arr) / p_b
        exy_ab = np.einsum("x,y,xyab->ab", s, s, arr) / p_ab
    return p_ab, p_a, p_b, ex_a, ey_b, exy_ab


def conditional_correlation(joint: ProbabilityTable) -> ConditionalCorrelation:
    """rho(X;Y|a,b) = (E(XY|ab) - E(X|a)E(Y|b)) / sqrt(Var(X|a) Var(Y|b)).

    Symbol 0 of X and Y stands for +1, symbol 1 for -1.
    """
    arr = _xy_ab(joint)
    p_ab, _, _, ex_a, ey_b, exy_ab = _conditional_moments(arr)
    var = np.outer(1 - ex_a**2, 1 - ey_b**2)
    flagged = (p_ab <= 0) | ~(var > 1e-15)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = (exy_ab - np.outer(ex_a, ey_b)) / np.sqrt(var)
    rho = np.where(flagged, np.nan, rho)
    return ConditionalCorrelation(rho, flagged)


@dataclass(frozen=True)
class PowerBoundResult:
    premises_hold: bool
    lhs: float
    rhs: float
    eps: float
    reasons: tuple[str, ...] = ()

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-12


def power_bound_check(joint: ProbabilityTable, p: float, eps: float | None = None,
                      tol: float = MARKOV_TOL) -> PowerBoundResult:
    """Check E[E(X|A)^2 + E(Y|B)^2] <= 2 eps (1 + eps) / (1 - 2p) on one joint.

    ``eps`` defaults to max(|E X|, |E Y|, |E XY - (1-2p)|).  Premises (A and B
    independent, X-A-B and Y-B-A Markov, that bias bound, rho <= 1-2p) are
    verified numerically; the result only reports, it never raises.
    """
    arr = _xy_ab(joint)
    s = SIGNS
    p_ab, p_a, p_b, ex_a, ey_b, exy_ab = _conditional_moments(arr)
    reasons = []
    if np.max(np.abs(p_ab - np.outer(p_a, p_b))) > tol:
        reasons.append("A and B are dependent")
    p_xab = arr.sum(axis=1)
    p_xa = p_xab.sum(axis=2)
    p_yab = arr.sum(axis=0)
    p_yb = p_yab.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        x_given_ab = p_xab / p_ab
        x_given_a = p_xa / p_a
        y_given_ab = p_yab / p_ab
        y_given_b = p_yb / p_b
    live = p_ab > tol
    if np.any(np.abs(x_given_ab - x_given_a[:, :, None])[:, live] > tol):
        reasons.append("X-A-B is not Markov")
    if np.any(np.abs(y_given_ab - y_given_b[:, None, :])[:, live] > tol):
        reasons.append("Y-B-A is not Markov")
    ex = float(np.einsum("x,xyab->", s, arr))
    ey = float(np.einsum("y,xyab->", s, arr))
    exy = float(np.einsum("x,y,xyab->", s, s, arr))
    bias = max(abs(ex), abs(ey), abs(exy - (1 - 2 * p)))
    if eps is None:
        eps = bias
    elif bias > eps + tol:
        reasons.append("bias premise exceeds eps")
    cc = conditional_correlation(joint)
    if cc.max > 1 - 2 * p + tol:
        reasons.append("conditional correlation exceeds 1-2p")
    pa_ok, pb_ok = p_a > 0, p_b > 0
    lhs = float(np.sum(p_a[pa_ok] * ex_a[pa_ok] ** 2) + np.sum(p_b[pb_ok] * ey_b[pb_ok] ** 2))
    rhs = 2 * eps * (1 + eps) / (1 - 2 * p) if p < 0.5 else math.inf
    return PowerBoundResult(not reasons, lhs, rhs, eps, tuple(reasons))


@dataclass(frozen=True)
class ManouverResult:
    claim1_lhs: float
    claim2_lhs: float
    divergence: float
    eps: float | None

    @property
    def applicable(self) -> bool:
        return self.eps is None or self.divergence <= self.eps

    @property
    def holds(self) -> bool:
        bound = self.divergence if self.eps is None else self.eps
        tol = 1e-12
        return not self.applicable or (self.claim1_lhs <= bound + tol and self.claim2_lhs <= bound + tol)


def manouver_check(joint_n: ProbabilityTable, p: float, eps: float | None = None) -> ManouverResult:
    """Per-coordinate correlation and bias penalties against DSBS(p)^n.

    claim1 = (1/2ln2) sum_i (E X_i Y_i - (1-2p))^2, claim2 = (1/2ln2) sum_i E^2 X_i.
    Both are bounded by the divergence to DSBS(p)^n.
    """
    mat = table_to_cube(joint_n)
    n = joint_n.arity // 2
    c1 = c2 = 0.0
    for i in range(n):
        ci = coordinate(n, i).astype(float)
        exy = float(ci @ mat @ ci)
        ex = float(mat.sum(axis=1) @ ci)
        c1 += (exy - (1 - 2 * p)) ** 2
        c2 += ex**2
    div = _kl_cube(mat, dsbs_cube(p, n))
    return ManouverResult(c1 / (2 * LN2), c2 / (2 * LN2), div, eps)


def coordinate_joint(s: RandomizedScheme, p: float, i: int, cap_n: int | None = None) -> ProbabilityTable:
    """Joint of (X_i, Y_i, A, B) for coordinate i (0-based) of a randomized scheme."""
    _check_n(s.n, cap_n)
    q = dsbs_cube(p, s.n)
    out = np.zeros((2, 2, s.a_size, s.b_size))
    for a, (wa, fa) in enumerate(zip(s.a_dist.probs, s.f_by_a)):
        left = _push(q, fa, BooleanMap.identity(s.n))
        xi = (np.arange(1 << s.n) >> i) & 1
        lx = np.zeros((2, 1 << s.n))
        np.add.at(lx, xi, left)
        for b, (wb, gb) in enumerate(zip(s.b_dist.probs, s.g_by_b)):
            yi = (gb.table >> i) & 1
            cell = np.zeros((2, 2))
            np.add.at(cell.T, yi, lx.T)
            out[:, :, a, b] = wa * wb * cell
    return ProbabilityTable(out)


def joint_decomposition(s, p: float, q: float, cap_n: int | None = None):
    """Divergence decomposition of a scheme's joint against DSBS(q)."""
    return divergence_decomposition(induced_joint(s, p, cap_n) if isinstance(s, DeterministicScheme)
                                    else induced_joint_randomized(s, p, cap_n), dsbs(q))


# --- scheme files -----------------------------------------------------------------

def scheme_from_json(obj: dict):
    try:
        n = int(obj["n"])
    except KeyError:
        raise ValueError("scheme file is missing field 'n'") from None
    if "f_by_a" in obj or "g_by_b" in obj:
        fs = obj.get("f_by_a") or [obj["f"]]
        gs = obj.get("g_by_b") or [obj["g"]]
        a = ProbabilityTable(np.asarray(obj.get("a_dist", [1.0 / len(fs)] * len(fs)), float))
        b = ProbabilityTable(np.asarray(obj.get("b_dist", [1.0 / len(gs)] * len(gs)), float))
        return RandomizedScheme(tuple(BooleanMap.from_hex(t, n) for t in fs),
                                tuple(BooleanMap.from_hex(t, n) for t in gs), a, b)
    for key in ("f", "g"):
        if key not in obj:
            raise ValueError(f"scheme file is missing field {key!r}")
        if len(obj[key]) != n:
            raise ValueError(f"field {key!r} needs {n} truth tables, got {len(obj[key])}")
    return DeterministicScheme(BooleanMap.from_hex(obj["f"], n), BooleanMap.from_hex(obj["g"], n))


def scheme_to_json(s) -> dict:
    if isinstance(s, DeterministicScheme):
        return {"n": s.n, "f": s.f.to_hex(), "g": s.g.to_hex()}
    return {
        "n": s.n,
        "a_dist": s.a_dist.probs.tolist(),
        "f_by_a": [m.to_hex() for m in s.f_by_a],
        "b_dist": s.b_dist.probs.tolist(),
        "g_by_b": [m.to_hex() for m in s.g_by_b],
    }


def load_scheme(path):
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scheme_from_json(obj)
