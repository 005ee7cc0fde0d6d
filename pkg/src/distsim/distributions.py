"""Exact finite distributions, channels and information measures.

All logarithms are base 2.  Tables are dense numpy arrays; the flat order is
row-major (last coordinate fastest), which is also the JSON wire order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

SUM_TOL = 1e-12
ZERO_THRESHOLD = 1e-15
DEFAULT_CAP_CELLS = 2**26


class CapExceededError(ValueError):
    """Raised when an enumeration would exceed the configured cell cap."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.flags.writeable = False
    return arr


def check_cap(cells: int, cap: int | None, what: str = "table") -> None:
    cap = DEFAULT_CAP_CELLS if cap is None else cap
    if cells > cap:
        raise CapExceededError(f"{what} needs {cells} cells, cap is {cap}")


@dataclass(frozen=True)
class ProbabilityTable:
    """A pmf over a product alphabet, one axis per coordinate."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=float)
        if arr.ndim == 0:
            raise ValueError("probability table needs at least one coordinate")
        if not np.all(np.isfinite(arr)):
            raise ValueError("probability table has non-finite entries")
        if np.any(arr < 0):
            raise ValueError(f"negative probability {arr.min()!r}")
        total = math.fsum(arr.ravel())
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probs", _frozen(arr))

    @classmethod
    def from_flat(cls, shape: Sequence[int], probs: Sequence[float]) -> "ProbabilityTable":
        shape = tuple(int(s) for s in shape)
        if any(s <= 0 for s in shape):
            raise ValueError(f"alphabet sizes must be positive, got {shape}")
        flat = np.asarray(probs, dtype=float)
        if flat.size != math.prod(shape):
            raise ValueError(f"{flat.size} probabilities for shape {shape}")
        return cls(flat.reshape(shape))

    @classmethod
    def uniform(cls, *sizes: int) -> "ProbabilityTable":
        return cls(np.full(sizes, 1.0 / math.prod(sizes)))

    @classmethod
    def point_mass(cls, size: int, symbol: int) -> "ProbabilityTable":
        arr = np.zeros(size)
        arr[symbol] = 1.0
        return cls(arr)

    @property
    def alphabet_sizes(self) -> tuple[int, ...]:
        return self.probs.shape

    @property
    def arity(self) -> int:
        return self.probs.ndim

    def marginal(self, axes: Sequence[int]) -> "ProbabilityTable":
        """Marginal on ``axes``, kept in the order given."""
        axes = list(axes)
        drop = tuple(i for i in range(self.arity) if i not in axes)
        arr = self.probs.sum(axis=drop) if drop else self.probs
        kept = [i for i in range(self.arity) if i in axes]
        arr = np.transpose(arr, [kept.index(a) for a in axes])
        return ProbabilityTable(arr)

    def as_pair(self, left: Sequence[int], right: Sequence[int]) -> "ProbabilityTable":
        """Regroup coordinates into a 2-coordinate table (left block, right block)."""
        left, right = list(left), list(right)
        if sorted(left + right) != list(range(self.arity)):
            raise ValueError("left and right must partition the coordinates")
        arr = np.transpose(self.probs, left + right)
        nl = math.prod(self.alphabet_sizes[i] for i in left)
        return ProbabilityTable(arr.reshape(nl, -1))

    def to_json(self) -> dict:
        return {"shape": list(self.alphabet_sizes), "probs": self.probs.ravel().tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "ProbabilityTable":
        try:
            return cls.from_flat(obj["shape"], obj["probs"])
        except KeyError as exc:
            raise ValueError(f"probability table is missing field {exc}") from None


@dataclass(frozen=True)
class ConditionalKernel:
    """Row-stochastic matrix ``rows[input, output] = p(output | input)``.

    Multi-coordinate inputs are flattened row-major; ``in_shape`` remembers
    the original input axes.
    """

    rows: np.ndarray
    in_shape: tuple[int, ...] = field(default=())

    def __post_init__(self):
        arr = np.asarray(self.rows, dtype=float)
        if arr.ndim != 2:
            raise ValueError("kernel must be a 2-d array")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("kernel entries must be finite and nonnegative")
        sums = arr.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > SUM_TOL)
        if bad.size:
            raise ValueError(f"kernel row {bad[0]} sums to {sums[bad[0]]!r}")
        in_shape = tuple(self.in_shape) or (arr.shape[0],)
        if math.prod(in_shape) != arr.shape[0]:
            raise ValueError(f"in_shape {in_shape} does not match {arr.shape[0]} rows")
        object.__setattr__(self, "rows", _frozen(arr))
        object.__setattr__(self, "in_shape", in_shape)

    @property
    def in_size(self) -> int:
        return self.rows.shape[0]

    @property
    def out_size(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def deterministic(cls, mapping: Sequence[int], out_size: int) -> "ConditionalKernel":
        mapping = np.asarray(mapping, dtype=int)
        rows = np.zeros((mapping.size, out_size))
        rows[np.arange(mapping.size), mapping] = 1.0
        return cls(rows)

    @classmethod
    def bsc(cls, q: float) -> "ConditionalKernel":
        return cls(np.array([[1 - q, q], [q, 1 - q]]))

    def row(self, i: int) -> ProbabilityTable:
        return ProbabilityTable(self.rows[i])

    def to_json(self) -> dict:
        return {"shape": [*self.in_shape, self.out_size], "probs": self.rows.ravel().tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "ConditionalKernel":
        try:
            shape = [int(s) for s in obj["shape"]]
            probs = np.asarray(obj["probs"], dtype=float)
        except KeyError as exc:
            raise ValueError(f"kernel is missing field {exc}") from None
        if len(shape) < 2:
            raise ValueError("kernel shape needs input and output axes")
        if probs.size != math.prod(shape):
            raise ValueError(f"{probs.size} entries for kernel shape {shape}")
        return cls(probs.reshape(-1, shape[-1]), tuple(shape[:-1]))


@dataclass(frozen=True)
class CommonPartDecomposition:
    f_map: tuple[int, ...]
    g_map: tuple[int, ...]
    k_dist: ProbabilityTable
    entropy_bits: float

    @property
    def components(self) -> list[tuple[list[int], list[int]]]:
        """Per component id: (U symbols, V symbols)."""
        out = []
        for k in range(self.k_dist.alphabet_sizes[0]):
            out.append((
                [u for u, c in enumerate(self.f_map) if c == k],
                [v for v, c in enumerate(self.g_map) if c == k],
            ))
        return out


def load_table(path) -> ProbabilityTable:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return ProbabilityTable.from_json(obj)


# --- scalar measures -------------------------------------------------------

def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=float)
    pos = p > 0
    out[pos] = p[pos] * np.log2(p[pos])
    return out


def entropy(p: ProbabilityTable | np.ndarray) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    arr = p.probs if isinstance(p, ProbabilityTable) else np.asarray(p, dtype=float)
    return 0.0 - math.fsum(_xlogx(arr.ravel()))  # avoids -0.0


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs 0 <= x <= 1, got {x!r}")
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def _same_shape(p: ProbabilityTable, q: ProbabilityTable) -> None:
    if p.alphabet_sizes != q.alphabet_sizes:
        raise ValueError(f"shape mismatch {p.alphabet_sizes} vs {q.alphabet_sizes}")


def kl_divergence(p: ProbabilityTable, q: ProbabilityTable) -> float:
    """D(p || q) in bits; ``math.inf`` when p is not absolutely continuous wrt q."""
    _same_shape(p, q)
    a, b = p.probs.ravel(), q.probs.ravel()
    pos = a > 0
    if np.any(b[pos] == 0):
        return math.inf
    return float(math.fsum(a[pos] * np.log2(a[pos] / b[pos])))


def total_variation(p: ProbabilityTable, q: ProbabilityTable) -> float:
    _same_shape(p, q)
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def mutual_information(joint: ProbabilityTable) -> float:
    if joint.arity != 2:
        raise ValueError("mutual information needs a 2-coordinate table")
    px = joint.probs.sum(axis=1)
    py = joint.probs.sum(axis=0)
    return kl_divergence(joint, ProbabilityTable(np.outer(px, py)))


def subset_entropy(table: ProbabilityTable, axes: Sequence[int]) -> float:
    if not axes:
        return 0.0
    return entropy(table.marginal(axes))


@dataclass(frozen=True)
class DivergenceDecomposition:
    mi_terms: tuple[float, ...]
    marginal_divs: tuple[float, ...]

    @property
    def total(self) -> float:
        return math.fsum(self.mi_terms) + math.fsum(self.marginal_divs)


def divergence_decomposition(joint_n: ProbabilityTable, target: ProbabilityTable) -> DivergenceDecomposition:
    """Split D(p_{X^n Y^n} || target^n) into dependence and marginal terms.

    ``joint_n`` has coordinates ordered (X_1..X_n, Y_1..Y_n).  Term i of
    ``mi_terms`` is I(X_i,Y_i; X^{i-1},Y^{i-1}); term i of ``marginal_divs``
    is D(p_{X_i Y_i} || target).
    """
    if target.arity != 2 or joint_n.arity % 2:
        raise ValueError("need a 2-coordinate target and an even-arity joint")
    n = joint_n.arity // 2
    for i in range(n):
        if (joint_n.alphabet_sizes[i], joint_n.alphabet_sizes[n + i]) != target.alphabet_sizes:
            raise ValueError("joint coordinate sizes do not match the target")
    mi, md = [], []
    prefix_h = 0.0
    for i in range(n):
        pair = [i, n + i]
        prefix = [j for k in range(i) for j in (k, n + k)]
        h_pair = subset_entropy(joint_n, pair)
        h_all = subset_entropy(joint_n, prefix + pair)
        mi.append(max(h_pair + prefix_h - h_all, 0.0) if i else 0.0)
        prefix_h = h_all
        md.append(kl_divergence(joint_n.marginal(pair), target))
    return DivergenceDecomposition(tuple(mi), tuple(md))


def maximal_correlation(joint: ProbabilityTable) -> float:
    """HGR maximal correlation: second singular value of p(x,y)/sqrt(p(x)p(y))."""
    if joint.arity != 2:
        raise ValueError("maximal correlation needs a 2-coordinate table")
    arr = joint.probs
    px, py = arr.sum(axis=1), arr.sum(axis=0)
    arr = arr[px > 0][:, py > 0]
    px, py = px[px > 0], py[py > 0]
    if px.size < 2 or py.size < 2:
        return 0.0
    b = arr / np.sqrt(np.outer(px, py))
    s = np.linalg.svd(b, compute_uv=False)
    return float(min(max(s[1], 0.0), 1.0))


def gk_common_information(joint: ProbabilityTable, zero_threshold: float = ZERO_THRESHOLD) -> CommonPartDecomposition:
    """Gacs-Korner common part via components of the bipartite support graph.

    Component ids are assigned in order of the smallest U symbol they contain;
    components with no U symbol come last, ordered by V symbol.
    """
    if joint.arity != 2:
        raise ValueError("GK common information needs a 2-coordinate table")
    nu, nv = joint.alphabet_sizes
    rr, cc = np.nonzero(joint.probs > zero_threshold)
    graph = coo_matrix((np.ones(rr.size), (rr, cc + nu)), shape=(nu + nv, nu + nv))
    _, labels = connected_components(graph, directed=False)
    relabel: dict[int, int] = {}
    for lab in labels:
        relabel.setdefault(int(lab), len(relabel))
    comp = np.array([relabel[int(lab)] for lab in labels])
    f_map, g_map = comp[:nu], comp[nu:]
    k = np.zeros(len(relabel))
    np.add.at(k, f_map, joint.probs.sum(axis=1))
    k_dist = ProbabilityTable(k)
    return CommonPartDecomposition(tuple(int(c) for c in f_map), tuple(int(c) for c in g_map),
                                   k_dist, entropy(k_dist))


def product_extend(p: ProbabilityTable, n: int, cap_cells: int | None = None) -> ProbabilityTable:
    """i.i.d. n-fold product; coordinates ordered copy by copy."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    check_cap(p.probs.size ** n, cap_cells, f"{n}-fold product")
    arr = p.probs
    for _ in range(n - 1):
        arr = np.multiply.outer(arr, p.probs)
    return ProbabilityTable(arr)


def iid_pair_table(target: ProbabilityTable, n: int, cap_cells: int | None = None) -> ProbabilityTable:
    """target^n with coordinates ordered (X_1..X_n, Y_1..Y_n)."""
    if target.arity != 2:
        raise ValueError("need a 2-coordinate target")
    prod = product_extend(target, n, cap_cells)
    order = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    return ProbabilityTable(np.transpose(prod.probs, order))


def gk_tensorized(joint: ProbabilityTable, n: int, cap_cells: int | None = None,
                  zero_threshold: float = ZERO_THRESHOLD) -> CommonPartDecomposition:
    if joint.arity != 2:
        raise ValueError("need a 2-coordinate table")
    prod = product_extend(joint, n, cap_cells)
    pair = prod.as_pair(range(0, 2 * n, 2), range(1, 2 * n, 2))
    return gk_common_information(pair, zero_threshold)


def pair_product(j1: ProbabilityTable, j2: ProbabilityTable) -> ProbabilityTable:
    """Joint of ((X1,X2),(Y1,Y2)) for independent pairs (X1,Y1), (X2,Y2)."""
    arr = np.multiply.outer(j1.probs, j2.probs)  # axes x1, y1, x2, y2
    arr = np.transpose(arr, (0, 2, 1, 3))
    a, b = j1.alphabet_sizes[0] * j2.alphabet_sizes[0], j1.alphabet_sizes[1] * j2.alphabet_sizes[1]
    return ProbabilityTable(arr.reshape(a, b))


def apply_channels(joint: ProbabilityTable, kx: ConditionalKernel, ky: ConditionalKernel) -> ProbabilityTable:
    """Joint of (X,Y) when X ~ kx(.|U) and Y ~ ky(.|V) act separately on (U,V)."""
    if joint.arity != 2 or joint.alphabet_sizes != (kx.in_size, ky.in_size):
        raise ValueError("kernel inputs must match the joint's alphabets")
    return ProbabilityTable(kx.rows.T @ joint.probs @ ky.rows)


# --- DSBS helpers -----------------------------------------------------------

def dsbs(p: float) -> ProbabilityTable:
    """Doubly symmetric binary source: uniform pair with Pr(U != V) = p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"crossover must be in [0, 1], got {p!r}")
    return ProbabilityTable(np.array([[1 - p, p], [p, 1 - p]]) / 2)


def wyner_dsbs(q: float) -> float:
    """Wyner common information of DSBS(q), 0 <= q <= 1/2."""
    if not 0.0 <= q <= 0.5:
        raise ValueError(f"Wyner DSBS formula needs 0 <= q <= 1/2, got {q!r}")
    a = 0.5 - 0.5 * math.sqrt(max(1 - 2 * q, 0.0))
    return max(1 + binary_entropy(q) - 2 * binary_entropy(a), 0.0)


def wyner_dsbs_inverse(bits: float) -> float:
    """Smallest q with wyner_dsbs(q) <= bits."""
    if bits >= 1.0:
        return 0.0
    if bits <= 0.0:
        return 0.5
    return brentq(lambda q: wyner_dsbs(q) - bits, 0.0, 0.5, xtol=1e-15, rtol=1e-15)


def cross_source(p: float = 0.1) -> ProbabilityTable:
    """Four-symbol source with a binary cross on {0,1} and two isolated symbols."""
    p_u = np.array([0.4, 0.4, 0.1, 0.1])
    v_given_u = np.array([
        [1 - p, p, 0, 0],
        [p, 1 - p, 0, 0],
        [0, 0, 1, 0],
        [0, 0, 0, 1],
    ])
    return ProbabilityTable(p_u[:, None] * v_given_u)
