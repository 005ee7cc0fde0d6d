"""Fourier analysis of functions on the Hamming cube {-1,+1}^n.

Input index x encodes u in {-1,+1}^n by u_i = (-1)^(bit i-1 of x), so bit 0
maps to +1.  Subsets S of [n] are bitmasks in the same bit order, and the
character u^S evaluated at x is (-1)^popcount(x & S).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_DIRECT_CAP_N = 12


def popcount(x: np.ndarray | int) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros_like(x)
    while np.any(x):
        out += x & 1
        x = x >> 1
    return out


def _log2_len(size: int) -> int:
    n = size.bit_length() - 1
    if size < 1 or (1 << n) != size:
        raise ValueError(f"length {size} is not a power of two")
    return n


def character(n: int, s: int) -> np.ndarray:
    """Values of u^S over all 2^n inputs."""
    return 1 - 2 * (popcount(np.arange(1 << n) & s) & 1)


def coordinate(n: int, i: int) -> np.ndarray:
    """Values of u_i (i is 0-based) over all 2^n inputs."""
    return 1 - 2 * ((np.arange(1 << n) >> i) & 1)


@dataclass(frozen=True, eq=False)
class BooleanFunction:
    """f: {-1,+1}^n -> {-1,+1} as a truth table of +-1 values."""

    values: np.ndarray

    def __eq__(self, other):
        return isinstance(other, BooleanFunction) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def __post_init__(self):
        vals = np.asarray(self.values)
        _log2_len(vals.size)
        if vals.ndim != 1 or not np.all((vals == 1) | (vals == -1)):
            raise ValueError("Boolean function values must be exactly +1 or -1")
        vals = vals.astype(np.int8)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return _log2_len(self.values.size)

    @classmethod
    def dictator(cls, n: int, i: int, sign: int = 1) -> "BooleanFunction":
        return cls(sign * coordinate(n, i))

    @classmethod
    def parity(cls, n: int, subset: int | None = None) -> "BooleanFunction":
        return cls(character(n, (1 << n) - 1 if subset is None else subset))

    @classmethod
    def constant(cls, n: int, value: int = 1) -> "BooleanFunction":
        return cls(np.full(1 << n, value))

    @classmethod
    def majority(cls, n: int) -> "BooleanFunction":
        if n % 2 == 0:
            raise ValueError("majority needs odd n")
        total = sum(coordinate(n, i) for i in range(n))
        return cls(np.sign(total))

    @classmethod
    def from_bits(cls, bits) -> "BooleanFunction":
        """From 0/1 outputs (bit 1 means -1)."""
        return cls(1 - 2 * np.asarray(bits, dtype=int))

    @property
    def bits(self) -> np.ndarray:
        return ((1 - self.values) // 2).astype(np.int64)

    def to_hex(self) -> str:
        value = 0
        for idx in np.flatnonzero(self.bits):
            value |= 1 << int(idx)
        width = max(1, math.ceil(self.values.size / 4))
        return format(value, f"0{width}x")

    @classmethod
    def from_hex(cls, text: str, n: int) -> "BooleanFunction":
        text = text.strip().lower().removeprefix("0x")
        try:
            value = int(text, 16)
        except ValueError:
            raise ValueError(f"not a hex truth table: {text!r}") from None
        size = 1 << n
        if value >> size:
            raise ValueError(f"truth table {text!r} has bits beyond 2^{n}")
        bits = [(value >> i) & 1 for i in range(size)]
        return cls.from_bits(bits)


@dataclass(frozen=True)
class FourierSpectrum:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        _log2_len(c.size)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return _log2_len(self.coeffs.size)

    def __getitem__(self, subset: int) -> float:
        return float(self.coeffs[subset])

    def levels(self) -> np.ndarray:
        return popcount(np.arange(self.coeffs.size))


def _as_values(f) -> np.ndarray:
    if isinstance(f, BooleanFunction):
        return f.values.astype(float)
    return np.asarray(f, dtype=float)


def _butterfly(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    h = 1
    size = a.size
    while h < size:
        a = a.reshape(-1, 2, h)
        lo, hi = a[:, 0, :].copy(), a[:, 1, :]
        a[:, 0, :] += hi
        a[:, 1, :] = lo - hi
        a = a.reshape(size)
        h *= 2
    return a


def wht(f) -> FourierSpectrum:
    """Normalized Walsh-Hadamard transform, coeff[S] = E[f(U) U^S]."""
    vals = _as_values(f)
    n = _log2_len(vals.size)
    return FourierSpectrum(_butterfly(vals) / (1 << n))


def inverse_wht(spec: FourierSpectrum) -> np.ndarray:
    return _butterfly(spec.coeffs)


def wht_naive(f) -> FourierSpectrum:
    """O(4^n) transform straight from the definition; used as a test oracle."""
    vals = _as_values(f)
    n = _log2_len(vals.size)
    coeffs = [float(np.dot(vals, character(n, s))) / (1 << n) for s in range(1 << n)]
    return FourierSpectrum(np.array(coeffs))


def _spectrum(f) -> FourierSpectrum:
    return f if isinstance(f, FourierSpectrum) else wht(f)


def fourier_weight(spec, k: int) -> float:
    spec = _spectrum(spec)
    if not 0 <= k <= spec.n:
        raise ValueError(f"level {k} outside 0..{spec.n}")
    c = spec.coeffs[spec.levels() == k]
    return float(np.dot(c, c))


def level_weights(spec) -> np.ndarray:
    spec = _spectrum(spec)
    return np.bincount(spec.levels(), weights=spec.coeffs**2, minlength=spec.n + 1)


def _check_pair(f, g, p) -> tuple[FourierSpectrum, FourierSpectrum]:
    sf, sg = _spectrum(f), _spectrum(g)
    if sf.n != sg.n:
        raise ValueError(f"input sizes differ: {sf.n} vs {sg.n}")
    if not 0.0 <= p <= 0.5:
        raise ValueError(f"crossover must be in [0, 1/2], got {p!r}")
    return sf, sg


def correlated_expectation(f, g, p: float) -> float:
    """E[f(U^n) g(V^n)] for (U,V) ~ DSBS(p)^n via the noise-weighted spectrum."""
    sf, sg = _check_pair(f, g, p)
    rho = (1 - 2 * p) ** sf.levels()
    return float(np.sum(rho * sf.coeffs * sg.coeffs))


def correlated_expectation_direct(f, g, p: float, cap_n: int = DEFAULT_DIRECT_CAP_N) -> float:
    """Same expectation by summing over all 4^n input pairs."""
    fv, gv = _as_values(f), _as_values(g)
    n = _log2_len(fv.size)
    if gv.size != fv.size:
        raise ValueError("input sizes differ")
    if n > cap_n:
        raise ValueError(f"direct enumeration capped at n={cap_n}, got n={n}")
    if not 0.0 <= p <= 0.5:
        raise ValueError(f"crossover must be in [0, 1/2], got {p!r}")
    idx = np.arange(1 << n)
    d = popcount(idx[:, None] ^ idx[None, :])
    w = (p ** d) * ((1 - p) ** (n - d)) / (1 << n)
    return float(fv @ w @ gv)


def corrbound_rhs(f, g, p: float) -> float:
    """Upper bound (1/2) sum_k (1-2p)^k (W^k[f] + W^k[g])."""
    sf, sg = _check_pair(f, g, p)
    wf, wg = level_weights(sf), level_weights(sg)
    rho = (1 - 2 * p) ** np.arange(sf.n + 1)
    return float(0.5 * np.sum(rho * (wf + wg)))


@dataclass(frozen=True)
class DictatorFit:
    j: int      # 1-based coordinate
    b: int
    dist: float


def dictator_distance(f: BooleanFunction) -> DictatorFit:
    """Closest signed dictator b*u_j under uniform input.

    Pr(f != b u_j) = (1 - b f_hat({j})) / 2, so the best fit maximizes
    |f_hat({j})|.  Ties go to the smallest j, then b = +1.
    """
    spec = wht(f)
    first = np.array([spec[1 << i] for i in range(spec.n)])
    mags = np.round(np.abs(first), 12)
    j = int(np.argmax(mags))
    b = 1 if first[j] >= 0 or mags[j] == 0 else -1
    dist = (1 - b * first[j]) / 2
    return DictatorFit(j + 1, b, float(dist))
