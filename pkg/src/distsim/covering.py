"""Soft covering with random codebooks and the hybrid common-part scheme.

Sequences over a general alphabet are indexed row-major (coordinate 1 is the
slowest digit), matching :func:`distsim.distributions.product_extend`.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .distributions import (
    ConditionalKernel,
    ProbabilityTable,
    check_cap,
    entropy,
    gk_common_information,
    kl_divergence,
    mutual_information,
    product_extend,
)
from .report import ExperimentReport, ReportRow

GAMMA_GRID = np.geomspace(1e-3, 1 - 1e-3, 64)
_CHUNK_CELLS = 1 << 22


@dataclass(frozen=True)
class SoftCoveringInstance:
    p_U: ProbabilityTable
    p_W_given_U: ConditionalKernel
    p_X_given_UW: ConditionalKernel

    def __post_init__(self):
        nu = self.p_U.alphabet_sizes[0]
        if self.p_U.arity != 1:
            raise ValueError("p_U must be a marginal table")
        if self.p_W_given_U.in_size != nu:
            raise ValueError("p_W_given_U rows must match |U|")
        if self.p_X_given_UW.in_size != nu * self.p_W_given_U.out_size:
            raise ValueError("p_X_given_UW needs one row per (u, w) pair")

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.p_U.alphabet_sizes[0], self.p_W_given_U.out_size, self.p_X_given_UW.out_size

    def joint(self) -> np.ndarray:
        """p(u, w, x) as a |U| x |W| x |X| array."""
        nu, nw, nx = self.sizes
        x_uw = self.p_X_given_UW.rows.reshape(nu, nw, nx)
        return self.p_U.probs[:, None, None] * self.p_W_given_U.rows[:, :, None] * x_uw

    def p_X(self) -> ProbabilityTable:
        return ProbabilityTable(self.joint().sum(axis=(0, 1)))

    def to_json(self) -> dict:
        return {"p_U": self.p_U.to_json(), "p_W_given_U": self.p_W_given_U.to_json(),
                "p_X_given_UW": self.p_X_given_UW.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "SoftCoveringInstance":
        try:
            return cls(ProbabilityTable.from_json(obj["p_U"]),
                       ConditionalKernel.from_json(obj["p_W_given_U"]),
                       ConditionalKernel.from_json(obj["p_X_given_UW"]))
        except KeyError as exc:
            raise ValueError(f"instance is missing field {exc}") from None


@dataclass(frozen=True)
class Codebook:
    n: int
    words: np.ndarray  # (|U|^n, n) W symbols; row r is the codeword for u^n index r
    w_size: int

    @property
    def table(self) -> np.ndarray:
        """u^n index -> w^n index."""
        return np.ravel_multi_index(tuple(self.words.T), (self.w_size,) * self.n)


def rate_gap(inst: SoftCoveringInstance) -> float:
    """H(U) - I(X; U, W): the slack of the soft-covering condition."""
    nu, nw, nx = inst.sizes
    xuw = inst.joint().reshape(nu * nw, nx)
    return entropy(inst.p_U) - mutual_information(ProbabilityTable(xuw))


def _digits(n: int, base: int) -> np.ndarray:
    """(base^n, n) array of the digits of every sequence index."""
    return np.stack(np.unravel_index(np.arange(base**n), (base,) * n), axis=1)


def codebook_rng(seed: int, n: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(n, trial))))


def sample_codebook(inst: SoftCoveringInstance, n: int, seed: int, trial: int = 0,
                    cap_cells: int | None = None) -> Codebook:
    """Draw A(u^n) ~ p_{W|U}^n(.|u^n) independently for every u^n.

    One Philox stream per (seed, n, trial); row r and coordinate i always read
    uniform number r*n + i of that stream, so the codebook does not depend on
    how trials are scheduled.
    """
    nu, nw, _ = inst.sizes
    check_cap(nu**n * n, cap_cells, "codebook")
    digits = _digits(n, nu)
    uniforms = codebook_rng(seed, n, trial).random((nu**n, n))
    cdf = np.cumsum(inst.p_W_given_U.rows, axis=1)[:, :-1]
    words = (uniforms[..., None] >= cdf[digits]).sum(axis=-1)
    return Codebook(n, words, nw)


def output_distribution(inst: SoftCoveringInstance, cb: Codebook, cap_cells: int | None = None) -> np.ndarray:
    """p(x^n | A = cb) as a flat array over X^n (row-major)."""
    nu, nw, nx = inst.sizes
    n = cb.n
    check_cap(nx**n, cap_cells, "output distribution")
    digits = _digits(n, nu)
    p_un = np.prod(inst.p_U.probs[digits], axis=1)
    x_uw = inst.p_X_given_UW.rows.reshape(nu, nw, nx)
    out = np.zeros(nx**n)
    chunk = max(1, _CHUNK_CELLS // nx**n)
    for start in range(0, digits.shape[0], chunk):
        sl = slice(start, start + chunk)
        m = p_un[sl, None]
        for i in range(n):
            v = x_uw[digits[sl, i], cb.words[sl, i]]
            m = (m[:, :, None] * v[:, None, :]).reshape(m.shape[0], -1)
        out += m.sum(axis=0)
    return out


def covering_divergence(inst: SoftCoveringInstance, cb: Codebook, target: ProbabilityTable | None = None,
                        cap_cells: int | None = None) -> float:
    """Exact D(p_{X^n | A=cb} || target^n); target defaults to p_X."""
    target = inst.p_X() if target is None else target
    pn = output_distribution(inst, cb, cap_cells)
    tn = product_extend(target, cb.n, cap_cells)
    return kl_divergence(ProbabilityTable(pn.reshape(tn.alphabet_sizes)), tn)


def _run_trials(fn, trials: int, threads: int) -> list[float]:
    if threads <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(trials)))


def covering_experiment(inst: SoftCoveringInstance, n_list, trials: int, master_seed: int,
                        threads: int = 1, target: ProbabilityTable | None = None,
                        cap_cells: int | None = None, params: dict | None = None) -> ExperimentReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows = []
    for n in n_list:
        def one(t, n=n):
            return covering_divergence(inst, sample_codebook(inst, n, master_seed, t, cap_cells), target, cap_cells)
        rows.append(ReportRow.from_values(n, _run_trials(one, trials, threads)))
    base = {"experiment": "soft-cover", "n_list": list(n_list), "trials": trials,
            "rate_gap_bits": rate_gap(inst)}
    return ExperimentReport({**base, **(params or {})}, master_seed, rows)


def gamma_exponent(inst: SoftCoveringInstance, gamma: float) -> float:
    """log2 E[Z^gamma] with Z = p(U) p(X|U,W) / p(X) under p_{XUW}."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma!r}")
    nu, nw, nx = inst.sizes
    j = inst.joint()
    px = j.sum(axis=(0, 1))
    x_uw = inst.p_X_given_UW.rows.reshape(nu, nw, nx)
    live = j > 0
    z = np.zeros_like(j)
    pu = np.broadcast_to(inst.p_U.probs[:, None, None], j.shape)
    pxb = np.broadcast_to(px[None, None, :], j.shape)
    z[live] = pu[live] * x_uw[live] / pxb[live]
    return math.log2(math.fsum(j[live] * z[live] ** gamma))


def gamma_exponent_min(inst: SoftCoveringInstance, grid=GAMMA_GRID) -> tuple[float, float]:
    """(gamma, exponent) minimizing the exponent over the grid."""
    vals = [gamma_exponent(inst, g) for g in grid]
    k = int(np.argmin(vals))
    return float(grid[k]), float(vals[k])


# --- hybrid scheme ------------------------------------------------------------

@dataclass(frozen=True)
class HybridInstance:
    """W is drawn from the common part K; X from (U, W); Y from (V, W)."""

    p_UV: ProbabilityTable
    p_W_given_K: ConditionalKernel
    p_X_given_UW: ConditionalKernel
    p_Y_given_VW: ConditionalKernel

    def __post_init__(self):
        nu, nv = self.p_UV.alphabet_sizes
        nw = self.p_W_given_K.out_size
        if self.p_X_given_UW.in_size != nu * nw or self.p_Y_given_VW.in_size != nv * nw:
            raise ValueError("channel inputs must be (u, w) and (v, w) pairs")
        k = gk_common_information(self.p_UV).k_dist.alphabet_sizes[0]
        if self.p_W_given_K.in_size != k:
            raise ValueError(f"p_W_given_K needs {k} rows, one per common-part value")

    def tilde_instance(self) -> SoftCoveringInstance:
        """Soft-covering triple with K as the source and (X, Y) as the output."""
        gk = gk_common_information(self.p_UV)
        nu, nv = self.p_UV.alphabet_sizes
        nk = gk.k_dist.alphabet_sizes[0]
        nw = self.p_W_given_K.out_size
        nx, ny = self.p_X_given_UW.out_size, self.p_Y_given_VW.out_size
        x_uw = self.p_X_given_UW.rows.reshape(nu, nw, nx)
        y_vw = self.p_Y_given_VW.rows.reshape(nv, nw, ny)
        kern = np.full((nk, nw, nx * ny), 1.0 / (nx * ny))
        f = np.array(gk.f_map)
        for k in range(nk):
            mass = gk.k_dist.probs[k]
            if mass <= 0:
                continue
            uv = self.p_UV.probs * (f[:, None] == k) / mass
            # p(x, y | k, w) = sum_{u,v} p(u, v | k) p(x | u, w) p(y | v, w)
            kern[k] = np.einsum("uv,uwx,vwy->wxy", uv, x_uw, y_vw).reshape(nw, nx * ny)
        return SoftCoveringInstance(gk.k_dist, self.p_W_given_K, ConditionalKernel(kern.reshape(nk * nw, -1)))

    def rate_condition(self) -> tuple[float, float]:
        """(H(K), I(X,Y; K,W)); the scheme converges when the first is larger."""
        inst = self.tilde_instance()
        return entropy(inst.p_U), entropy(inst.p_U) - rate_gap(inst)

    def to_json(self) -> dict:
        return {"p_UV": self.p_UV.to_json(), "p_W_given_K": self.p_W_given_K.to_json(),
                "p_X_given_UW": self.p_X_given_UW.to_json(), "p_Y_given_VW": self.p_Y_given_VW.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "HybridInstance":
        try:
            return cls(ProbabilityTable.from_json(obj["p_UV"]),
                       ConditionalKernel.from_json(obj["p_W_given_K"]),
                       ConditionalKernel.from_json(obj["p_X_given_UW"]),
                       ConditionalKernel.from_json(obj["p_Y_given_VW"]))
        except KeyError as exc:
            raise ValueError(f"hybrid instance is missing field {exc}") from None


class NoCommonPartError(ValueError):
    pass


def hybrid_experiment(h: HybridInstance, target: ProbabilityTable, n_list, trials: int, seed: int,
                      threads: int = 1, cap_cells: int | None = None) -> ExperimentReport:
    """Codebooks K^n -> W^n drawn at random; exact D(p_{X^n Y^n | A} || target^n) per trial."""
    gk = gk_common_information(h.p_UV)
    if gk.entropy_bits <= 0:
        raise NoCommonPartError("source has no common part (C_GK = 0)")
    if target.arity != 2:
        raise ValueError("target must be a table over (X, Y)")
    flat_target = ProbabilityTable(target.probs.ravel())
    inst = h.tilde_instance()
    h_k, i_xy_kw = h.rate_condition()
    report = covering_experiment(inst, n_list, trials, seed, threads, flat_target, cap_cells,
                                 {"experiment": "hybrid", "c_gk_bits": h_k, "i_xy_kw_bits": i_xy_kw})
    return report


def load_json(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


# --- stock instances ----------------------------------------------------------

def wyner_soft_cover_instance(noise: float = 0.2) -> SoftCoveringInstance:
    """U uniform bit, W an independent uniform bit, X = W through BSC(noise)."""
    return SoftCoveringInstance(
        ProbabilityTable.uniform(2),
        ConditionalKernel(np.full((2, 2), 0.5)),
        ConditionalKernel(np.array([[1 - noise, noise], [noise, 1 - noise]] * 2)),
    )


def starved_instance(p_u0: float = 0.9) -> SoftCoveringInstance:
    """Biased U cannot cover a uniform X = W: negative rate gap."""
    return SoftCoveringInstance(
        ProbabilityTable(np.array([p_u0, 1 - p_u0])),
        ConditionalKernel(np.full((2, 2), 0.5)),
        ConditionalKernel(np.array([[1.0, 0.0], [0.0, 1.0]] * 2)),
    )


def cross_hybrid(q_wyner: float, p: float = 0.1) -> tuple[HybridInstance, ProbabilityTable]:
    """Hybrid scheme on the four-symbol cross source.

    On the binary component Alice and Bob share W ~ Bern(1/2) from the
    codebook and each pass it through BSC(a) with a*a = q_wyner; the two
    isolated symbols are mapped to fixed outputs.  Returns the instance and
    the DSBS target it simulates.
    """
    from .distributions import dsbs, cross_source

    a = 0.5 - 0.5 * math.sqrt(1 - 2 * q_wyner)
    bsc = np.array([[1 - a, a], [a, 1 - a]])
    x_uw = np.zeros((4, 2, 2))
    x_uw[0] = x_uw[1] = bsc
    x_uw[2, :, 0] = 1.0
    x_uw[3, :, 1] = 1.0
    w_k = np.array([[0.5, 0.5], [1.0, 0.0], [1.0, 0.0]])
    kern = ConditionalKernel(x_uw.reshape(8, 2))
    h = HybridInstance(cross_source(p), ConditionalKernel(w_k), kern, kern)
    return h, dsbs(0.8 * q_wyner)


def common_bit_hybrid(q_wyner: float) -> tuple[HybridInstance, ProbabilityTable]:
    """U = V = a uniform bit K; W is a fresh uniform bit; X, Y = W through BSC(a).

    The output pair is exactly DSBS(q_wyner), which is also the returned target.
    """
    from .distributions import dsbs

    a = 0.5 - 0.5 * math.sqrt(1 - 2 * q_wyner)
    bsc = np.array([[1 - a, a], [a, 1 - a]])
    kern = ConditionalKernel(np.concatenate([bsc, bsc]))
    p_uv = ProbabilityTable(np.eye(2) / 2)
    return HybridInstance(p_uv, ConditionalKernel(np.full((2, 2), 0.5)), kern, kern), dsbs(q_wyner)
