import math

import numpy as np
import pytest

from distsim.distributions import CapExceededError
from distsim.counterexample import (
    BlockParityScheme,
    binary_divergence,
    block_factorization_gap,
    block_kernel,
    build_epsilon_variant,
    build_scheme,
    exact_metrics,
    joint_cube,
    marginal_divergence_approx,
    parity_correlation,
    to_randomized,
    y_kernel,
)
from distsim.schemes import induced_cube


def test_parameters_for_standard_instance():
    s = build_scheme(8, 4, 0.1, 0.05)
    assert s.q == pytest.approx(0.0625, abs=1e-15)
    assert s.mu == pytest.approx(0.125, abs=1e-15)
    assert s.target_q == pytest.approx(0.15)
    assert s.last_coordinates() == [3, 7]


def test_zero_delta_is_identity():
    s = build_scheme(4, 2, 0.1, 0.0)
    assert s.q == 0.0 and s.mu == 0.0
    assert np.array_equal(y_kernel(s), np.eye(16))
    assert exact_metrics(s).divergence_bits == pytest.approx(0.0, abs=1e-13)


def test_full_activation_on_pairs_copies_the_other_bit():
    k = block_kernel(2, 0.0, 1.0)
    # v = (v1, v2) as bits 0, 1; y2 must equal v1 and y1 = v1
    for v in range(4):
        y = int(np.argmax(k[v]))
        assert k[v, y] == 1.0
        assert (y >> 1) & 1 == v & 1 and y & 1 == v & 1


def test_block_kernel_rows_stochastic():
    k = block_kernel(4, 0.1, 0.3)
    assert np.allclose(k.sum(axis=1), 1.0)


def test_validation():
    with pytest.raises(ValueError):
        build_scheme(8, 3, 0.1, 0.05)
    with pytest.raises(ValueError):
        build_scheme(8, 4, 0.3, 0.3)
    with pytest.raises(ValueError):
        build_scheme(8, 1, 0.1, 0.05)
    with pytest.raises(ValueError):
        build_epsilon_variant(4, 2, 0.1, 0.6, 0.1)
    with pytest.raises(ValueError):
        BlockParityScheme(4, 2, 0.1, 1.5, "delta", 0.1, 0.1)
    with pytest.raises(CapExceededError):
        exact_metrics(build_scheme(12, 4, 0.1, 0.05))


def test_randomized_form_matches_kernel():
    for n, L in ((4, 2), (6, 3), (4, 4)):
        s = build_scheme(n, L, 0.1, 0.05)
        assert np.allclose(induced_cube(to_randomized(s), 0.1), joint_cube(s), atol=1e-15)


def test_delta_variant_metrics_n4():
    s = build_scheme(4, 2, 0.1, 0.05)
    m = exact_metrics(s)
    assert np.allclose(m.flip_probs, 0.15, atol=1e-12)
    assert max(abs(d) for d in m.decomposition.marginal_divs) < 1e-12
    assert m.divergence_bits == pytest.approx(m.direct_kl_bits, abs=1e-10)


def test_mi_terms_only_at_parity_coordinates():
    s = build_scheme(8, 4, 0.1, 0.05)
    m = exact_metrics(s)
    lasts = set(s.last_coordinates())
    for i, t in enumerate(m.decomposition.mi_terms):
        if i in lasts:
            assert t > 1e-6
        else:
            assert t < 1e-12
    # total is exactly the parity terms
    parity = sum(m.decomposition.mi_terms[i] for i in lasts)
    assert m.divergence_bits == pytest.approx(parity, abs=1e-12)


def test_blocks_factorize():
    for n, L in ((8, 4), (6, 2), (9, 3)):
        assert block_factorization_gap(build_scheme(n, L, 0.1, 0.05)) < 1e-12


@pytest.mark.parametrize("L", range(2, 9))
def test_parity_correlation(L):
    with_head, with_last = parity_correlation(0.1, L)
    assert with_head == pytest.approx(0.8 ** (L - 1), abs=1e-12)
    assert with_last == pytest.approx(0.0, abs=1e-12)


def test_scalar_tv_bounded_away():
    m = exact_metrics(build_scheme(8, 4, 0.1, 0.05))
    assert m.scalar_tv >= 0.05
    assert m.scalar.sigma == tuple(range(8))


def test_scalar_tv_zero_without_parity():
    s = build_epsilon_variant(4, 2, 0.1, 0.05, 0.0)
    assert exact_metrics(s).scalar_tv == pytest.approx(0.0, abs=1e-12)


def test_epsilon_variant_zero_q():
    m = exact_metrics(build_epsilon_variant(4, 2, 0.1, 0.0, 0.2))
    divs = m.decomposition.marginal_divs
    assert divs[0] == pytest.approx(0.0, abs=1e-13) and divs[2] == pytest.approx(0.0, abs=1e-13)
    assert m.scalar_tv > 0.05


@pytest.mark.parametrize("p", [0.1, 0.2, 0.3])
def test_epsilon_variant_marginal_divergence(p):
    for q in (p / 10, p / 20, p / 40):
        s = build_epsilon_variant(4, 2, p, q, 0.1)
        m = exact_metrics(s)
        exact = binary_divergence(p + q * (1 - 2 * p), p)
        assert m.decomposition.marginal_divs[0] == pytest.approx(exact, rel=1e-9)
        assert exact == pytest.approx(marginal_divergence_approx(p, q), rel=0.10)


def test_uncorrected_approximation_misses_by_constant():
    # q^2 / (p (1 - p)) overshoots by 2 ln 2 / (1 - 2p)^2 in bits
    p, q = 0.1, 1e-4
    exact = binary_divergence(p + q * (1 - 2 * p), p)
    ratio = (q**2 / (p * (1 - p))) / exact
    assert ratio == pytest.approx(2 * math.log(2) / (1 - 2 * p) ** 2, rel=1e-3)


def test_binary_divergence():
    assert binary_divergence(0.5, 0.5) == 0.0
    assert binary_divergence(0.5, 0.0) == math.inf
    assert binary_divergence(0.0, 0.5) == pytest.approx(1.0)


def test_metrics_dict_keys():
    d = exact_metrics(build_scheme(4, 2, 0.1, 0.05)).as_dict()
    assert set(d) == {"flip_probs", "divergence_bits", "direct_kl_bits", "mi_terms", "marginal_divs",
                      "scalar_tv", "scalar_tv_quantiles", "sigma"}
