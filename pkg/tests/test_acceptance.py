"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import itertools
import math
import time

import numpy as np
import pytest

from conftest import admissible_joint, random_map, random_scheme, random_signed_perm
from distsim.cli import main as cli_main
from distsim.counterexample import build_scheme, exact_metrics
from distsim.covering import (
    covering_experiment,
    cross_hybrid,
    gamma_exponent,
    rate_gap,
    starved_instance,
    wyner_soft_cover_instance,
)
from distsim.distributions import (
    ConditionalKernel,
    ProbabilityTable,
    apply_channels,
    divergence_decomposition,
    dsbs,
    cross_source,
    gk_common_information,
    maximal_correlation,
    pair_product,
    wyner_dsbs,
    wyner_dsbs_inverse,
)
from distsim.fourier import BooleanFunction, corrbound_rhs, correlated_expectation, correlated_expectation_direct
from distsim.schemes import (
    BooleanMap,
    DeterministicScheme,
    RandomizedScheme,
    collision_probability,
    coordinate_joint,
    hamming_lower_bound,
    induced_joint,
    induced_joint_randomized,
    is_signed_permutation,
    level_profile,
    manouver_check,
    power_bound_check,
    preserves_hamming,
    simulation_divergence,
)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, elapsed, limit):
        ok = ok and elapsed < limit
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail} ({elapsed:.2f}s, limit {limit:g}s)")
        return ok
    return emit


def test_criterion_01_worked_example(report):
    t0 = time.perf_counter()
    src = cross_source(0.1)
    c_gk = gk_common_information(src).entropy_bits
    h = -(0.8 * math.log2(0.8) + 2 * 0.1 * math.log2(0.1))
    q_star = wyner_dsbs_inverse(c_gk)
    # scalar scheme: symbols {0, 2} -> 0, {1, 3} -> 1 on both sides
    fold = ConditionalKernel.deterministic([0, 1, 0, 1], 2)
    scalar_gap = float(np.max(np.abs(apply_channels(src, fold, fold).probs - dsbs(0.08).probs)))
    _, target = cross_hybrid(0.065)
    hybrid_gap = float(np.max(np.abs(target.probs - dsbs(0.052).probs)))
    ok = (abs(c_gk - h) < 1e-9 and abs(c_gk - 0.921928) < 1e-6 and 0.060 <= q_star <= 0.070
          and abs(wyner_dsbs(q_star) - c_gk) < 1e-9 and scalar_gap < 1e-15 and hybrid_gap < 1e-15)
    ok = report(1, ok, f"C_GK={c_gk:.12f} q*={q_star:.6f} scalar|err|={scalar_gap:.1e} hybrid|err|={hybrid_gap:.1e}",
                time.perf_counter() - t0, 1)
    assert ok


def test_criterion_02_maximal_correlation(report, rng):
    t0 = time.perf_counter()
    worst = 0.0
    for p in np.arange(1, 10) * 0.05:
        worst = max(worst, abs(maximal_correlation(dsbs(p)) - (1 - 2 * p)))
    tens = 0.0
    for _ in range(50):
        a = ProbabilityTable(rng.dirichlet(np.ones(6)).reshape(rng.permutation([2, 3])))
        b = ProbabilityTable(rng.dirichlet(np.ones(4)).reshape(2, 2))
        expect = max(maximal_correlation(a), maximal_correlation(b))
        tens = max(tens, abs(maximal_correlation(pair_product(a, b)) - expect))
    ok = report(2, worst < 1e-9 and tens < 1e-9, f"DSBS err={worst:.1e} tensorization err={tens:.1e} on 50 joints",
                time.perf_counter() - t0, 5)
    assert ok


def test_criterion_03_divergence_decomposition(report, rng):
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 4))
        s = random_scheme(rng, n)
        p, q = float(rng.uniform(0.02, 0.48)), float(rng.uniform(0.02, 0.48))
        dec = divergence_decomposition(induced_joint(s, p), dsbs(q))
        worst = max(worst, abs(dec.total - simulation_divergence(s, p, q)))
    ok = report(3, worst < 1e-10, f"max |total - direct KL| = {worst:.1e} over 200 schemes",
                time.perf_counter() - t0, 10)
    assert ok


def test_criterion_04_noisy_correlation(report, rng):
    t0 = time.perf_counter()
    worst, violations = 0.0, 0
    for _ in range(100):
        n = int(rng.integers(1, 5))
        f = BooleanFunction(rng.choice([1, -1], 1 << n))
        g = BooleanFunction(rng.choice([1, -1], 1 << n))
        p = float(rng.uniform(0, 0.5))
        spectral = correlated_expectation(f, g, p)
        worst = max(worst, abs(spectral - correlated_expectation_direct(f, g, p)))
        violations += spectral > corrbound_rhs(f, g, p) + 1e-12
    ok = report(4, worst < 1e-10 and violations == 0, f"max err={worst:.1e}, bound violations={violations}",
                time.perf_counter() - t0, 10)
    assert ok


def _zero_iff_same_signed_perm(f, g, p=0.1):
    zero = simulation_divergence(DeterministicScheme(f, g), p, p) < 1e-12
    sp = is_signed_permutation(f)
    same = sp is not None and f == g
    return zero == same, zero


def test_criterion_05_exact_simulation_structure(report, rng):
    t0 = time.perf_counter()
    bij2 = [BooleanMap(np.array(t), 2) for t in itertools.permutations(range(4))]
    bad2, zeros2 = 0, 0
    for f in bij2:
        for g in bij2:
            agree, zero = _zero_iff_same_signed_perm(f, g)
            bad2 += not agree
            zeros2 += zero
    bad3, zeros3 = 0, 0
    for t in range(10_000):
        kind = t % 3
        if kind == 0:
            f, g = random_map(rng, 3, "bijection"), random_map(rng, 3, "bijection")
        elif kind == 1:
            f = random_signed_perm(rng, 3).to_map()
            g = f
        else:
            f, g = random_signed_perm(rng, 3).to_map(), random_signed_perm(rng, 3).to_map()
        agree, zero = _zero_iff_same_signed_perm(f, g)
        bad3 += not agree
        zeros3 += zero
    ok = report(5, bad2 == 0 and bad3 == 0 and zeros2 == 8,
                f"n=2: 576 pairs, {zeros2} zero-divergence, {bad2} counterexamples; "
                f"n=3: 10^4 pairs, {zeros3} zero-divergence, {bad3} counterexamples",
                time.perf_counter() - t0, 60)
    assert ok


def test_criterion_06_hamming_isometries(report, rng):
    t0 = time.perf_counter()
    bad, perms = 0, 0
    for t in itertools.permutations(range(4)):
        m = BooleanMap(np.array(t), 2)
        bad += preserves_hamming(m) != (is_signed_permutation(m) is not None)
    for t in range(1000):
        m = random_signed_perm(rng, 4).to_map() if t % 2 else random_map(rng, 4, "bijection")
        sp = is_signed_permutation(m) is not None
        perms += sp
        bad += preserves_hamming(m) != sp
    ok = report(6, bad == 0, f"{bad} disagreements; {perms} signed permutations among 10^3 n=4 maps",
                time.perf_counter() - t0, 30)
    assert ok


def test_criterion_07_divergence_bounds(report, rng):
    t0 = time.perf_counter()
    counts = dict(hamming=0, equality=0, w0=0, w1=0, collision=0)
    bijections = 0
    for t in range(200):
        n = int(rng.integers(1, 5))
        s = random_scheme(rng, n)
        p = (0.1, 0.2)[t % 2]
        q = float(rng.uniform(0.02, 0.48))
        d = simulation_divergence(s, p, q)
        bound = hamming_lower_bound(s, p, q)
        counts["hamming"] += bound > d + 1e-10
        if s.f.is_bijection() and s.g.is_bijection():
            bijections += 1
            counts["equality"] += abs(bound - d) > 1e-10
        prof = level_profile(s, p)
        counts["w0"] += prof.w0_sum > prof.w0_bound + 1e-12
        counts["w1"] += prof.w1_deficit > prof.w1_bound + 1e-12
        coll = max(collision_probability(s.f), collision_probability(s.g))
        counts["collision"] += coll > prof.divergence + 1e-12
    ok = report(7, not any(counts.values()), f"violations {counts}; {bijections} bijection schemes",
                time.perf_counter() - t0, 60)
    assert ok


def test_criterion_08_soft_covering(report):
    t0 = time.perf_counter()
    inst = wyner_soft_cover_instance()
    gap = rate_gap(inst)
    means = [r.mean_bits for r in covering_experiment(inst, [2, 4, 6, 8], 100, master_seed=0).rows]
    decreasing = all(a > b for a, b in zip(means, means[1:]))
    halved = means[-1] < 0.5 * means[0]
    neg = starved_instance()
    neg_mean = covering_experiment(neg, [8], 100, master_seed=0).rows[0].mean_bits
    slope = gamma_exponent(inst, 1e-4) / 1e-4
    slope_ok = abs(slope + gap) <= 0.01 * abs(gap)
    ok = (gap >= 0.2 and decreasing and halved and rate_gap(neg) < 0 and neg_mean > 0.1 and slope_ok)
    ok = report(8, ok, f"gap={gap:.4f} means={[round(m, 4) for m in means]} negative-gap n=8 mean={neg_mean:.3f} "
                       f"slope={slope:.5f}", time.perf_counter() - t0, 300)
    assert ok


def test_criterion_09_counterexample(report):
    t0 = time.perf_counter()
    m = exact_metrics(build_scheme(8, 4, 0.1, 0.05))
    flip_err = max(abs(f - 0.15) for f in m.flip_probs)
    marg = max(abs(d) for d in m.decomposition.marginal_divs)
    dec_err = abs(m.divergence_bits - m.direct_kl_bits)
    ok = flip_err < 1e-12 and marg < 1e-12 and dec_err < 1e-10 and m.scalar_tv >= 0.05
    ok = report(9, ok, f"flip err={flip_err:.1e} max marginal term={marg:.1e} |total-KL|={dec_err:.1e} "
                       f"scalar TV={m.scalar_tv:.4f}", time.perf_counter() - t0, 120)
    assert ok


def test_criterion_10_finite_instance_bounds(report, rng):
    t0 = time.perf_counter()
    manouver_bad = power_bad = 0
    accepted = 0
    while accepted < 500:
        p = float(rng.choice([0.05, 0.1, 0.2, 0.3]))
        if accepted % 2:
            j = admissible_joint(rng, p, int(rng.integers(1, 4)), int(rng.integers(1, 4)))
            if j is None:
                continue
            res = power_bound_check(j, p)
            if not res.premises_hold:
                continue
            power_bad += not res.holds
        else:
            n, na, nb = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 3))
            kind = rng.choice(["any", "bijection", "near"])
            s = RandomizedScheme(tuple(random_map(rng, n, kind) for _ in range(na)),
                                 tuple(random_map(rng, n, kind) for _ in range(nb)),
                                 ProbabilityTable(rng.dirichlet(np.ones(na))),
                                 ProbabilityTable(rng.dirichlet(np.ones(nb))))
            manouver_bad += not manouver_check(induced_joint_randomized(s, p), p).holds
            for i in range(n):
                res = power_bound_check(coordinate_joint(s, p, i), p)
                if not res.premises_hold:
                    power_bad += 1
                power_bad += not res.holds
        accepted += 1
    ok = report(10, manouver_bad == 0 and power_bad == 0,
                f"500 joints: claim violations={manouver_bad}, power-bound violations={power_bad}",
                time.perf_counter() - t0, 120)
    assert ok


def test_criterion_11_reproducibility(report, tmp_path, capsys):
    t0 = time.perf_counter()
    runs = {
        "soft-cover": ["soft-cover", "--n-list", "2,4,6", "--trials", "20", "--seed", "7"],
        "soft-cover-csv": ["soft-cover", "--n-list", "3,5", "--trials", "10", "--seed", "9", "--format", "csv"],
        "hybrid": ["hybrid", "--preset", "cross", "--q", "0.2", "--n-list", "2,3", "--trials", "6", "--seed", "3"],
        "counterexample": ["counterexample", "--n", "8", "--block-len", "4"],
    }
    mismatched = []
    for name, argv in runs.items():
        blobs = []
        for threads in ("1", "2", "5"):
            out = tmp_path / f"{name}-{threads}"
            assert cli_main(argv + ["--threads", threads, "--out", str(out)]) == 0
            blobs.append(out.read_bytes())
        if len(set(blobs)) != 1:
            mismatched.append(name)
    capsys.readouterr()
    ok = report(11, not mismatched, f"{len(runs)} experiments x threads 1/2/5, mismatches={mismatched}",
                time.perf_counter() - t0, 120)
    assert ok
