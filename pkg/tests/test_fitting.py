import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsimaging.errors import InsufficientSupport, ZeroMean
from qsimaging.fitting import (
    AllocationCandidate, enumerate_candidates, fit_distribution, measured_mean, write_fit_result,
)
from qsimaging.photon_stats import PhotonDistribution, bose_einstein, distribution_mix, poisson
from qsimaging.sampling import sample_counts, to_features


def full_triples(units):
    """Every (c, a, b) with a >= b and 1 <= c + a + b <= units (unreduced search space)."""
    out = []
    for total in range(1, units + 1):
        for c in range(total + 1):
            rest = total - c
            for b in range(rest // 2 + 1):
                out.append((c, rest - b, b))
    return out


def exhaustive_minimum(p, step, units, n_fit=6):
    """Brute-force minimum over all multisets of up to three full triples."""
    triples = full_triples(units)
    target = np.asarray(p)[:n_fit + 1]
    best = np.inf
    for k in (1, 2, 3):
        for combo in itertools.combinations_with_replacement(triples, k):
            if sum(sum(t) for t in combo) != units:
                continue
            cand = AllocationCandidate(tuple(tuple(v * step for v in t) for t in combo))
            th = distribution_mix(cand.to_mix(), n_fit).probs
            best = min(best, float(np.sqrt(((th - target) ** 2).sum())))
    return best


def test_candidate_enumeration_matches_brute_force():
    for units in (1, 2, 5, 8):
        pairs = [(c, u - c) for u in range(1, units + 1) for c in range(u, -1, -1)]
        brute = {combo for k in (1, 2, 3)
                 for combo in itertools.combinations_with_replacement(range(len(pairs)), k)
                 if sum(sum(pairs[i]) for i in combo) == units}
        got = enumerate_candidates(units)
        assert set(got) == brute and len(got) == len(brute)


def test_poisson_recovers_single_coherent_mode():
    r = fit_distribution(poisson(1.0, 20))
    assert r.best.modes == ((1.0, 0.0, 0.0),)
    assert r.objective < 1e-10


def test_thermal_recovers_single_thermal_source():
    r = fit_distribution(bose_einstein(1.0, 20))
    assert r.best.canonical() == ((0.0, 1.0),)
    assert r.objective < 1e-10


def test_ctt_split_across_modes():
    truth = AllocationCandidate(((0.4, 0, 0), (0, 0.4, 0), (0, 0.4, 0)))
    r = fit_distribution(distribution_mix(truth.to_mix(), 30))
    np.testing.assert_allclose(np.array(r.best.canonical()), np.array(truth.canonical()), atol=0.05 + 1e-12)
    assert r.objective < 1e-10


def test_thermal_split_inside_mode_ties_to_fewer_sources():
    truth = AllocationCandidate(((0.3, 0.2, 0.1), (0.5, 0.4, 0.0)))
    r = fit_distribution(distribution_mix(truth.to_mix(), 30))
    assert all(m[2] == 0.0 for m in r.best.modes)
    np.testing.assert_allclose(np.array(r.best.canonical()), np.array(truth.canonical()), atol=1e-12)


def test_measured_mean_examples():
    delta2 = np.zeros(8)
    delta2[2] = 1.0
    assert measured_mean(PhotonDistribution(delta2)) == 2.0
    # missing tail: sum_{n>20} n 2^-(n+1) = 22 / 2^21
    assert measured_mean(bose_einstein(1.0, 20)) == pytest.approx(1 - 22 / 2 ** 21, abs=1e-15)
    assert measured_mean(np.array([0.5, 0.5])) == 0.5


def test_errors():
    with pytest.raises(InsufficientSupport):
        fit_distribution(np.array([0.5, 0.3, 0.1, 0.05, 0.05]))
    with pytest.raises(ZeroMean):
        fit_distribution(np.eye(10)[0])


@pytest.mark.parametrize("seed", range(4))
def test_objective_equals_exhaustive_minimum_on_noisy_input(seed):
    rng = np.random.default_rng(seed)
    truth = AllocationCandidate(((rng.integers(0, 4) * 0.05, rng.integers(0, 4) * 0.05, 0.0),
                                 (0.0, rng.integers(1, 4) * 0.05, 0.0)))
    hist = sample_counts(distribution_mix(truth.to_mix(), 30), 2000, seed=seed)
    p = to_features(hist)
    r = fit_distribution(p)
    units = int(round(r.measured_mean / 0.05))
    assert abs(r.objective - exhaustive_minimum(p.probs, 0.05, units)) <= 1e-12


def test_objective_equals_exhaustive_minimum_on_exact_input():
    truth = AllocationCandidate(((0.1, 0.15, 0.05), (0.05, 0.0, 0.0)))
    p = distribution_mix(truth.to_mix(), 30).probs
    r = fit_distribution(p)
    assert abs(r.objective - exhaustive_minimum(p, 0.05, 7)) <= 1e-12
    assert r.objective < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=7, max_size=10).filter(lambda v: sum(v[1:]) > 0.05),
       st.sampled_from([0.1, 0.25]))
def test_allocation_sums_to_measured_mean(raw, step):
    p = np.array(raw) / max(sum(raw), 1.0) * 0.9
    p = p * min(1.0, 2.5 / max(measured_mean(p), 1e-9))  # keep the search small
    r = fit_distribution(p, grid_step=step)
    assert abs(r.best.total - r.measured_mean) <= step
    assert r.objective >= 0


def test_write_fit_result():
    r = fit_distribution(poisson(0.5, 20))
    buf = io.StringIO()
    write_fit_result(r, buf, header=["tool x"])
    text = buf.getvalue()
    assert text.startswith("# tool x\n# measured_mean=")
    assert "# mode0: n_c=0.5 n_1t=0 n_2t=0\n" in text
    assert "n,p_theory\n0," in text
