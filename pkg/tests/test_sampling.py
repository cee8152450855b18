import io
import math

import numpy as np
import pytest
from scipy import stats as sps

from qsimaging.errors import EmptyHistogram
from qsimaging.photon_stats import (
    DistinguishableMix, ModeSpec, PhotonDistribution, bose_einstein, distribution_indistinguishable,
    distribution_mix, poisson,
)
from qsimaging.sampling import (
    FeatureVector, PhotonHistogram, exact_features, feature_projection, features_from_counts,
    read_histogram_csv, sample_counts, stream_rng, to_features, write_histogram_csv,
)


def delta(k, n_max=10):
    p = np.zeros(n_max + 1)
    p[k] = 1.0
    return PhotonDistribution(p)


def test_zero_shots():
    h = sample_counts(bose_einstein(1.0), 0, seed=3)
    assert h.shots == 0 and not h.counts.any()


def test_delta_distribution():
    h = sample_counts(delta(3), 100, seed=1)
    assert h.counts[3] == 100 and h.counts.sum() == 100


def test_thermal_vacuum_fraction():
    h = sample_counts(bose_einstein(1.0, 40), 10 ** 6, seed=11)
    assert abs(h.counts[0] / 1e6 - 0.5) < 0.002


def test_matches_per_draw_inverse_cdf():
    d = distribution_indistinguishable(ModeSpec.mixed(0.7, [0.6]), 30)
    u = stream_rng(5, (2, 9)).random(5000)
    idx = np.searchsorted(np.cumsum(d.probs)[:-1], u, side="right")
    np.testing.assert_array_equal(sample_counts(d, 5000, 5, (2, 9)).counts,
                                  np.bincount(idx, minlength=31))


def test_tail_lands_on_nmax():
    d = bose_einstein(3.0, 4)  # tail mass ~0.24
    h = sample_counts(d, 20000, seed=2)
    assert h.counts.sum() == 20000
    assert h.counts[4] / 20000 == pytest.approx(d.probs[4] + d.tail_mass, abs=0.01)


def test_determinism_and_stream_independence():
    d = poisson(1.3, 30)
    a = sample_counts(d, 1000, seed=42, stream=7)
    b = sample_counts(d, 1000, seed=42, stream=7)
    c = sample_counts(d, 1000, seed=42, stream=8)
    assert a == b
    assert a != c


def test_frozen_stream_values():
    # pins the (seed, stream) -> Philox key derivation across releases/platforms
    h = sample_counts(bose_einstein(1.0, 20), 50, seed=123, stream=(4, 5))
    assert h.counts.tolist()[:7] == [31, 9, 5, 2, 1, 2, 0]


def _chi2_pvalue(hist, dist):
    probs = np.append(dist.probs[:-1], dist.probs[-1] + dist.tail_mass)
    expected = probs * hist.shots
    obs = hist.counts.astype(float)
    # merge the tail into one bin once expectations fall below 5
    cut = int(np.argmax(expected < 5)) if np.any(expected < 5) else len(expected)
    cut = max(cut, 2)
    e = np.append(expected[:cut - 1], expected[cut - 1:].sum())
    o = np.append(obs[:cut - 1], obs[cut - 1:].sum())
    return sps.chisquare(o, e).pvalue


def test_chi_square_goodness_of_fit():
    mix = DistinguishableMix([ModeSpec.coherent(0.5), ModeSpec.thermal(0.5), ModeSpec.thermal(0.5)])
    dist = distribution_mix(mix, 40)
    passes = sum(_chi2_pvalue(sample_counts(dist, 10 ** 5, seed=s), dist) > 1e-3 for s in range(100))
    assert passes >= 99


def test_mix_matches_sampled_histogram_tv():
    mix = DistinguishableMix([ModeSpec.coherent(0.5), ModeSpec.thermal(0.5), ModeSpec.thermal(0.5)])
    dist = distribution_mix(mix, 40)
    h = sample_counts(dist, 10 ** 6, seed=9)
    tv = 0.5 * np.abs(h.counts / 1e6 - dist.probs).sum()
    assert tv < 0.005


def test_features_examples():
    h = PhotonHistogram([50, 50], 100)
    f = to_features(h).probs
    assert f[:2].tolist() == [0.5, 0.5] and f.size == 21 and not f[2:].any()
    h3 = sample_counts(delta(3), 100, seed=0)
    assert to_features(h3).probs[3] == 1.0


def test_features_drop_mass_above_20():
    counts = np.zeros(31, dtype=int)
    counts[25] = 10
    counts[0] = 10
    f = to_features(PhotonHistogram(counts, 20)).probs
    assert f.sum() == pytest.approx(0.5)


def test_features_empty():
    with pytest.raises(EmptyHistogram):
        to_features(PhotonHistogram([0, 0], 0))
    with pytest.raises(EmptyHistogram):
        features_from_counts(np.zeros((3, 4)), 0)


def test_features_concentrate():
    dist = bose_einstein(1.0, 40)
    exact = exact_features(dist).probs
    tvs = [0.5 * np.abs(to_features(sample_counts(dist, 10 ** 4, seed=s)).probs - exact).sum()
           for s in range(20)]
    assert max(tvs) < 0.02


def test_projection_examples():
    p = np.zeros(21)
    p[:3] = [0.5, 0.25, 0.125]
    assert feature_projection(FeatureVector(p)) == (0.5, 0.25, 0.125)
    assert feature_projection(exact_features(delta(0))) == (1.0, 0.0, 0.0)
    e = math.exp(-1)
    assert feature_projection(exact_features(poisson(1.0))) == pytest.approx((e, e, e / 2), abs=1e-15)


def test_histogram_csv_roundtrip():
    h = sample_counts(poisson(1.0, 12), 300, seed=4)
    buf = io.StringIO()
    write_histogram_csv(h, buf, seed=4)
    text = buf.getvalue()
    assert "# shots=300 seed=4\nn,count\n" in text
    assert read_histogram_csv(io.StringIO(text)) == h
