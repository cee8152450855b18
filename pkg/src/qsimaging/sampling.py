"""
Seeded photon-number-resolving measurement simulation.

Every random draw comes from a Philox counter-based generator keyed by a
master seed and a stream id, so per-pixel or per-item streams are
independent of each other and of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from .errors import DomainError, EmptyHistogram
from .photon_stats import PhotonDistribution

__all__ = [
    "N_FEATURES",
    "PhotonHistogram",
    "FeatureVector",
    "stream_rng",
    "sample_counts",
    "to_features",
    "exact_features",
    "feature_projection",
    "features_from_counts",
    "write_histogram_csv",
    "read_histogram_csv",
]

N_FEATURES = 21

StreamId = Union[int, Sequence[int]]


def stream_rng(seed: int, stream: StreamId = ()) -> np.random.Generator:
    """Independent generator for ``(seed, stream)``."""
    if seed < 0:
        raise DomainError("seed must be non-negative")
    key = (stream,) if np.isscalar(stream) else tuple(stream)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class PhotonHistogram:
    counts: np.ndarray
    shots: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64).copy()
        if c.ndim != 1 or c.size == 0:
            raise DomainError("counts must be a non-empty vector")
        if c.min() < 0:
            raise DomainError("counts must be non-negative")
        if int(c.sum()) != int(self.shots):
            raise DomainError(f"counts sum to {int(c.sum())}, expected {self.shots} shots")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "shots", int(self.shots))

    @property
    def n_max(self) -> int:
        return self.counts.size - 1

    def mean(self) -> float:
        if self.shots == 0:
            raise EmptyHistogram("histogram has no shots")
        return float(np.arange(self.counts.size) @ self.counts) / self.shots

    def __eq__(self, other):
        if not isinstance(other, PhotonHistogram):
            return NotImplemented
        return self.shots == other.shots and np.array_equal(self.counts, other.counts)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Empirical ``p(n)`` for ``n = 0..20``; mass above 20 is dropped."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).copy()
        if p.shape != (N_FEATURES,):
            raise DomainError(f"feature vector needs {N_FEATURES} entries, got {p.shape}")
        if p.min() < 0 or p.max() > 1 or p.sum() > 1 + 1e-12:
            raise DomainError("features must be probabilities in [0, 1] with sum <= 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)


def sample_counts(dist: PhotonDistribution, shots: int, seed: int,
                  stream: StreamId = ()) -> PhotonHistogram:
    """Histogram of ``shots`` inverse-CDF draws from ``dist``.

    Probability left above ``n_max`` (the tail mass) is assigned to ``n_max``
    so the counts always add up to ``shots``.
    """
    if shots < 0:
        raise DomainError("shots must be >= 0")
    counts = np.zeros(dist.n_max + 1, dtype=np.int64)
    if shots == 0:
        return PhotonHistogram(counts, 0)
    cdf = np.cumsum(dist.probs)
    if cdf[0] >= 1.0:
        # every u in [0, 1) maps to n = 0; skip the draws
        counts[0] = shots
        return PhotonHistogram(counts, shots)
    u = np.sort(stream_rng(seed, stream).random(shots))
    # draw u lands on n <= k exactly when u < cdf[k]
    below = np.searchsorted(u, cdf[:-1], side="left")
    counts[:] = np.diff(np.concatenate(([0], below, [shots])))
    return PhotonHistogram(counts, shots)


def features_from_counts(counts: np.ndarray, shots: int) -> np.ndarray:
    """Vectorised :func:`to_features` over the last axis of ``counts``."""
    if shots <= 0:
        raise EmptyHistogram("cannot form probabilities from zero shots")
    counts = np.asarray(counts)
    out = np.zeros(counts.shape[:-1] + (N_FEATURES,))
    k = min(N_FEATURES, counts.shape[-1])
    out[..., :k] = counts[..., :k] / float(shots)
    return out


def to_features(hist: PhotonHistogram) -> FeatureVector:
    if hist.shots == 0:
        raise EmptyHistogram("cannot form probabilities from zero shots")
    return FeatureVector(features_from_counts(hist.counts, hist.shots))


def exact_features(dist: PhotonDistribution) -> FeatureVector:
    """Feature vector of the exact distribution (the infinite-shot limit)."""
    out = np.zeros(N_FEATURES)
    k = min(N_FEATURES, dist.n_max + 1)
    out[:k] = dist.probs[:k]
    return FeatureVector(out)


def feature_projection(features: FeatureVector) -> Tuple[float, float, float]:
    p = features.probs
    return float(p[0]), float(p[1]), float(p[2])


def write_histogram_csv(hist: PhotonHistogram, fh: TextIO, seed: Optional[int] = None,
                        header: Sequence[str] = ()) -> None:
    for line in header:
        fh.write(f"# {line}\n")
    fh.write(f"# shots={hist.shots} seed={'' if seed is None else seed}\n")
    fh.write("n,count\n")
    for n, c in enumerate(hist.counts):
        fh.write(f"{n},{int(c)}\n")


def read_histogram_csv(fh: TextIO) -> PhotonHistogram:
    rows = {}
    seen_header = False
    for raw in fh:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not seen_header:
            if line.replace(" ", "") != "n,count":
                raise DomainError(f"expected header 'n,count', got {line!r}")
            seen_header = True
            continue
        a, b = line.split(",")
        rows[int(a)] = int(b)
    if not rows:
        raise DomainError("histogram file has no rows")
    counts = np.zeros(max(rows) + 1, dtype=np.int64)
    for k, v in rows.items():
        counts[k] = v
    return PhotonHistogram(counts, int(counts.sum()))
