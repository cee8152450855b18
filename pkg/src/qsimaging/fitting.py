"""
Decomposition of a measured photon-number distribution into sources.

A candidate allocation has up to three mutually distinguishable modes, each
holding one coherent source and up to two thermal sources with mean photon
numbers ``(n_c, n_1t, n_2t)``.  All means are multiples of ``grid_step`` and
add up to the measured mean.  The candidate minimising the root-sum-square
difference to the measurement over ``n = 0..n_fit_max`` wins.

Search space reduction: thermal sources inside one mode are
indistinguishable and behave as a single thermal source with the summed
mean, so a mode's distribution depends only on ``(n_c, n_1t + n_2t)``.
Every split of that sum ties exactly, and the tie-break toward fewer active
sources selects ``n_2t = 0``.  The search therefore enumerates multisets of
``(n_c, t)`` pairs.  Pure coherent modes likewise merge (Poisson
convolution), and the tie-break again prefers the merged form.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import List, Sequence, TextIO, Tuple

import numpy as np

from .errors import DomainError, InsufficientSupport, ZeroMean
from .photon_stats import (
    DistinguishableMix, ModeSpec, PhotonDistribution, distribution_indistinguishable,
    distribution_mix,
)

__all__ = [
    "AllocationCandidate",
    "FitResult",
    "measured_mean",
    "enumerate_candidates",
    "candidate_distribution",
    "fit_distribution",
    "near_optimal",
    "write_fit_result",
]

DEFAULT_GRID_STEP = 0.05
DEFAULT_NFIT = 6
MAX_MODES = 3
TIE_TOL = 1e-12

Mode = Tuple[float, float, float]


@dataclass(frozen=True)
class AllocationCandidate:
    """Per-mode ``(n_c, n_1t, n_2t)`` mean photon numbers."""

    modes: Tuple[Mode, ...]

    def __post_init__(self):
        modes = tuple(tuple(float(v) for v in m) for m in self.modes)
        if not 1 <= len(modes) <= MAX_MODES:
            raise DomainError(f"an allocation has 1..{MAX_MODES} modes")
        if any(len(m) != 3 for m in modes):
            raise DomainError("each mode is a triple (n_c, n_1t, n_2t)")
        if any(v < 0 or not math.isfinite(v) for m in modes for v in m):
            raise DomainError("mean photon numbers must be finite and >= 0")
        object.__setattr__(self, "modes", modes)

    @property
    def total(self) -> float:
        return float(sum(sum(m) for m in self.modes))

    @property
    def active_sources(self) -> int:
        return sum(1 for m in self.modes for v in m if v > 0)

    def to_mix(self) -> DistinguishableMix:
        return DistinguishableMix([ModeSpec.mixed(c, [t1, t2]) for c, t1, t2 in self.modes])

    def canonical(self) -> Tuple[Tuple[float, float], ...]:
        """Observable content: per-mode ``(n_c, n_1t + n_2t)``, sorted, vacuum modes dropped."""
        return tuple(sorted(((c, t1 + t2) for c, t1, t2 in self.modes if c + t1 + t2 > 0),
                            reverse=True))


@dataclass
class FitResult:
    best: AllocationCandidate
    objective: float
    theory_distribution: PhotonDistribution
    measured_mean: float
    n_candidates: int


def _as_probs(p_exp) -> np.ndarray:
    p = getattr(p_exp, "probs", p_exp)
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DomainError("measured distribution must be a non-empty vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise DomainError("measured probabilities must be finite and >= 0")
    return p


def measured_mean(p_exp) -> float:
    """``sum_n n p(n)`` over the available support."""
    p = _as_probs(p_exp)
    return float(np.arange(p.size) @ p)


@functools.lru_cache(maxsize=64)
def _mode_table(units: int, step: float, n_fit_max: int):
    """All ``(c, t)`` unit pairs with ``1 <= c + t <= units`` and their ``p(0..n_fit_max)``."""
    pairs = [(c, u - c) for u in range(1, units + 1) for c in range(u, -1, -1)]
    table = np.array([
        distribution_indistinguishable(ModeSpec.mixed(c * step, [t * step]), n_fit_max).probs
        for c, t in pairs
    ])
    return np.array(pairs, dtype=np.int64), table


def enumerate_candidates(units: int, max_modes: int = MAX_MODES) -> List[Tuple[int, ...]]:
    """Index tuples into the ``_mode_table`` pair list, one per reduced candidate.

    A candidate is a multiset (non-decreasing indices) of up to ``max_modes``
    pairs whose units add up to ``units``.  Order: fewer modes first, then
    lexicographic in the indices.
    """
    # pairs are ordered by unit count, so non-decreasing indices mean
    # non-decreasing unit counts: enumerate unit partitions, then pairs
    start = {u: (u - 1) * (u + 2) // 2 for u in range(1, units + 1)}
    group = {u: range(start[u], start[u] + u + 1) for u in range(1, units + 1)}
    out = []
    for k in range(1, max_modes + 1):
        for parts in _partitions(units, k):
            pools = []
            for u, reps in itertools.groupby(parts):
                pools.append(list(itertools.combinations_with_replacement(group[u], len(list(reps)))))
            for chunks in itertools.product(*pools):
                out.append(tuple(i for chunk in chunks for i in chunk))
    out.sort(key=lambda combo: (len(combo), combo))
    return out


def _partitions(total: int, k: int, low: int = 1):
    """Non-decreasing ``k``-tuples of integers ``>= low`` adding up to ``total``."""
    if k == 1:
        if total >= low:
            yield (total,)
        return
    for first in range(low, total // k + 1):
        for rest in _partitions(total - first, k - 1, first):
            yield (first,) + rest


@functools.lru_cache(maxsize=64)
def _candidate_arrays(units: int, max_modes: int):
    cands = enumerate_candidates(units, max_modes)
    idx = np.full((len(cands), max_modes), -1, dtype=np.int64)
    for r, combo in enumerate(cands):
        idx[r, :len(combo)] = combo
    return idx


def _truncated_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    width = a.shape[-1]
    for k in range(width):
        out[..., k:] += a[..., k:k + 1] * b[..., :width - k]
    return out


def candidate_distribution(candidate: AllocationCandidate, n_max: int) -> PhotonDistribution:
    """Theory distribution of an allocation (one mode per triple, convolved)."""
    return distribution_mix(candidate.to_mix(), n_max)


def _search(p_exp, grid_step, n_fit_max, max_modes):
    """Objective of every reduced candidate: ``(p, mean, chosen, active, objective)``."""
    p = _as_probs(p_exp)
    if not grid_step > 0:
        raise DomainError("grid_step must be positive")
    if not 1 <= max_modes <= MAX_MODES:
        raise DomainError(f"max_modes must be in 1..{MAX_MODES}")
    if p.size < n_fit_max + 1:
        raise InsufficientSupport(f"measured distribution stops at n={p.size - 1}, need n={n_fit_max}")
    mean = measured_mean(p)
    if mean <= 0:
        raise ZeroMean("measured mean photon number is zero")
    units = max(1, int(round(mean / grid_step)))

    pairs, table = _mode_table(units, float(grid_step), int(n_fit_max))
    idx = _candidate_arrays(units, max_modes)
    # index -1 selects a vacuum mode (delta at n = 0)
    vacuum = np.zeros((1, n_fit_max + 1))
    vacuum[0, 0] = 1.0
    ext = np.vstack([table, vacuum])
    theory = ext[idx[:, 0]]
    for k in range(1, max_modes):
        theory = _truncated_convolve(theory, ext[idx[:, k]])
    target = p[:n_fit_max + 1]
    objective = np.sqrt(((theory - target) ** 2).sum(axis=1))

    chosen = np.vstack([pairs, [[0, 0]]])[idx]  # (n_cand, max_modes, 2) in grid units
    active = (chosen > 0).sum(axis=(1, 2))
    return p, mean, chosen, active, objective


def _allocation(units_row, grid_step) -> AllocationCandidate:
    return AllocationCandidate(tuple((float(c * grid_step), float(t * grid_step), 0.0)
                                     for c, t in units_row if c + t > 0))


def fit_distribution(p_exp, grid_step: float = DEFAULT_GRID_STEP, n_fit_max: int = DEFAULT_NFIT,
                     max_modes: int = MAX_MODES) -> FitResult:
    """Least-squares source allocation by exhaustive search.

    Parameters
    ----------
    p_exp : PhotonDistribution, FeatureVector or array
        Measured ``p(n)``, used as given (no renormalisation).
    grid_step : float
        Resolution of every mean photon number in the search.
    n_fit_max : int
        Highest photon number entering the objective.

    Returns
    -------
    FitResult
        Best allocation, its objective ``sqrt(sum_{n<=n_fit_max} (p_exp - p_th)^2)``
        and its theory distribution.  Objective ties within 1e-12 go to fewer
        active sources, then to the earlier candidate.
    """
    p, mean, chosen, active, objective = _search(p_exp, grid_step, n_fit_max, max_modes)
    near = np.flatnonzero(objective <= objective.min() + TIE_TOL)
    r = int(near[np.lexsort((near, active[near]))[0]])
    best = _allocation(chosen[r], grid_step)
    n_theory = max(p.size - 1, 20)
    return FitResult(best, float(objective[r]), candidate_distribution(best, n_theory), mean,
                     objective.size)


def near_optimal(p_exp, tol: float, grid_step: float = DEFAULT_GRID_STEP,
                 n_fit_max: int = DEFAULT_NFIT, max_modes: int = MAX_MODES):
    """All candidates within ``tol`` of the best objective, as ``(allocation, objective)``.

    Used to decide whether a measurement identifies its allocation: if every
    near-optimal candidate agrees with the truth, recovery is well posed.
    """
    _, _, chosen, _, objective = _search(p_exp, grid_step, n_fit_max, max_modes)
    near = np.flatnonzero(objective <= objective.min() + tol)
    return [(_allocation(chosen[r], grid_step), float(objective[r])) for r in near]


def write_fit_result(result: FitResult, fh: TextIO, header: Sequence[str] = (),
                     measured=None) -> None:
    """Allocation and objective as comment lines, then the theory distribution as CSV.

    With ``measured`` given, a ``p_measured`` column (zero beyond its support)
    precedes ``p_theory`` for bar-chart comparison.
    """
    for line in header:
        fh.write(f"# {line}\n")
    fh.write(f"# measured_mean={result.measured_mean:.17g}\n")
    fh.write(f"# objective={result.objective:.17g}\n")
    fh.write(f"# candidates={result.n_candidates}\n")
    for i, (c, t1, t2) in enumerate(result.best.modes):
        fh.write(f"# mode{i}: n_c={c:.17g} n_1t={t1:.17g} n_2t={t2:.17g}\n")
    theory = result.theory_distribution.probs
    if measured is None:
        fh.write("n,p_theory\n")
        for n, v in enumerate(theory):
            fh.write(f"{n},{v:.17g}\n")
        return
    p = _as_probs(measured)
    fh.write("n,p_measured,p_theory\n")
    for n in range(max(p.size, theory.size)):
        m = p[n] if n < p.size else 0.0
        t = theory[n] if n < theory.size else 0.0
        fh.write(f"{n},{m:.17g},{t:.17g}\n")
