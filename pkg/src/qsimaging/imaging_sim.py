"""
Raster-scan imaging of coherent and thermal point emitters.

Each emitter has a Gaussian point-spread function; at every pixel it
contributes one distinguishable mode whose mean photon number follows the
PSF.  The module renders intensities, simulates photon-number-resolving
detection per pixel, classifies pixels with a trained network, and estimates
emitter positions two ways:

* :func:`fit_classified` fits labelled disks to the per-pixel class map;
* :func:`fit_direct` fits a sum of Gaussians to the intensity image, with a
  parsimony rule that decides between one and more components.

:func:`separation_sweep` compares the two on two-emitter scenes.

Class maps use presence labels: an emitter counts as present at a pixel when
its mean photon number there is at least ``presence`` (0.15 by default), so
the region of each emitter is a disk of radius
``waist * sqrt(ln(peak_mean / presence) / 2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from scipy.optimize import differential_evolution, least_squares
from scipy.special import gammaln, xlogy

from .classifier import (
    LABELS, ClassLabel, MLPModel, TrainConfig, composite_label, generate_dataset, predict,
    train_scg,
)
from .errors import DomainError, FitDiverged, NoForeground, SchemaError
from .photon_stats import DistinguishableMix, ModeSpec, PhotonDistribution
from .sampling import features_from_counts, sample_counts, stream_rng

__all__ = [
    "BACKGROUND",
    "PRESENCE_THRESHOLD",
    "EmitterSpec",
    "Scene",
    "HistogramGrid",
    "ClassMap",
    "RingRule",
    "Disk",
    "ClassifiedFit",
    "GaussianComponent",
    "DirectFit",
    "SweepConfig",
    "SeparationEstimate",
    "pixel_mix",
    "emitter_means",
    "render_intensity",
    "pixel_distributions",
    "simulate_raster",
    "classify_image",
    "classify_distributions",
    "presence_map",
    "predicted_map",
    "fit_classified",
    "fit_direct",
    "presence_class_defs",
    "train_imaging_classifier",
    "two_emitter_scene",
    "separation_sweep",
    "write_sweep_csv",
]

BACKGROUND = -1
PRESENCE_THRESHOLD = 0.15
DEFAULT_BACKGROUND_THRESHOLD = 0.05
IMAGING_NMAX = 40
KINDS = ("C", "T")

# fixed gray level per class for PGM export
GRAY_LEVELS = {BACKGROUND: 0, 0: 51, 1: 102, 2: 153, 3: 204, 4: 255}


# ---------------------------------------------------------------------------
# Scenes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmitterSpec:
    """Point emitter with a Gaussian PSF.

    Parameters
    ----------
    x, y : float
        Position in units of the beam-waist radius.
    waist : float
        PSF radius ``w0``; the mean falls as ``exp(-2 r^2 / w0^2)``.
    kind : {"C", "T"}
        Coherent or thermal photon statistics.
    peak_mean : float
        Mean photon number at the PSF centre.
    """

    x: float
    y: float
    waist: float = 1.0
    kind: str = "C"
    peak_mean: float = 1.2

    def __post_init__(self):
        if not self.waist > 0:
            raise DomainError("waist must be positive")
        if not self.peak_mean > 0:
            raise DomainError("peak_mean must be positive")
        if self.kind not in KINDS:
            raise DomainError(f"kind must be 'C' or 'T', got {self.kind!r}")

    def mean_at(self, x, y):
        r2 = (np.asarray(x) - self.x) ** 2 + (np.asarray(y) - self.y) ** 2
        return self.peak_mean * np.exp(-2.0 * r2 / self.waist ** 2)


def _pixel_centers(n: int, pitch: float) -> np.ndarray:
    return (np.arange(n) + 0.5) * pitch - 0.5 * n * pitch


@dataclass(frozen=True)
class Scene:
    """Emitters on a ``width x height`` pixel grid.

    ``extent`` is the physical width of the grid; pixels are square with pitch
    ``extent / width`` and the grid is centred on the origin.
    """

    emitters: Tuple[EmitterSpec, ...]
    width: int = 128
    height: int = 128
    extent: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "emitters", tuple(self.emitters))
        if not self.emitters:
            raise DomainError("a scene needs at least one emitter")
        if self.width < 8 or self.height < 8:
            raise DomainError("grid dimensions must be >= 8")
        if not self.extent > 0:
            raise DomainError("extent must be positive")

    @property
    def pitch(self) -> float:
        return self.extent / self.width

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Pixel-centre coordinates ``(X, Y)``, each of shape ``(height, width)``."""
        return np.meshgrid(_pixel_centers(self.width, self.pitch),
                           _pixel_centers(self.height, self.pitch))

    def reflected(self) -> "Scene":
        """Mirror image under ``x -> -x``; the pixel grid maps onto itself."""
        return replace(self, emitters=tuple(replace(e, x=-e.x) for e in self.emitters))

    def to_json(self) -> str:
        doc = {
            "width": self.width,
            "height": self.height,
            "extent": self.extent,
            "emitters": [
                {"x": e.x, "y": e.y, "waist": e.waist, "kind": e.kind, "peak_mean": e.peak_mean}
                for e in self.emitters
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "Scene":
        try:
            emitters = tuple(
                EmitterSpec(float(e["x"]), float(e["y"]), float(e.get("waist", 1.0)),
                            str(e.get("kind", "C")), float(e.get("peak_mean", 1.2)))
                for e in doc["emitters"]
            )
            return cls(emitters, int(doc.get("width", 128)), int(doc.get("height", 128)),
                       float(doc.get("extent", 4.0)))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed scene description: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "Scene":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"scene file is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


def two_emitter_scene(separation: float, peaks: Tuple[float, float] = (1.2, 1.2), width: int = 64,
                      extent: float = 4.0, waist: float = 1.0) -> Scene:
    """Coherent emitter at ``(-s/2, 0)`` and thermal emitter at ``(+s/2, 0)``."""
    return Scene((EmitterSpec(-separation / 2, 0.0, waist, "C", peaks[0]),
                  EmitterSpec(separation / 2, 0.0, waist, "T", peaks[1])),
                 width, width, extent)


def emitter_means(scene: Scene) -> np.ndarray:
    """Per-emitter mean photon number at every pixel, shape ``(n, height, width)``."""
    x, y = scene.coordinates()
    return np.stack([e.mean_at(x, y) for e in scene.emitters])


def pixel_mix(scene: Scene, px: int, py: int) -> DistinguishableMix:
    """Distinguishable mix seen at pixel column ``px``, row ``py``."""
    if not (0 <= px < scene.width and 0 <= py < scene.height):
        raise DomainError(f"pixel ({px}, {py}) outside the {scene.width}x{scene.height} grid")
    x = _pixel_centers(scene.width, scene.pitch)[px]
    y = _pixel_centers(scene.height, scene.pitch)[py]
    modes = []
    for e in scene.emitters:
        m = float(e.mean_at(x, y))
        modes.append(ModeSpec.coherent(m) if e.kind == "C" else ModeSpec.thermal(m))
    return DistinguishableMix(modes)


def render_intensity(scene: Scene, normalize: bool = True) -> np.ndarray:
    """Total mean photon number per pixel, scaled to a maximum of 1 by default."""
    img = emitter_means(scene).sum(axis=0)
    if normalize:
        img = img / img.max()
    return img


def _poisson_rows(mean: np.ndarray, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    mu = mean[:, None]
    return np.exp(xlogy(n, mu) - mu - gammaln(n + 1))


def _bose_einstein_rows(mean: np.ndarray, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    m = mean[:, None]
    return (m / (1.0 + m)) ** n / (1.0 + m)


def _convolve_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    width = a.shape[1]
    for k in range(width):
        out[:, k:] += a[:, k:k + 1] * b[:, :width - k]
    return out


def pixel_distributions(scene: Scene, n_max: int = IMAGING_NMAX) -> np.ndarray:
    """Exact ``p(0..n_max)`` at every pixel, shape ``(height, width, n_max + 1)``.

    Equivalent to ``distribution_mix(pixel_mix(scene, px, py), n_max)`` for
    every pixel, computed for the whole grid at once.
    """
    means = emitter_means(scene).reshape(len(scene.emitters), -1)
    out = None
    for e, m in zip(scene.emitters, means):
        rows = _poisson_rows(m, n_max) if e.kind == "C" else _bose_einstein_rows(m, n_max)
        out = rows if out is None else _convolve_rows(out, rows)
    return out.reshape(scene.height, scene.width, n_max + 1)


# ---------------------------------------------------------------------------
# Detection and classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HistogramGrid:
    """Photon-count histograms for every pixel, ``counts[py, px, n]``."""

    counts: np.ndarray
    shots: int

    @property
    def shape(self) -> Tuple[int, int]:
        return self.counts.shape[:2]

    def mean_image(self) -> np.ndarray:
        n = np.arange(self.counts.shape[-1])
        return (self.counts @ n) / float(self.shots)

    def features(self) -> np.ndarray:
        return features_from_counts(self.counts, self.shots)


def simulate_raster(scene: Scene, shots: int, seed: int, stream: Sequence[int] = (),
                    n_max: int = IMAGING_NMAX) -> HistogramGrid:
    """Sample ``shots`` detections at every pixel.

    Pixel ``(px, py)`` draws from stream ``(*stream, py * width + px)``, so
    each pixel's histogram is independent of every other pixel.
    """
    if shots < 1:
        raise DomainError("shots per pixel must be >= 1")
    dists = pixel_distributions(scene, n_max).reshape(-1, n_max + 1)
    counts = np.empty(dists.shape, dtype=np.int64)
    prefix = tuple(int(s) for s in np.atleast_1d(stream)) if np.size(stream) else ()
    for i, row in enumerate(dists):
        counts[i] = sample_counts(PhotonDistribution(row), shots, seed, prefix + (i,)).counts
    return HistogramGrid(counts.reshape(scene.height, scene.width, n_max + 1), shots)


@dataclass(frozen=True, eq=False)
class ClassMap:
    """Per-pixel class index (``BACKGROUND`` = -1) on a grid of given extent."""

    labels: np.ndarray
    extent: float

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64).copy()
        if lab.ndim != 2:
            raise DomainError("class map must be two-dimensional")
        if lab.min() < BACKGROUND or lab.max() >= len(LABELS):
            raise DomainError("class indices must lie in -1..4")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.labels.shape

    @property
    def pitch(self) -> float:
        return self.extent / self.labels.shape[1]

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        h, w = self.labels.shape
        return np.meshgrid(_pixel_centers(w, self.pitch), _pixel_centers(h, self.pitch))

    def __eq__(self, other):
        if not isinstance(other, ClassMap):
            return NotImplemented
        return self.extent == other.extent and np.array_equal(self.labels, other.labels)

    __hash__ = None

    def write_pgm(self, fh: TextIO, header: Sequence[str] = ()) -> None:
        _write_pgm(np.vectorize(GRAY_LEVELS.get)(self.labels), fh, header)

    def write_csv(self, fh: TextIO, header: Sequence[str] = ()) -> None:
        for line in header:
            fh.write(f"# {line}\n")
        names = np.array(("-",) + LABELS)[self.labels + 1]
        for row in names:
            fh.write(",".join(row) + "\n")

    @staticmethod
    def write_legend(fh: TextIO, header: Sequence[str] = ()) -> None:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("gray,class\n")
        for idx, gray in GRAY_LEVELS.items():
            fh.write(f"{gray},{'background' if idx == BACKGROUND else LABELS[idx]}\n")


def _write_pgm(gray: np.ndarray, fh: TextIO, header: Sequence[str] = ()) -> None:
    h, w = gray.shape
    fh.write("P2\n")
    for line in header:
        fh.write(f"# {line}\n")
    fh.write(f"{w} {h}\n255\n")
    for row in gray:
        fh.write(" ".join(str(int(v)) for v in row) + "\n")


def write_intensity_pgm(image: np.ndarray, fh: TextIO, header: Sequence[str] = ()) -> None:
    """Plain PGM with the maximum mapped to 255."""
    top = float(np.max(image))
    gray = np.zeros(image.shape, dtype=int) if top <= 0 else np.rint(255.0 * image / top).astype(int)
    _write_pgm(gray, fh, header)


def write_intensity_csv(image: np.ndarray, fh: TextIO, header: Sequence[str] = ()) -> None:
    for line in header:
        fh.write(f"# {line}\n")
    for row in image:
        fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")


def classify_distributions(model: MLPModel, features: np.ndarray, means: np.ndarray,
                           background_threshold: float = DEFAULT_BACKGROUND_THRESHOLD) -> np.ndarray:
    """Class index per pixel from feature rows ``(..., 21)`` and pixel means."""
    labels = predict(model, features.reshape(-1, features.shape[-1])).reshape(means.shape)
    return np.where(means < background_threshold, BACKGROUND, labels)


def classify_image(model: MLPModel, histograms: HistogramGrid, extent: float,
                   background_threshold: float = DEFAULT_BACKGROUND_THRESHOLD) -> ClassMap:
    """Classify every pixel; pixels with mean below the threshold are background."""
    labels = classify_distributions(model, histograms.features(), histograms.mean_image(),
                                    background_threshold)
    return ClassMap(labels, extent)


def presence_map(scene: Scene, presence: float = PRESENCE_THRESHOLD) -> ClassMap:
    """Ground-truth presence classes: composite of emitters with mean >= ``presence``."""
    present = emitter_means(scene) >= presence
    kinds = np.array([e.kind == "C" for e in scene.emitters])
    n_c = present[kinds].sum(axis=0)
    n_t = present[~kinds].sum(axis=0)
    return ClassMap(_composite_grid(n_c, n_t), scene.extent)


def _composite_grid(n_c: np.ndarray, n_t: np.ndarray) -> np.ndarray:
    table = np.full((2, 3), BACKGROUND)
    for c in range(2):
        for t in range(3):
            label = composite_label(c, t)
            if label is not None:
                table[c, t] = int(label)
    return table[np.minimum(n_c, 1), np.minimum(n_t, 2)]


# ---------------------------------------------------------------------------
# Classified-image fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RingRule:
    """Background rule for pixels outside every disk.

    A disk of radius ``R`` stands for an emitter of peak
    ``presence * exp(2 R^2 / waist^2)``.  A pixel outside all disks is
    predicted as background only if the implied total mean there is below
    ``background_threshold``; otherwise it takes the class of the brightest
    emitter.  This mirrors how a pixel classifier labels faint pixels that
    still pass the background cut.
    """

    waist: float = 1.0
    presence: float = PRESENCE_THRESHOLD
    background_threshold: float = PRESENCE_THRESHOLD


@dataclass(frozen=True)
class Disk:
    x: float
    y: float
    radius: float
    kind: str


@dataclass
class ClassifiedFit:
    disks: List[Disk]
    agreement: int
    n_pixels: int

    @property
    def centers(self) -> np.ndarray:
        return np.array([[d.x, d.y] for d in self.disks])

    def separation(self, i: int = 0, j: int = 1) -> float:
        a, b = self.disks[i], self.disks[j]
        return math.hypot(a.x - b.x, a.y - b.y)


def predicted_map(disks: Sequence[Disk], shape: Tuple[int, int], extent: float,
                  ring: Optional[RingRule] = None) -> ClassMap:
    """Class pattern implied by disk geometry (overlaps get composite classes)."""
    cm = ClassMap(np.zeros(shape, dtype=np.int64), extent)
    x, y = cm.coordinates()
    params = np.array([[d.x, d.y, d.radius] for d in disks]).ravel()
    is_c = np.array([d.kind == "C" for d in disks])
    return ClassMap(_predict_labels(params, is_c, x.ravel(), y.ravel(), ring).reshape(shape), extent)


def _predict_labels(params, is_c, x, y, ring):
    p = params.reshape(-1, 3)
    r2 = (x[None, :] - p[:, 0:1]) ** 2 + (y[None, :] - p[:, 1:2]) ** 2
    inside = r2 <= p[:, 2:3] ** 2
    labels = _composite_grid(inside[is_c].sum(axis=0), inside[~is_c].sum(axis=0))
    if ring is not None:
        outside = ~inside.any(axis=0)
        log_mean = 2.0 * (p[:, 2:3] ** 2 - r2) / ring.waist ** 2
        total = ring.presence * np.exp(log_mean).sum(axis=0)
        dominant = np.where(is_c[np.argmax(log_mean, axis=0)], int(ClassLabel.C), int(ClassLabel.T))
        labels = np.where(outside & (total >= ring.background_threshold), dominant, labels)
    return labels


def _initial_disks(obs, x, y, kinds, pitch, bounds):
    """Centroid and area-equivalent radius of the region each kind occupies."""
    has_c = np.isin(obs, [0, 2, 4])
    has_t = np.isin(obs, [1, 2, 3, 4])
    fg = obs != BACKGROUND
    params = []
    for kind in ("C", "T"):
        k = kinds.count(kind)
        if k == 0:
            continue
        region = has_c if kind == "C" else has_t
        if not region.any():
            region = fg
        rx, ry = x[region], y[region]
        if k == 1:
            parts = [np.ones(rx.size, dtype=bool)]
        else:
            # split along the principal axis into k equal-count slabs
            cov = np.cov(np.vstack([rx, ry])) if rx.size > 1 else np.eye(2)
            axis = np.linalg.eigh(cov)[1][:, -1]
            proj = (rx - rx.mean()) * axis[0] + (ry - ry.mean()) * axis[1]
            order = np.argsort(proj, kind="stable")
            parts = []
            for chunk in np.array_split(order, k):
                mask = np.zeros(rx.size, dtype=bool)
                mask[chunk] = True
                parts.append(mask)
        area = region.sum() * pitch ** 2
        radius = float(np.clip(math.sqrt(area / (math.pi * max(k, 1))), *bounds))
        for mask in parts:
            if mask.any():
                params.extend([float(rx[mask].mean()), float(ry[mask].mean()), radius])
            else:
                params.extend([float(rx.mean()), float(ry.mean()), radius])
    return np.array(params)


def _pattern_search(score, p0, steps, lower, upper, min_step):
    p = np.clip(p0, lower, upper)
    best = score(p)
    steps = np.asarray(steps, dtype=float).copy()
    while steps.max() >= min_step:
        improved = True
        while improved:
            improved = False
            for i in range(p.size):
                for d in (steps[i], -steps[i]):
                    q = p.copy()
                    q[i] = min(max(q[i] + d, lower[i]), upper[i])
                    s = score(q)
                    if s > best:
                        best, p, improved = s, q, True
        steps /= 2.0
    return p, best


def _center_on_plateau(score, p, scan_step, lower, upper, sweeps=2, half_width=16):
    """Move every coordinate to the middle of its run of best scores.

    The agreement count is piecewise constant, so the search stops anywhere
    on a plateau; the plateau centre is a deterministic, unbiased choice.
    """
    offsets = np.arange(-half_width, half_width + 1) * scan_step
    best = score(p)
    for _ in range(sweeps):
        for i in range(p.size):
            vals = np.clip(p[i] + offsets, lower[i], upper[i])
            scores = np.empty(offsets.size, dtype=np.int64)
            for j, v in enumerate(vals):
                q = p.copy()
                q[i] = v
                scores[j] = score(q)
            top = scores.max()
            if top < best:
                continue
            j = half_width if scores[half_width] == top else int(np.argmax(scores == top))
            lo = hi = j
            while lo > 0 and scores[lo - 1] == top:
                lo -= 1
            while hi < offsets.size - 1 and scores[hi + 1] == top:
                hi += 1
            p = p.copy()
            p[i] = 0.5 * (vals[lo] + vals[hi])
            best = score(p)
    return p, best


def _kind_assignments(n: int) -> List[Tuple[str, ...]]:
    return [("C",) * n_c + ("T",) * (n - n_c) for n_c in range(n, -1, -1)]


def fit_classified(class_map: ClassMap, n_emitters: int, kinds: Optional[Sequence[str]] = None,
                   ring: Optional[RingRule] = None, radius_bounds: Tuple[float, float] = (0.5, 2.0),
                   waist: float = 1.0, optimizer: str = "pattern", seed: int = 0) -> ClassifiedFit:
    """Fit labelled disks to a class map.

    The objective is the number of pixels whose observed class equals the
    class predicted by the disk geometry (see :func:`predicted_map`).  The
    default optimizer starts from per-kind region centroids, runs a
    deterministic pattern search down to 1/16 pixel and then centres every
    coordinate on its plateau of optimal agreement.  ``optimizer="evolution"``
    seeds the pattern search with differential evolution instead.

    When ``kinds`` is omitted every split into coherent and thermal emitters
    is tried and the best agreement wins (ties keep more coherent emitters).
    Radii are bounded to ``radius_bounds`` times ``waist``.
    """
    if n_emitters < 1:
        raise DomainError("n_emitters must be >= 1")
    if optimizer not in ("pattern", "evolution"):
        raise DomainError(f"unknown optimizer {optimizer!r}")
    obs = class_map.labels.ravel()
    if not np.any(obs != BACKGROUND):
        raise NoForeground("class map has no foreground pixels")
    x, y = (c.ravel() for c in class_map.coordinates())
    pitch = class_map.pitch
    bounds = (radius_bounds[0] * waist, radius_bounds[1] * waist)
    half = 0.5 * class_map.extent
    half_y = 0.5 * pitch * class_map.shape[0]
    candidates = [tuple(kinds)] if kinds is not None else _kind_assignments(n_emitters)

    best_fit = None
    for ks in candidates:
        if len(ks) != n_emitters or any(k not in KINDS for k in ks):
            raise DomainError(f"kinds must list {n_emitters} entries of 'C'/'T'")
        ks = tuple(sorted(ks))  # C before T, matching the initial layout
        is_c = np.array([k == "C" for k in ks])

        def score(p, is_c=is_c):
            return int(np.count_nonzero(_predict_labels(p, is_c, x, y, ring) == obs))

        lower = np.tile([-half, -half_y, bounds[0]], n_emitters)
        upper = np.tile([half, half_y, bounds[1]], n_emitters)
        if optimizer == "evolution":
            result = differential_evolution(lambda p: -score(p), list(zip(lower, upper)), seed=seed,
                                            polish=False, tol=0.0, maxiter=200, popsize=20)
            p0 = result.x
        else:
            p0 = _initial_disks(obs, x, y, list(ks), pitch, bounds)
        p, _ = _pattern_search(score, p0, np.full(p0.size, 2.0 * pitch), lower, upper, pitch / 16)
        p, agreement = _center_on_plateau(score, p, pitch / 16, lower, upper)
        if best_fit is None or agreement > best_fit.agreement:
            disks = [Disk(float(p[3 * i]), float(p[3 * i + 1]), float(p[3 * i + 2]), ks[i])
                     for i in range(n_emitters)]
            best_fit = ClassifiedFit(disks, agreement, obs.size)
    return best_fit


# ---------------------------------------------------------------------------
# Direct-intensity fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianComponent:
    amplitude: float
    x: float
    y: float
    waist: float


@dataclass
class DirectFit:
    components: List[GaussianComponent]
    rss: float
    r2: float
    rss_by_k: Dict[int, float] = field(default_factory=dict)

    @property
    def n_components(self) -> int:
        return len(self.components)

    def separation(self) -> float:
        if self.n_components < 2:
            return 0.0
        a, b = self.components[0], self.components[1]
        return math.hypot(a.x - b.x, a.y - b.y)


def _gauss_sum(p, x, y):
    out = np.zeros_like(x)
    for a, x0, y0, w in p.reshape(-1, 4):
        out += a * np.exp(-2.0 * ((x - x0) ** 2 + (y - y0) ** 2) / w ** 2)
    return out


def _least_squares(img, x, y, p0, w_min):
    k = p0.size // 4
    lower = np.tile([0.0, -np.inf, -np.inf, w_min], k)
    p0 = np.maximum(p0, lower + 1e-12 * (lower > -np.inf))
    res = least_squares(lambda p: _gauss_sum(p, x, y) - img, p0, bounds=(lower, np.inf),
                        method="trf", x_scale="jac", ftol=1e-15, xtol=1e-15, gtol=1e-15,
                        max_nfev=2000)
    return res.x, float(res.fun @ res.fun)


def fit_direct(image: np.ndarray, extent: float, max_components: int = 2,
               min_r2_gain: float = 0.05) -> DirectFit:
    """Least-squares fit of ``sum_i A_i exp(-2 |r - r_i|^2 / w_i^2)`` to an image.

    Fits with 1..``max_components`` Gaussians are computed in turn; a fit with
    one more component is accepted only if it raises the coefficient of
    determination ``R^2 = 1 - RSS / TSS`` (TSS about the image mean) by at
    least ``min_r2_gain``.  The first rejected step ends the search.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise DomainError("image must be two-dimensional")
    if np.any(img < 0) or not np.all(np.isfinite(img)):
        raise DomainError("image must be finite and non-negative")
    if img.sum() <= 0:
        raise DomainError("image is empty")
    if max_components < 1:
        raise DomainError("max_components must be >= 1")
    h, w = img.shape
    pitch = extent / w
    xg, yg = np.meshgrid(_pixel_centers(w, pitch), _pixel_centers(h, pitch))
    x, y, v = xg.ravel(), yg.ravel(), img.ravel()
    tss = float(((v - v.mean()) ** 2).sum())
    w_min = 0.25 * pitch

    cx = float(v @ x / v.sum())
    cy = float(v @ y / v.sum())
    cov = np.cov(np.vstack([x, y]), aweights=v)
    w0 = max(math.sqrt(2.0 * np.trace(cov)), pitch)
    p1, rss1 = _least_squares(v, x, y, np.array([v.max(), cx, cy, w0]), w_min)
    if not np.isfinite(rss1):
        raise FitDiverged("single-Gaussian fit failed")
    fits = {1: (p1, rss1)}

    axis = np.linalg.eigh(cov)[1][:, -1]
    for k in range(2, max_components + 1):
        prev, _ = fits[k - 1]
        starts = []
        if k == 2:
            a, px, py, pw = prev
            for d in (0.1, 0.3, 0.6):
                off = d * pw * axis
                starts.append(np.array([a / 2, px - off[0], py - off[1], pw,
                                        a / 2, px + off[0], py + off[1], pw]))
        resid = v - _gauss_sum(prev, x, y)
        j = int(np.argmax(resid))
        starts.append(np.concatenate([prev, [max(resid[j], 1e-3), x[j], y[j], prev[3]]]))
        best = None
        for s in starts:
            p, rss = _least_squares(v, x, y, s, w_min)
            if best is None or rss < best[1]:
                best = (p, rss)
        fits[k] = best

    chosen = 1
    for k in range(2, max_components + 1):
        gain = (fits[k - 1][1] - fits[k][1]) / tss if tss > 0 else 0.0
        if gain < min_r2_gain:
            break
        chosen = k
    p, rss = fits[chosen]
    if rss > rss1 * (1 + 1e-9):
        raise FitDiverged(f"{chosen}-component fit has larger residual than one Gaussian")
    comps = [GaussianComponent(float(a), float(cx_), float(cy_), float(ww))
             for a, cx_, cy_, ww in p.reshape(-1, 4)]
    comps.sort(key=lambda c: (c.x, c.y))
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return DirectFit(comps, rss, r2, {k: r for k, (_, r) in fits.items()})


# ---------------------------------------------------------------------------
# Imaging classifier
# ---------------------------------------------------------------------------

def presence_class_defs(presence: float = PRESENCE_THRESHOLD, peak_max: float = 1.6):
    """Random per-pixel mixes labelled by which sources are present.

    Present sources have means uniform in ``[presence, peak_max]``.  Each kind
    slot the label leaves open may hold a faint source (mean below
    ``presence``); its probability ``presence / (peak_max - presence)`` gives
    faint and present sources the same density on either side of the
    threshold, so the learned boundary is not pulled toward either side.
    """
    if not 0 < presence < peak_max:
        raise DomainError("need 0 < presence < peak_max")
    q = presence / (peak_max - presence)
    layout = {ClassLabel.C: (1, 0), ClassLabel.T: (0, 1), ClassLabel.CT: (1, 1),
              ClassLabel.TT: (0, 2), ClassLabel.CTT: (1, 2)}

    def sampler(n_c, n_t):
        def draw(rng):
            modes = [ModeSpec.coherent(rng.uniform(presence, peak_max)) for _ in range(n_c)]
            modes += [ModeSpec.thermal(rng.uniform(presence, peak_max)) for _ in range(n_t)]
            u = rng.random(2)
            faint = rng.uniform(0.0, presence, size=2)
            if n_c == 0 and u[0] < q:
                modes.append(ModeSpec.coherent(faint[0]))
            if n_t < 2 and u[1] < q:
                modes.append(ModeSpec.thermal(faint[1]))
            return DistinguishableMix(modes)
        return draw

    return {label: sampler(*nm) for label, nm in layout.items()}


def train_imaging_classifier(shots: Optional[int] = 10_000, per_class: int = 2000, seed: int = 0,
                             presence: float = PRESENCE_THRESHOLD, peak_max: float = 1.6,
                             cfg: Optional[TrainConfig] = None) -> MLPModel:
    """Train the pixel classifier on presence-labelled mixes."""
    cfg = cfg or TrainConfig(seed=seed)
    data = generate_dataset(presence_class_defs(presence, peak_max), shots, per_class, seed)
    model, _ = train_scg(MLPModel.initialize(cfg.seed), data, cfg)
    return model


# ---------------------------------------------------------------------------
# Separation sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    separations: Tuple[float, ...] = tuple(round(0.3 + 0.1 * i, 10) for i in range(18))
    repeats: int = 10
    shots: int = 10_000
    seed: int = 0
    width: int = 64
    extent: float = 4.0
    waist: float = 1.0
    peak_range: Tuple[float, float] = (1.0, 1.5)
    presence: float = PRESENCE_THRESHOLD
    max_components: int = 2
    min_r2_gain: float = 0.05
    plateau_value: float = 1.0

    def __post_init__(self):
        if self.repeats < 1:
            raise DomainError("repeats must be >= 1")
        if any(not s > 0 for s in self.separations):
            raise DomainError("separations must be positive")


@dataclass
class SeparationEstimate:
    """Estimates for one true separation (all lengths in waist units).

    ``direct_estimate`` equals the plateau value when ``plateau`` is set.
    """

    true_separation: float
    direct_estimate: float
    plateau: bool
    classified_estimate: float
    direct_repeats: List[float]
    direct_components: List[int]
    classified_repeats: List[float]


def separation_sweep(model: MLPModel, cfg: SweepConfig = SweepConfig()) -> List[SeparationEstimate]:
    """Compare classified and direct separation estimates on two-emitter scenes.

    Each repeat draws the two peak means from ``peak_range``, simulates the
    raster, classifies it with ``model`` and fits two disks, and fits Gaussians
    to the normalised mean-count image of the same raster.  When most direct
    fits settle on one Gaussian the direct estimate is the plateau value
    times the waist; otherwise it is the mean separation of the repeats that
    returned two components.
    """
    ring = RingRule(cfg.waist, cfg.presence, cfg.presence)
    out = []
    for si, s in enumerate(cfg.separations):
        direct, n_comp, classified = [], [], []
        for rep in range(cfg.repeats):
            peaks = stream_rng(cfg.seed, (5, si, rep)).uniform(*cfg.peak_range, size=2)
            scene = two_emitter_scene(s, (float(peaks[0]), float(peaks[1])), cfg.width, cfg.extent,
                                      cfg.waist)
            grid = simulate_raster(scene, cfg.shots, cfg.seed, (6, si, rep))
            cmap = classify_image(model, grid, scene.extent, cfg.presence)
            fit = fit_classified(cmap, 2, ring=ring, waist=cfg.waist)
            classified.append(fit.separation())
            img = grid.mean_image()
            dfit = fit_direct(img / img.max(), scene.extent, cfg.max_components, cfg.min_r2_gain)
            n_comp.append(dfit.n_components)
            direct.append(dfit.separation())
        singles = sum(1 for n in n_comp if n == 1)
        plateau = singles > cfg.repeats / 2
        if plateau:
            d_est = cfg.plateau_value * cfg.waist
        else:
            d_est = float(np.mean([d for d, n in zip(direct, n_comp) if n >= 2]))
        out.append(SeparationEstimate(float(s), d_est, plateau, float(np.mean(classified)),
                                      direct, n_comp, classified))
    return out


def write_sweep_csv(rows: Sequence[SeparationEstimate], fh: TextIO, header: Sequence[str] = ()) -> None:
    for line in header:
        fh.write(f"# {line}\n")
    fh.write("s_true,s_direct,plateau_flag,s_classified\n")
    for r in rows:
        fh.write(f"{r.true_separation:.17g},{r.direct_estimate:.17g},{int(r.plateau)},"
                 f"{r.classified_estimate:.17g}\n")
