"""
Feed-forward classifier for per-pixel photon statistics.

Architecture: 21 photon-number probabilities -> 10 sigmoid units -> 5 softmax
outputs, one per light class.  Training minimises the mean cross-entropy
(the KL divergence to a one-hot target) with Moller's scaled conjugate
gradient, full batch, keeping the weights with the lowest validation loss.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Mapping, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from scipy.special import expit, logsumexp

from .errors import DegenerateDataset, DomainError, SchemaError
from .photon_stats import DistinguishableMix, ModeSpec, distribution_mix
from .sampling import N_FEATURES, exact_features, features_from_counts, sample_counts, stream_rng

__all__ = [
    "ClassLabel",
    "LABELS",
    "N_CLASSES",
    "N_HIDDEN",
    "DEFAULT_CLASS_DEFS",
    "composite_label",
    "scale_mix",
    "MLPModel",
    "LabeledDataset",
    "TrainConfig",
    "TrainHistory",
    "Evaluation",
    "forward",
    "kl_loss",
    "gradient",
    "train_scg",
    "evaluate",
    "predict",
    "generate_dataset",
    "write_dataset_csv",
    "read_dataset_csv",
    "write_confusion_csv",
    "Perceptron",
    "train_perceptron",
    "CurvePoint",
    "accuracy_curve",
    "ProjectionPoint",
    "projection_clouds",
    "cloud_radii",
]

N_HIDDEN = 10
N_CLASSES = 5
SCHEMA_VERSION = 1
SAMPLING_NMAX = 40


class ClassLabel(enum.IntEnum):
    C = 0
    T = 1
    CT = 2
    TT = 3
    CTT = 4


LABELS = tuple(c.name for c in ClassLabel)


def composite_label(n_coherent: int, n_thermal: int) -> Optional[ClassLabel]:
    """Class produced by distinguishable coherent and thermal contributions.

    Any number of coherent modes merges into one Poisson contribution, so
    only presence matters for them.  Three or more thermal modes are reported
    as ``TT``, the nearest of the five classes.
    """
    c = 1 if n_coherent > 0 else 0
    t = min(n_thermal, 2)
    table = {(1, 0): ClassLabel.C, (0, 1): ClassLabel.T, (1, 1): ClassLabel.CT,
             (0, 2): ClassLabel.TT, (1, 2): ClassLabel.CTT}
    return table.get((c, t))


def _mix(*sources: Tuple[str, float]) -> DistinguishableMix:
    modes = [ModeSpec.coherent(m) if kind == "c" else ModeSpec.thermal(m) for kind, m in sources]
    return DistinguishableMix(modes)


# Every source is its own distinguishable mode (two thermal sources in one
# mode would be indistinguishable from a single thermal source).
DEFAULT_CLASS_DEFS: Dict[ClassLabel, DistinguishableMix] = {
    ClassLabel.C: _mix(("c", 1.5)),
    ClassLabel.T: _mix(("t", 1.1)),
    ClassLabel.CT: _mix(("c", 0.5), ("t", 1.0)),
    ClassLabel.TT: _mix(("t", 0.75), ("t", 0.75)),
    ClassLabel.CTT: _mix(("c", 0.6), ("t", 0.2), ("t", 0.2)),
}


MixSource = Union[DistinguishableMix, Callable[[np.random.Generator], DistinguishableMix]]


def scale_mix(mix: DistinguishableMix, factor: float) -> DistinguishableMix:
    """Multiply every mean photon number in ``mix`` by ``factor``."""
    root = math.sqrt(factor)
    return DistinguishableMix([
        ModeSpec(m.alpha_re * root, m.alpha_im * root, tuple(v * factor for v in m.m_thermal))
        for m in mix.modes
    ])


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class MLPModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    labels: Tuple[str, ...] = LABELS

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=float).reshape(N_HIDDEN, N_FEATURES)
        self.b1 = np.asarray(self.b1, dtype=float).reshape(N_HIDDEN)
        self.w2 = np.asarray(self.w2, dtype=float).reshape(N_CLASSES, N_HIDDEN)
        self.b2 = np.asarray(self.b2, dtype=float).reshape(N_CLASSES)
        self.labels = tuple(self.labels)
        if self.labels != LABELS:
            raise SchemaError(f"label order must be {LABELS}, got {self.labels}")
        for name in ("w1", "b1", "w2", "b2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DomainError(f"non-finite weights in {name}")

    @classmethod
    def initialize(cls, seed: int, scale: float = 0.5) -> "MLPModel":
        """Weights and biases uniform in ``[-scale, scale]``."""
        rng = stream_rng(seed, (7,))
        u = lambda *shape: rng.uniform(-scale, scale, size=shape)  # noqa: E731
        return cls(u(N_HIDDEN, N_FEATURES), u(N_HIDDEN), u(N_CLASSES, N_HIDDEN), u(N_CLASSES))

    @classmethod
    def zeros(cls) -> "MLPModel":
        return cls.from_vector(np.zeros(cls.n_params()))

    @staticmethod
    def n_params() -> int:
        return N_HIDDEN * N_FEATURES + N_HIDDEN + N_CLASSES * N_HIDDEN + N_CLASSES

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "MLPModel":
        v = np.asarray(v, dtype=float)
        i = N_HIDDEN * N_FEATURES
        j = i + N_HIDDEN
        k = j + N_CLASSES * N_HIDDEN
        return cls(v[:i], v[i:j], v[j:k], v[k:])

    def to_json(self) -> str:
        def mat(a):
            return "[" + ", ".join("[" + ", ".join(_fmt(x) for x in row) + "]" for row in a) + "]"

        def vec(a):
            return "[" + ", ".join(_fmt(x) for x in a) + "]"

        return ("{\n"
                f'  "schema_version": {SCHEMA_VERSION},\n'
                f'  "labels": {json.dumps(list(self.labels))},\n'
                f'  "w1": {mat(self.w1)},\n'
                f'  "b1": {vec(self.b1)},\n'
                f'  "w2": {mat(self.w2)},\n'
                f'  "b2": {vec(self.b2)}\n'
                "}\n")

    @classmethod
    def from_json(cls, text: str) -> "MLPModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"model file is not valid JSON: {exc}") from exc
        missing = {"schema_version", "labels", "w1", "b1", "w2", "b2"} - set(doc)
        if missing:
            raise SchemaError(f"model file lacks fields {sorted(missing)}")
        if doc["schema_version"] != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema_version {doc['schema_version']}")
        shapes = {"w1": (N_HIDDEN, N_FEATURES), "b1": (N_HIDDEN,),
                  "w2": (N_CLASSES, N_HIDDEN), "b2": (N_CLASSES,)}
        for name, shape in shapes.items():
            got = np.shape(doc[name])
            if got != shape:
                raise SchemaError(f"{name} has shape {got}, expected {shape}")
        return cls(doc["w1"], doc["b1"], doc["w2"], doc["b2"], tuple(doc["labels"]))


def _logits(model: MLPModel, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    h = expit(x @ model.w1.T + model.b1)
    return h, h @ model.w2.T + model.b2


def forward(model: MLPModel, x) -> np.ndarray:
    """Class probabilities for one feature vector or a batch (rows)."""
    x = np.asarray(getattr(x, "probs", x), dtype=float)
    _, z = _logits(model, x)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _target_index(target) -> np.ndarray:
    t = np.asarray(target)
    if t.ndim >= 1 and t.shape[-1] == N_CLASSES and t.dtype.kind == "f":
        return np.argmax(t, axis=-1)
    return t.astype(int)


def kl_loss(predicted, target) -> float:
    """KL divergence from a one-hot target, i.e. ``-ln predicted[target]``.

    ``target`` may be class indices or one-hot rows; batches are averaged.
    """
    p = np.atleast_2d(np.asarray(predicted, dtype=float))
    idx = np.atleast_1d(_target_index(target))
    return float(-np.mean(np.log(p[np.arange(p.shape[0]), idx])))


def _loss_grad(model: MLPModel, x: np.ndarray, y: np.ndarray):
    n = x.shape[0]
    h, z = _logits(model, x)
    lse = logsumexp(z, axis=1)
    loss = float(np.mean(lse - z[np.arange(n), y]))
    p = np.exp(z - lse[:, None])
    dz = p
    dz[np.arange(n), y] -= 1.0
    dz /= n
    da = (dz @ model.w2) * h * (1.0 - h)
    grads = {"w1": da.T @ x, "b1": da.sum(axis=0), "w2": dz.T @ h, "b2": dz.sum(axis=0)}
    return loss, grads


def _loss(model: MLPModel, x: np.ndarray, y: np.ndarray) -> float:
    _, z = _logits(model, x)
    return float(np.mean(logsumexp(z, axis=1) - z[np.arange(x.shape[0]), y]))


def gradient(model: MLPModel, x, y) -> Dict[str, np.ndarray]:
    """Exact gradient of the mean :func:`kl_loss` over a batch."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(_target_index(y))
    if x.shape[0] == 0:
        raise DomainError("gradient needs a non-empty batch")
    return _loss_grad(model, x, y)[1]


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------

@dataclass
class LabeledDataset:
    """Feature matrix, labels and a fixed train/validation/test partition."""

    x: np.ndarray
    y: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    split: Tuple[float, float, float] = (0.70, 0.15, 0.15)

    def __post_init__(self):
        if abs(sum(self.split) - 1.0) > 1e-12:
            raise DomainError(f"split fractions must sum to 1, got {self.split}")
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=int)

    @property
    def train(self):
        return self.x[self.train_idx], self.y[self.train_idx]

    @property
    def validation(self):
        return self.x[self.val_idx], self.y[self.val_idx]

    @property
    def test(self):
        return self.x[self.test_idx], self.y[self.test_idx]

    def __len__(self):
        return self.y.size


def _split_counts(n: int, split: Sequence[float]) -> Tuple[int, int, int]:
    n_train = int(round(split[0] * n))
    n_val = int(round(split[1] * n))
    return n_train, n_val, n - n_train - n_val


def generate_dataset(class_defs: Mapping[ClassLabel, MixSource], shots: Optional[int],
                     per_class: int, seed: int,
                     brightness_range: Optional[Tuple[float, float]] = None,
                     split: Tuple[float, float, float] = (0.70, 0.15, 0.15)) -> LabeledDataset:
    """Sample ``per_class`` histograms of ``shots`` detections for every class.

    A class definition is either a fixed mix or a callable ``f(rng)`` that
    draws a mix per histogram.  With ``brightness_range=(lo, hi)`` each
    histogram's mix is rescaled so its total mean photon number is uniform in
    ``[lo, hi]``; the split of photons between sources is kept.  The split is
    stratified per class.  ``shots=None`` stores exact features (the
    infinite-shot limit) instead of sampled ones.
    """
    labels = [ClassLabel(c) for c in sorted(int(k) for k in class_defs)]
    if labels != list(ClassLabel):
        raise DomainError("class_defs must define all five classes")
    if per_class < 1:
        raise DomainError("per_class must be >= 1")
    feats = []
    ys = []
    for ci in ClassLabel:
        spec = class_defs[ci]
        drawn = callable(spec)
        fixed = None if (drawn or brightness_range) else distribution_mix(spec, SAMPLING_NMAX)
        for i in range(per_class):
            if fixed is not None:
                dist = fixed
            else:
                rng = stream_rng(seed, (1, int(ci), i))
                mix = spec(rng) if drawn else spec
                if brightness_range:
                    mix = scale_mix(mix, rng.uniform(*brightness_range) / mix.mean)
                dist = distribution_mix(mix, SAMPLING_NMAX)
            if shots is None:
                feats.append(exact_features(dist).probs)
            else:
                hist = sample_counts(dist, shots, seed, (0, int(ci), i))
                feats.append(features_from_counts(hist.counts, hist.shots))
            ys.append(int(ci))
    x = np.array(feats)
    y = np.array(ys)

    n_train, n_val, _ = _split_counts(per_class, split)
    parts = ([], [], [])
    for ci in ClassLabel:
        order = int(ci) * per_class + stream_rng(seed, (2, int(ci))).permutation(per_class)
        parts[0].append(order[:n_train])
        parts[1].append(order[n_train:n_train + n_val])
        parts[2].append(order[n_train + n_val:])
    idx = []
    for k, p in enumerate(parts):
        cat = np.concatenate(p)
        idx.append(cat[stream_rng(seed, (3, k)).permutation(cat.size)])
    return LabeledDataset(x, y, idx[0], idx[1], idx[2], tuple(split))


def write_dataset_csv(x: np.ndarray, y: np.ndarray, fh: TextIO, header: Sequence[str] = ()) -> None:
    for line in header:
        fh.write(f"# {line}\n")
    fh.write(",".join(f"p{n}" for n in range(N_FEATURES)) + ",label\n")
    for row, label in zip(x, y):
        fh.write(",".join(_fmt(v) for v in row) + "," + LABELS[int(label)] + "\n")


def read_dataset_csv(fh: TextIO) -> Tuple[np.ndarray, np.ndarray]:
    rows, labels = [], []
    header = None
    for raw in fh:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = line.split(",")
        if header is None:
            header = cells
            if len(cells) != N_FEATURES + 1 or cells[-1] != "label":
                raise SchemaError(
                    f"dataset needs {N_FEATURES} feature columns plus 'label', "
                    f"got {len(cells) - 1} feature columns")
            continue
        if len(cells) != N_FEATURES + 1:
            raise SchemaError(f"row has {len(cells)} cells, expected {N_FEATURES + 1}")
        if cells[-1] not in LABELS:
            raise SchemaError(f"unknown label {cells[-1]!r}")
        rows.append([float(c) for c in cells[:-1]])
        labels.append(LABELS.index(cells[-1]))
    if header is None:
        raise SchemaError("dataset file is empty")
    return np.array(rows, dtype=float).reshape(-1, N_FEATURES), np.array(labels, dtype=int)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    patience_epochs: int = 1000
    max_epochs: int = 5000
    seed: int = 0
    sigma: float = 1e-5
    lambda_init: float = 1e-7

    def __post_init__(self):
        if self.patience_epochs > self.max_epochs:
            raise DomainError("patience_epochs must not exceed max_epochs")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = ""


def train_scg(model: MLPModel, data: LabeledDataset, cfg: TrainConfig = TrainConfig()):
    """Train with scaled conjugate gradient (Moller 1993) and early stopping.

    One epoch is one SCG iteration over the full training split.  Returns the
    parameters of the epoch with the lowest validation loss and the history.
    """
    xt, yt = data.train
    xv, yv = data.validation
    missing = set(range(N_CLASSES)) - set(np.unique(yt).tolist())
    if missing:
        raise DegenerateDataset(f"classes {[LABELS[m] for m in sorted(missing)]} absent from training split")
    if xv.shape[0] == 0:
        raise DegenerateDataset("validation split is empty")

    def f(vec):
        loss, g = _loss_grad(MLPModel.from_vector(vec), xt, yt)
        return loss, np.concatenate([g["w1"].ravel(), g["b1"], g["w2"].ravel(), g["b2"]])

    def val(vec):
        return _loss(MLPModel.from_vector(vec), xv, yv)

    w = model.to_vector()
    n_w = w.size
    err, grad = f(w)
    r = -grad
    p = r.copy()
    lam = cfg.lambda_init
    lam_bar = 0.0
    success = True
    delta = 0.0

    hist = TrainHistory()
    hist.train_loss.append(err)
    hist.val_loss.append(val(w))
    best_w, best_val = w.copy(), hist.val_loss[0]

    for epoch in range(1, cfg.max_epochs + 1):
        p_sq = float(p @ p)
        if p_sq == 0.0:
            hist.stop_reason = "zero gradient"
            break
        if success:
            sigma_k = cfg.sigma / math.sqrt(p_sq)
            _, grad_s = f(w + sigma_k * p)
            delta = float(p @ (grad_s - grad)) / sigma_k
        # scale (Levenberg-Marquardt term) and force a positive-definite step
        delta += (lam - lam_bar) * p_sq
        if delta <= 0.0:
            lam_bar = 2.0 * (lam - delta / p_sq)
            delta = -delta + lam * p_sq
            lam = lam_bar
        mu = float(p @ r)
        if mu <= 0.0:
            p = r.copy()
            success = True
            lam_bar = 0.0
            hist.train_loss.append(err)
            hist.val_loss.append(hist.val_loss[-1])
            continue
        alpha = mu / delta
        w_new = w + alpha * p
        err_new, grad_new = f(w_new)
        comparison = 2.0 * delta * (err - err_new) / mu ** 2
        if comparison >= 0.0:
            w = w_new
            r_new = -grad_new
            lam_bar = 0.0
            success = True
            if epoch % n_w == 0:
                p_next = r_new
            else:
                beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                p_next = r_new + beta * p
            r = r_new
            err, grad = err_new, grad_new
            if comparison >= 0.75:
                lam = lam / 4.0
        else:
            lam_bar = lam
            success = False
            p_next = p
        if comparison < 0.25:
            lam = lam + delta * (1.0 - comparison) / p_sq
        lam = min(lam, 1e50)
        p = p_next

        v = val(w)
        hist.train_loss.append(err)
        hist.val_loss.append(v)
        if v < best_val:
            best_val = v
            best_w = w.copy()
            hist.best_epoch = epoch
        if epoch - hist.best_epoch >= cfg.patience_epochs:
            hist.stop_reason = "validation patience"
            break
        if not np.any(r):
            hist.stop_reason = "zero gradient"
            break
    else:
        hist.stop_reason = "max epochs"
    return MLPModel.from_vector(best_w), hist


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class Evaluation:
    accuracy: float
    confusion: np.ndarray


def predict(model: MLPModel, x) -> np.ndarray:
    """Argmax class indices; ties go to the lower class index."""
    return np.argmax(forward(model, x), axis=-1)


def evaluate(model: MLPModel, x, y) -> Evaluation:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=int)
    if y.size == 0:
        raise DomainError("evaluation set is empty")
    pred = predict(model, x)
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    return Evaluation(float(np.trace(confusion)) / y.size, confusion)


def write_confusion_csv(ev: Evaluation, fh: TextIO, header: Sequence[str] = ()) -> None:
    for line in header:
        fh.write(f"# {line}\n")
    fh.write(f"# accuracy={_fmt(ev.accuracy)}\n")
    fh.write("true\\pred," + ",".join(LABELS) + "\n")
    for i, row in enumerate(ev.confusion):
        fh.write(LABELS[i] + "," + ",".join(str(int(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Linear separability probe
# ---------------------------------------------------------------------------

@dataclass
class Perceptron:
    weights: np.ndarray
    bias: np.ndarray
    center: np.ndarray
    scale: np.ndarray

    def predict(self, x) -> np.ndarray:
        z = (np.atleast_2d(x) - self.center) / self.scale
        return np.argmax(z @ self.weights.T + self.bias, axis=1)


def train_perceptron(x, y, epochs: int = 1000, seed: int = 0) -> Perceptron:
    """Multi-class perceptron (a single linear layer) with weight averaging.

    Stops early after an epoch without mistakes, which on linearly separable
    data is guaranteed to happen.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    center = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    z = (x - center) / scale
    k = int(y.max()) + 1
    w = np.zeros((k, z.shape[1]))
    b = np.zeros(k)
    w_sum = np.zeros_like(w)
    b_sum = np.zeros_like(b)
    count = 0
    rng = stream_rng(seed, (11,))
    for _ in range(epochs):
        mistakes = 0
        for i in rng.permutation(len(y)):
            guess = int(np.argmax(w @ z[i] + b))
            if guess != y[i]:
                mistakes += 1
                w[y[i]] += z[i]
                b[y[i]] += 1.0
                w[guess] -= z[i]
                b[guess] -= 1.0
            w_sum += w
            b_sum += b
            count += 1
        if mistakes == 0:
            return Perceptron(w, b, center, scale)
    return Perceptron(w_sum / count, b_sum / count, center, scale)


# ---------------------------------------------------------------------------
# Experiments over the number of shots per histogram
# ---------------------------------------------------------------------------

@dataclass
class CurvePoint:
    shots: int
    seed: int
    test_accuracy: float
    stop_reason: str


def accuracy_curve(class_defs: Mapping[ClassLabel, MixSource], shots_list: Sequence[int],
                   seeds: Sequence[int], per_class: int = 1000,
                   cfg: Optional[TrainConfig] = None) -> List[CurvePoint]:
    """Test accuracy for every ``(shots, seed)``: fresh data, fresh model, SCG training.

    The training seed follows the data seed, so every point is reproducible
    on its own.
    """
    out = []
    for shots in shots_list:
        for seed in seeds:
            data = generate_dataset(class_defs, int(shots), per_class, int(seed))
            tc = replace(cfg, seed=int(seed)) if cfg is not None else TrainConfig(seed=int(seed))
            model, hist = train_scg(MLPModel.initialize(tc.seed), data, tc)
            out.append(CurvePoint(int(shots), int(seed), evaluate(model, *data.test).accuracy,
                                  hist.stop_reason))
    return out


@dataclass
class ProjectionPoint:
    label: ClassLabel
    shots: Optional[int]  # None marks the exact-distribution anchor
    p: Tuple[float, float, float]


def projection_clouds(class_defs: Mapping[ClassLabel, DistinguishableMix], shots_list: Sequence[int],
                      points: int, seed: int) -> List[ProjectionPoint]:
    """``(p0, p1, p2)`` of sampled histograms per class and shot count.

    Each class contributes one anchor row from its exact distribution first,
    then ``points`` sampled rows for every entry of ``shots_list``.
    """
    if points < 1:
        raise DomainError("points must be >= 1")
    out = []
    for ci in ClassLabel:
        dist = distribution_mix(class_defs[ci], SAMPLING_NMAX)
        out.append(ProjectionPoint(ci, None, tuple(float(v) for v in dist.probs[:3])))
        for di, shots in enumerate(shots_list):
            for i in range(points):
                hist = sample_counts(dist, int(shots), seed, (8, int(ci), di, i))
                p = hist.counts[:3] / float(hist.shots)
                out.append(ProjectionPoint(ci, int(shots), tuple(float(v) for v in p)))
    return out


def cloud_radii(rows: Sequence[ProjectionPoint]) -> Dict[Tuple[ClassLabel, int], float]:
    """Mean distance of each ``(class, shots)`` cloud from its class anchor."""
    anchors = {r.label: np.array(r.p) for r in rows if r.shots is None}
    dist: Dict[Tuple[ClassLabel, int], list] = {}
    for r in rows:
        if r.shots is not None:
            dist.setdefault((r.label, r.shots), []).append(float(np.linalg.norm(np.array(r.p) - anchors[r.label])))
    return {k: float(np.mean(v)) for k, v in dist.items()}
