"""
Command-line entry point.

Every output file starts with ``#`` comment lines giving the tool version,
the command line, the seed and the resolved settings, and contains no
timestamps, so rerunning a command with the same flags reproduces it byte for
byte.  JSON documents (models, manifests) carry the same header; readers skip
leading ``#`` lines.

Settings come from, in increasing priority: built-in defaults, top-level keys
of the ``--config`` JSON file, the file's section named after the
subcommand, and command-line flags.  ``QSIMAGING_OUTPUT_DIR`` sets the
default output directory.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 domain error.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import shlex
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .classifier import (
    DEFAULT_CLASS_DEFS, LABELS, ClassLabel, LabeledDataset, MLPModel, TrainConfig, accuracy_curve,
    evaluate, generate_dataset, projection_clouds, read_dataset_csv, train_scg,
    write_confusion_csv, write_dataset_csv,
)
from .errors import QSIError, SchemaError
from .fitting import DEFAULT_GRID_STEP, DEFAULT_NFIT, fit_distribution, write_fit_result
from .imaging_sim import (
    DEFAULT_BACKGROUND_THRESHOLD, ClassMap, HistogramGrid, RingRule, Scene,
    SweepConfig, classify_image, fit_classified, separation_sweep, simulate_raster,
    train_imaging_classifier, write_intensity_csv, write_intensity_pgm, write_sweep_csv,
)
from .photon_stats import DistinguishableMix, ModeSpec
from .sampling import read_histogram_csv

OUTPUT_ENV = "QSIMAGING_OUTPUT_DIR"
PROG = "qsimaging"

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DOMAIN = 0, 2, 3, 4


class UsageError(Exception):
    """Invalid flag value; reported with exit code 2."""


# ---------------------------------------------------------------------------
# Argument parsing and settings
# ---------------------------------------------------------------------------

def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# flag name -> (type, default, help) per subcommand; defaults live here so a
# config file can fill in anything the command line omits
COMMON = {
    "seed": (int, 0, "master random seed"),
    "out": (str, None, f"output directory (default ${OUTPUT_ENV} or .)"),
}

COMMANDS: Dict[str, Dict[str, Any]] = {
    "gen-data": {
        "help": "generate train/val/test feature CSVs for the five light classes",
        "flags": {
            "shots": (int, 3500, "detections per histogram"),
            "per-class": (int, 1000, "histograms per class"),
            "classes": (str, None, "JSON file mapping class names to source lists"),
        },
    },
    "train": {
        "help": "train the classifier on gen-data output (or the imaging classifier)",
        "flags": {
            "data": (str, None, "directory holding train.csv and val.csv"),
            "model": (str, "model.json", "model file name, relative to the output directory"),
            "max-epochs": (int, 5000, "SCG iteration cap"),
            "patience": (int, 1000, "epochs without validation improvement before stopping"),
            "imaging": (bool, False, "train the presence-labelled pixel classifier instead"),
            "shots": (int, 10_000, "detections per histogram for --imaging"),
            "per-class": (int, 2000, "histograms per class for --imaging"),
        },
    },
    "eval": {
        "help": "evaluate a model on a dataset CSV",
        "flags": {
            "model": (str, None, "model file"),
            "data": (str, None, "dataset CSV, or a gen-data directory (uses test.csv)"),
        },
    },
    "eval-curve": {
        "help": "test accuracy as a function of the shots per histogram",
        "flags": {
            "shots": (_int_list, [100, 500, 1000, 3500, 10000], "comma-separated shot counts"),
            "seeds": (_int_list, [0, 1, 2, 3, 4], "comma-separated seeds to average over"),
            "per-class": (int, 1000, "histograms per class"),
            "max-epochs": (int, 5000, "SCG iteration cap"),
            "patience": (int, 1000, "epochs without validation improvement before stopping"),
        },
    },
    "simulate": {
        "help": "simulate photon-number-resolving raster detection of a scene",
        "flags": {
            "scene": (str, None, "scene JSON file"),
            "shots": (int, 10_000, "detections per pixel"),
        },
    },
    "classify": {
        "help": "simulate (or load) a raster and classify every pixel",
        "flags": {
            "scene": (str, None, "scene JSON file"),
            "model": (str, None, "pixel classifier model file"),
            "histograms": (str, None, "histograms.csv from simulate (skips simulation)"),
            "shots": (int, 10_000, "detections per pixel"),
            "background-threshold": (float, DEFAULT_BACKGROUND_THRESHOLD,
                                     "pixels with a lower mean photon number are background"),
            "fit": (int, 0, "fit this many labelled disks to the class map (0: no fit)"),
        },
    },
    "sweep": {
        "help": "compare classified and direct separation estimates on two-emitter scenes",
        "flags": {
            "model": (str, None, "pixel classifier model file (default: train one)"),
            "separations": (_float_list, list(SweepConfig().separations), "comma-separated separations in waists"),
            "repeats": (int, 10, "repeats per separation"),
            "shots": (int, 10_000, "detections per pixel"),
            "width": (int, 64, "grid size in pixels"),
            "extent": (float, 4.0, "grid width in waists"),
            "plateau-value": (float, 1.0, "direct estimate reported on the plateau, in waists"),
            "min-r2-gain": (float, 0.05, "R^2 gain needed to accept a second Gaussian"),
        },
    },
    "fit-dist": {
        "help": "decompose a measured photon-number distribution into sources",
        "flags": {
            "input": (str, None, "histogram CSV (n,count) or distribution CSV (n,p)"),
            "grid-step": (float, DEFAULT_GRID_STEP, "resolution of the fitted mean photon numbers"),
            "n-fit": (int, DEFAULT_NFIT, "highest photon number in the objective"),
        },
    },
    "features": {
        "help": "export (p0, p1, p2) projections of sampled histograms per class",
        "flags": {
            "shots": (_int_list, [10, 100, 1000, 10000], "comma-separated shot counts"),
            "points": (int, 200, "histograms per class and shot count"),
            "classes": (str, None, "JSON file mapping class names to source lists"),
        },
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Photon-statistics imaging toolkit.")
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, spec in COMMANDS.items():
        p = sub.add_parser(name, help=spec["help"], description=spec["help"])
        p.add_argument("--config", default=None, help="JSON settings file (flags take precedence)")
        for flag, (typ, default, text) in {**COMMON, **spec["flags"]}.items():
            shown = default if not isinstance(default, list) else ",".join(str(v) for v in default)
            if typ is bool:
                p.add_argument(f"--{flag}", action="store_const", const=True, default=None,
                               help=text)
            else:
                p.add_argument(f"--{flag}", type=typ, default=None, help=f"{text} (default: {shown})")
    return parser


def _key(flag: str) -> str:
    return flag.replace("-", "_")


def resolve_settings(command: str, args: argparse.Namespace) -> Dict[str, Any]:
    """Merge defaults, config file and flags into one settings dict."""
    flags = {**COMMON, **COMMANDS[command]["flags"]}
    settings = {_key(f): d for f, (_, d, _) in flags.items()}
    if args.config:
        try:
            doc = json.loads(_strip_comments(Path(args.config).read_text()))
        except json.JSONDecodeError as exc:
            raise UsageError(f"--config: not valid JSON: {exc}")
        if not isinstance(doc, dict):
            raise UsageError("--config: expected a JSON object")
        layers = [{k: v for k, v in doc.items() if not isinstance(v, dict) or k == "classes"},
                  doc.get(command, {})]
        for layer in layers:
            for k, v in layer.items():
                k = _key(k)
                if k not in settings:
                    continue
                typ = flags[k.replace("_", "-")][0]
                if typ in (_int_list, _float_list) and not isinstance(v, list):
                    v = typ(v)
                settings[k] = v
    for f in flags:
        v = getattr(args, _key(f))
        if v is not None:
            settings[_key(f)] = v
    if settings["out"] is None:
        settings["out"] = os.environ.get(OUTPUT_ENV, ".")
    return settings


def _require(settings, *names):
    for n in names:
        if settings.get(n) in (None, ""):
            raise UsageError(f"--{n.replace('_', '-')} is required")


def _positive(settings, *names):
    for n in names:
        v = settings[n]
        values = v if isinstance(v, list) else [v]
        if not values or any(x is None or x < 1 for x in values):
            raise UsageError(f"--{n.replace('_', '-')} must be >= 1")


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

class Run:
    """Output directory plus the header every written file starts with."""

    def __init__(self, command: str, argv: Sequence[str], settings: Dict[str, Any]):
        self.out = Path(settings["out"])
        shown = {k: v for k, v in sorted(settings.items()) if k != "out"}
        self.header = [
            f"{PROG} {__version__}",
            "command: " + shlex.join([PROG, *argv]),
            f"seed: {settings['seed']}",
            "settings: " + json.dumps(shown, sort_keys=True),
        ]

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name

    def open(self, name: str):
        return open(self.path(name), "w", encoding="utf-8", newline="\n")

    def write_json(self, name: str, text: str) -> Path:
        with self.open(name) as fh:
            for line in self.header:
                fh.write(f"# {line}\n")
            fh.write(text)
        return self.out / name


def _strip_comments(text: str) -> str:
    return "\n".join(line for line in text.splitlines() if not line.lstrip().startswith("#"))


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def load_model(path: str) -> MLPModel:
    return MLPModel.from_json(_strip_comments(_read_text(path)))


def load_scene(path: str) -> Scene:
    text = _strip_comments(_read_text(path)).strip()
    if not text:
        raise UsageError(f"--scene: {path} is empty")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--scene: {path} is not valid JSON: {exc}")
    if not isinstance(doc, dict) or not doc.get("emitters"):
        raise UsageError(f"--scene: {path} lists no emitters")
    return Scene.from_dict(doc)


def load_class_defs(path: Optional[str]):
    """Class file: ``{"C": [["c", 1.5]], "CT": [["c", 0.5], ["t", 1.0]], ...}``."""
    if path is None:
        return DEFAULT_CLASS_DEFS
    try:
        doc = json.loads(_strip_comments(_read_text(path)))
        defs = {}
        for name in LABELS:
            modes = []
            for kind, mean in doc[name]:
                if kind not in ("c", "t"):
                    raise ValueError(f"source kind must be 'c' or 't', got {kind!r}")
                modes.append(ModeSpec.coherent(float(mean)) if kind == "c" else ModeSpec.thermal(float(mean)))
            defs[ClassLabel[name]] = DistinguishableMix(modes)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"--classes: invalid class file {path}: {exc}")
    return defs


def write_histogram_grid(grid: HistogramGrid, fh, header: Sequence[str]) -> None:
    for line in header:
        fh.write(f"# {line}\n")
    fh.write(f"# shots={grid.shots}\n")
    n = grid.counts.shape[-1]
    fh.write("py,px," + ",".join(f"c{k}" for k in range(n)) + "\n")
    h, w = grid.shape
    for py in range(h):
        for px in range(w):
            fh.write(f"{py},{px}," + ",".join(str(int(v)) for v in grid.counts[py, px]) + "\n")


def read_histogram_grid(path: str) -> HistogramGrid:
    rows = []
    shots = None
    for line in _read_text(path).splitlines():
        if line.startswith("# shots="):
            shots = int(line.split("=", 1)[1])
        if not line or line.startswith("#") or line.startswith("py,"):
            continue
        try:
            rows.append([int(v) for v in line.split(",")])
        except ValueError as exc:
            raise SchemaError(f"{path}: malformed row: {exc}") from exc
    if not rows or shots is None:
        raise UsageError(f"--histograms: {path} holds no histogram grid")
    if len({len(r) for r in rows}) != 1:
        raise SchemaError(f"{path}: rows differ in length")
    a = np.array(rows, dtype=np.int64)
    h, w = a[:, 0].max() + 1, a[:, 1].max() + 1
    counts = np.zeros((h, w, a.shape[1] - 2), dtype=np.int64)
    counts[a[:, 0], a[:, 1]] = a[:, 2:]
    return HistogramGrid(counts, shots)


def read_distribution(path: str) -> np.ndarray:
    """Measured ``p(n)`` from a histogram CSV (``n,count``) or distribution CSV (``n,p``)."""
    text = _read_text(path)
    body = [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]
    if not body:
        raise UsageError(f"--input: {path} is empty")
    head = body[0].replace(" ", "")
    if head == "n,count":
        try:
            hist = read_histogram_csv(io.StringIO(text))
        except ValueError as exc:
            raise SchemaError(f"{path}: {exc}") from exc
        return hist.counts / float(hist.shots)
    if head in ("n,p", "n,p_exp", "n,probability"):
        try:
            rows = [(int(n), float(v)) for n, v in (line.split(",") for line in body[1:])]
        except ValueError as exc:
            raise SchemaError(f"{path}: malformed row: {exc}") from exc
        if not rows:
            raise SchemaError(f"{path}: no rows")
        p = np.zeros(max(n for n, _ in rows) + 1)
        for n, v in rows:
            p[n] = v
        return p
    raise UsageError(f"--input: expected header 'n,count' or 'n,p', got {body[0]!r}")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen_data(run: Run, s: Dict[str, Any]) -> None:
    _positive(s, "shots", "per_class")
    defs = load_class_defs(s["classes"])
    data = generate_dataset(defs, s["shots"], s["per_class"], s["seed"])
    for name, (x, y) in (("train", data.train), ("val", data.validation), ("test", data.test)):
        with run.open(f"{name}.csv") as fh:
            write_dataset_csv(x, y, fh, run.header)
    manifest = {
        "files": ["train.csv", "val.csv", "test.csv"],
        "shots": s["shots"],
        "per_class": s["per_class"],
        "seed": s["seed"],
        "split": list(data.split),
        "sizes": {"train": int(data.train_idx.size), "val": int(data.val_idx.size),
                  "test": int(data.test_idx.size)},
        "classes": {LABELS[c]: [[m.alpha_sq, list(m.m_thermal)] for m in defs[c].modes]
                    for c in ClassLabel},
    }
    run.write_json("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(data)} histograms to {run.out}")


def _dataset_from_dir(path: str) -> LabeledDataset:
    parts = []
    for name in ("train", "val"):
        with open(Path(path) / f"{name}.csv", encoding="utf-8") as fh:
            parts.append(read_dataset_csv(fh))
    (xt, yt), (xv, yv) = parts
    n_t, n_v = len(yt), len(yv)
    idx = np.arange(n_t + n_v)
    return LabeledDataset(np.vstack([xt, xv]), np.concatenate([yt, yv]), idx[:n_t], idx[n_t:],
                          idx[:0], (n_t / (n_t + n_v), n_v / (n_t + n_v), 0.0))


def cmd_train(run: Run, s: Dict[str, Any]) -> None:
    _positive(s, "max_epochs", "patience")
    if s["patience"] > s["max_epochs"]:
        raise UsageError("--patience must not exceed --max-epochs")
    cfg = TrainConfig(patience_epochs=s["patience"], max_epochs=s["max_epochs"], seed=s["seed"])
    if s["imaging"]:
        _positive(s, "shots", "per_class")
        model = train_imaging_classifier(s["shots"], s["per_class"], s["seed"], cfg=cfg)
        print(f"trained imaging classifier on {5 * s['per_class']} histograms")
    else:
        _require(s, "data")
        model, hist = train_scg(MLPModel.initialize(cfg.seed), _dataset_from_dir(s["data"]), cfg)
        with run.open(Path(s["model"]).stem + "_history.csv") as fh:
            for line in run.header:
                fh.write(f"# {line}\n")
            fh.write(f"# stop_reason={hist.stop_reason} best_epoch={hist.best_epoch}\n")
            fh.write("epoch,train_loss,val_loss\n")
            for i, (a, b) in enumerate(zip(hist.train_loss, hist.val_loss)):
                fh.write(f"{i},{_fmt(a)},{_fmt(b)}\n")
        print(f"stopped: {hist.stop_reason}; best epoch {hist.best_epoch}")
    path = run.write_json(s["model"], model.to_json())
    print(f"model written to {path}")


def cmd_eval(run: Run, s: Dict[str, Any]) -> None:
    _require(s, "model", "data")
    model = load_model(s["model"])
    data = Path(s["data"])
    if data.is_dir():
        data = data / "test.csv"
    with open(data, encoding="utf-8") as fh:
        x, y = read_dataset_csv(fh)
    ev = evaluate(model, x, y)
    with run.open("confusion.csv") as fh:
        write_confusion_csv(ev, fh, run.header)
    print(f"accuracy {ev.accuracy:.4f} on {len(y)} histograms")


def cmd_eval_curve(run: Run, s: Dict[str, Any]) -> None:
    _positive(s, "shots", "per_class", "max_epochs", "patience")
    if not s["seeds"] or min(s["seeds"]) < 0:
        raise UsageError("--seeds must list non-negative integers")
    cfg = TrainConfig(patience_epochs=s["patience"], max_epochs=s["max_epochs"])
    points = accuracy_curve(DEFAULT_CLASS_DEFS, s["shots"], s["seeds"], s["per_class"], cfg)
    with run.open("eval_curve.csv") as fh:
        for line in run.header:
            fh.write(f"# {line}\n")
        fh.write("shots,seed,test_accuracy,stop_reason\n")
        for p in points:
            fh.write(f"{p.shots},{p.seed},{_fmt(p.test_accuracy)},{p.stop_reason}\n")
    with run.open("eval_curve_summary.csv") as fh:
        for line in run.header:
            fh.write(f"# {line}\n")
        fh.write("shots,mean_accuracy,min_accuracy,max_accuracy,n_seeds\n")
        for d in s["shots"]:
            acc = [p.test_accuracy for p in points if p.shots == d]
            fh.write(f"{d},{_fmt(np.mean(acc))},{_fmt(min(acc))},{_fmt(max(acc))},{len(acc)}\n")
            print(f"D={d}: mean accuracy {np.mean(acc):.4f}")


def _write_raster_outputs(run: Run, grid: HistogramGrid) -> None:
    with run.open("histograms.csv") as fh:
        write_histogram_grid(grid, fh, run.header)
    img = grid.mean_image()
    with run.open("intensity.pgm") as fh:
        write_intensity_pgm(img, fh, run.header)
    with run.open("intensity.csv") as fh:
        write_intensity_csv(img, fh, run.header)


def cmd_simulate(run: Run, s: Dict[str, Any]) -> None:
    _require(s, "scene")
    _positive(s, "shots")
    scene = load_scene(s["scene"])
    grid = simulate_raster(scene, s["shots"], s["seed"])
    _write_raster_outputs(run, grid)
    print(f"simulated {scene.width}x{scene.height} pixels, {s['shots']} shots each")


def cmd_classify(run: Run, s: Dict[str, Any]) -> None:
    _require(s, "model")
    if s["histograms"] is None:
        _require(s, "scene")
    _positive(s, "shots")
    if s["fit"] < 0:
        raise UsageError("--fit must be >= 0")
    model = load_model(s["model"])
    scene = load_scene(s["scene"]) if s["scene"] else None
    if s["histograms"] is not None:
        grid = read_histogram_grid(s["histograms"])
        extent = scene.extent if scene is not None else Scene.__dataclass_fields__["extent"].default
    else:
        grid = simulate_raster(scene, s["shots"], s["seed"])
        extent = scene.extent
    _write_raster_outputs(run, grid)
    cmap = classify_image(model, grid, extent, s["background_threshold"])
    with run.open("classmap.pgm") as fh:
        cmap.write_pgm(fh, run.header)
    with run.open("classmap.csv") as fh:
        cmap.write_csv(fh, run.header)
    with run.open("classmap_legend.csv") as fh:
        ClassMap.write_legend(fh, run.header)
    counts = {name: int(np.count_nonzero(cmap.labels == i)) for i, name in enumerate(LABELS)}
    print("pixels per class: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    if s["fit"]:
        fit = fit_classified(cmap, s["fit"], ring=RingRule(background_threshold=s["background_threshold"]))
        with run.open("disks.csv") as fh:
            for line in run.header:
                fh.write(f"# {line}\n")
            fh.write(f"# agreement={fit.agreement}/{fit.n_pixels}\n")
            fh.write("x,y,radius,kind\n")
            for d in fit.disks:
                fh.write(f"{_fmt(d.x)},{_fmt(d.y)},{_fmt(d.radius)},{d.kind}\n")


def cmd_sweep(run: Run, s: Dict[str, Any]) -> None:
    _positive(s, "repeats", "shots", "width")
    if not s["separations"] or min(s["separations"]) <= 0:
        raise UsageError("--separations must list positive numbers")
    if s["extent"] <= 0 or s["plateau_value"] <= 0:
        raise UsageError("--extent and --plateau-value must be positive")
    if s["model"]:
        model = load_model(s["model"])
    else:
        print("no --model given; training the pixel classifier first")
        model = train_imaging_classifier(seed=s["seed"])
    cfg = SweepConfig(separations=tuple(s["separations"]), repeats=s["repeats"], shots=s["shots"],
                      seed=s["seed"], width=s["width"], extent=s["extent"],
                      plateau_value=s["plateau_value"], min_r2_gain=s["min_r2_gain"])
    rows = separation_sweep(model, cfg)
    with run.open("sweep.csv") as fh:
        write_sweep_csv(rows, fh, run.header)
    with run.open("sweep_repeats.csv") as fh:
        for line in run.header:
            fh.write(f"# {line}\n")
        fh.write("s_true,repeat,s_direct,n_components,s_classified\n")
        for r in rows:
            for i, (d, n, c) in enumerate(zip(r.direct_repeats, r.direct_components, r.classified_repeats)):
                fh.write(f"{_fmt(r.true_separation)},{i},{_fmt(d)},{n},{_fmt(c)}\n")
    for r in rows:
        flag = " plateau" if r.plateau else ""
        print(f"s={r.true_separation:.2f}: direct {r.direct_estimate:.3f}{flag}, "
              f"classified {r.classified_estimate:.3f}")


def cmd_fit_dist(run: Run, s: Dict[str, Any]) -> None:
    _require(s, "input")
    if not s["grid_step"] > 0:
        raise UsageError("--grid-step must be positive")
    if s["n_fit"] < 0:
        raise UsageError("--n-fit must be >= 0")
    p = read_distribution(s["input"])
    result = fit_distribution(p, s["grid_step"], s["n_fit"])
    with run.open("fit.csv") as fh:
        write_fit_result(result, fh, run.header, measured=p)
    modes = "; ".join(f"n_c={c:g} n_1t={a:g} n_2t={b:g}" for c, a, b in result.best.modes)
    print(f"best allocation: {modes} (objective {result.objective:.3g})")


def cmd_features(run: Run, s: Dict[str, Any]) -> None:
    _positive(s, "shots", "points")
    defs = load_class_defs(s["classes"])
    rows = projection_clouds(defs, s["shots"], s["points"], s["seed"])
    with run.open("features.csv") as fh:
        for line in run.header:
            fh.write(f"# {line}\n")
        fh.write("class,D,p0,p1,p2\n")
        for r in rows:
            d = "exact" if r.shots is None else str(r.shots)
            fh.write(f"{LABELS[r.label]},{d}," + ",".join(_fmt(v) for v in r.p) + "\n")
    print(f"wrote {len(rows)} rows")


HANDLERS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "eval-curve": cmd_eval_curve,
    "simulate": cmd_simulate,
    "classify": cmd_classify,
    "sweep": cmd_sweep,
    "fit-dist": cmd_fit_dist,
    "features": cmd_features,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        settings = resolve_settings(args.command, args)
        if settings["seed"] < 0:
            raise UsageError("--seed must be >= 0")
        HANDLERS[args.command](Run(args.command, argv, settings), settings)
    except UsageError as exc:
        print(f"{PROG} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QSIError as exc:
        print(f"{PROG} {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"{PROG} {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
