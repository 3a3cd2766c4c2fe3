"""ROC curves with grouped ties, AUC, and the raw-vs-wavelet comparison."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import model as M
from .dataset import CLASS_NAMES, label_matrix
from .errors import DegenerateLabelsError, EmptySplitError, LengthMismatchError, SplitMismatchError
from .imaging import PipelineConfig, load_images, prepare_batch

UNDEFINED = "undefined"


@dataclass(frozen=True)
class RocCurve:
    """Operating points ordered by strictly decreasing threshold.

    The first point has threshold ``inf`` and sits at (0, 0); the last at (1, 1).
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    n_pos: int
    n_neg: int

    @property
    def points(self):
        return list(zip(self.thresholds.tolist(), self.fpr.tolist(), self.tpr.tolist()))


def _check_scores(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise LengthMismatchError(f"{s.size} scores vs {y.size} labels")
    if s.size < 2:
        raise DegenerateLabelsError("need at least two samples")
    y = y.astype(bool)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise DegenerateLabelsError("labels contain a single class")
    return s, y, n_pos, int(y.size - n_pos)


def roc_curve(scores, labels) -> RocCurve:
    """ROC with one operating point per distinct score; AUC by the trapezoid rule.

    Tied scores move the curve together, giving the diagonal segment that
    corresponds to half credit for tied positive/negative pairs.
    """
    s, y, n_pos, n_neg = _check_scores(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.diff(s) != 0)
    ends = np.append(ends, s.size - 1)
    tp = np.concatenate([[0], np.cumsum(y)[ends]])
    fp = np.concatenate([[0], np.cumsum(~y)[ends]])
    # integer trapezoid sum, divided once at the end
    area2 = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    auc = area2 / (2 * n_pos * n_neg)
    thresholds = np.concatenate([[np.inf], s[ends]])
    return RocCurve(thresholds, fp / n_neg, tp / n_pos, auc, n_pos, n_neg)


def trapezoid_area(fpr, tpr) -> float:
    fpr = np.asarray(fpr, dtype=np.float64)
    tpr = np.asarray(tpr, dtype=np.float64)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def auc_pairwise_oracle(scores, labels) -> float:
    """P(random positive outscores random negative), ties worth 1/2; O(P*N)."""
    s, y, n_pos, n_neg = _check_scores(scores, labels)
    pos = s[y][:, None]
    neg = s[~y][None, :]
    wins2 = 2 * int(np.count_nonzero(pos > neg)) + int(np.count_nonzero(pos == neg))
    return wins2 / (2 * n_pos * n_neg)


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class Evaluation:
    """Per-class curves on one test split; ``None`` marks a class without both label values."""

    test_ids: tuple
    curves: dict
    n_pos: dict
    n_neg: dict

    def auc(self, cls):
        c = self.curves.get(cls)
        return None if c is None else c.auc


def evaluate_scores(scores, labels, test_ids=()) -> Evaluation:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    curves, n_pos, n_neg = {}, {}, {}
    for k, name in enumerate(CLASS_NAMES):
        y = labels[:, k].astype(bool)
        n_pos[name] = int(y.sum())
        n_neg[name] = int(y.size - y.sum())
        if n_pos[name] == 0 or n_neg[name] == 0 or y.size < 2:
            curves[name] = None
        else:
            curves[name] = roc_curve(scores[:, k], y)
    return Evaluation(tuple(test_ids), curves, n_pos, n_neg)


def predict(model, entries, config: PipelineConfig, images=None, batch_size=256) -> np.ndarray:
    images = images or {}
    imgs = [images[e.path] if e.path in images else None for e in entries]
    todo = [i for i, im in enumerate(imgs) if im is None]
    for i, im in zip(todo, load_images([entries[i].path for i in todo], config.workers)):
        imgs[i] = im
    out = []
    for start in range(0, len(imgs), batch_size):
        out.append(M.forward(model, prepare_batch(config, imgs[start : start + batch_size])))
    return np.concatenate(out)


def evaluate(model, entries, config: PipelineConfig, images=None) -> Evaluation:
    """Score un-augmented test inputs and build one ROC curve per defined class."""
    entries = list(entries)
    if not entries:
        raise EmptySplitError("test split is empty")
    scores = predict(model, entries, config, images)
    return evaluate_scores(scores, label_matrix(entries), [e.image_id for e in entries])


@dataclass(frozen=True)
class ClassComparison:
    name: str
    auc_raw: float | None
    auc_wavelet: float | None
    n_pos: int
    n_neg: int

    @property
    def delta(self):
        if self.auc_raw is None or self.auc_wavelet is None:
            return None
        return self.auc_wavelet - self.auc_raw


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple
    raw: Evaluation
    wavelet: Evaluation

    def row(self, name) -> ClassComparison:
        return next(r for r in self.rows if r.name == name)


def compare(run_raw: Evaluation, run_wavelet: Evaluation) -> ComparisonReport:
    """Per-class AUC deltas (wavelet minus raw) on an identical test set."""
    if tuple(run_raw.test_ids) != tuple(run_wavelet.test_ids):
        raise SplitMismatchError("the two runs were evaluated on different test entries")
    rows = tuple(
        ClassComparison(name, run_raw.auc(name), run_wavelet.auc(name), run_raw.n_pos[name], run_raw.n_neg[name])
        for name in CLASS_NAMES
    )
    return ComparisonReport(rows, run_raw, run_wavelet)


# ---------------------------------------------------------------------------
# serialization

ROC_FILE = "roc.csv"
AUC_FILE = "auc.csv"
IDS_FILE = "test_ids.txt"
REPORT_FILE = "report.csv"


def _fmt(x):
    if x is None:
        return UNDEFINED
    return repr(float(x))


def _parse(text):
    return None if text == UNDEFINED else float(text)


def write_evaluation(ev: Evaluation, out_dir) -> list:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / ROC_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "threshold", "fpr", "tpr"])
        for name in CLASS_NAMES:
            curve = ev.curves[name]
            if curve is None:
                continue
            for t, f, p in curve.points:
                w.writerow([name, _fmt(t), _fmt(f), _fmt(p)])
    with open(out_dir / AUC_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "auc", "n_pos", "n_neg"])
        for name in CLASS_NAMES:
            w.writerow([name, _fmt(ev.auc(name)), ev.n_pos[name], ev.n_neg[name]])
    (out_dir / IDS_FILE).write_text("".join(f"{i}\n" for i in ev.test_ids), encoding="utf-8")
    return [out_dir / ROC_FILE, out_dir / AUC_FILE, out_dir / IDS_FILE]


def read_evaluation(eval_dir) -> Evaluation:
    eval_dir = Path(eval_dir)
    points = {}
    with open(eval_dir / ROC_FILE, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            points.setdefault(r["class"], []).append((float(r["threshold"]), float(r["fpr"]), float(r["tpr"])))
    curves, n_pos, n_neg = {}, {}, {}
    with open(eval_dir / AUC_FILE, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            name = r["class"]
            n_pos[name], n_neg[name] = int(r["n_pos"]), int(r["n_neg"])
            auc = _parse(r["auc"])
            if auc is None:
                curves[name] = None
            else:
                t, f, p = (np.array(col) for col in zip(*points[name]))
                curves[name] = RocCurve(t, f, p, auc, n_pos[name], n_neg[name])
    ids = tuple((eval_dir / IDS_FILE).read_text(encoding="utf-8").splitlines())
    return Evaluation(ids, curves, n_pos, n_neg)


def write_report(report: ComparisonReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class", "auc_raw", "auc_wavelet", "delta", "n_pos", "n_neg"])
        for r in report.rows:
            w.writerow([r.name, _fmt(r.auc_raw), _fmt(r.auc_wavelet), _fmt(r.delta), r.n_pos, r.n_neg])


def read_report(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return {
            r["class"]: (_parse(r["auc_raw"]), _parse(r["auc_wavelet"]), _parse(r["delta"]))
            for r in csv.DictReader(fh)
        }
