"""ChestX-ray14-style manifests: 14-class multi-label encoding and seeded splits."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadRatiosError,
    MalformedRowError,
    MissingColumnError,
    TooFewEntriesError,
    UnknownLabelError,
)

CLASS_NAMES = (
    "Infiltration",
    "Effusion",
    "Atelectasis",
    "Nodule",
    "Mass",
    "Consolidation",
    "Pneumothorax",
    "Pleural Thickening",
    "Cardiomegaly",
    "Emphysema",
    "Edema",
    "Fibrosis",
    "Pneumonia",
    "Hernia",
)
N_CLASSES = len(CLASS_NAMES)
NO_FINDING = "No Finding"

# Published per-class image counts for the full ChestX-ray14 release.
PUBLISHED_COUNTS = {
    "Infiltration": 25366,
    "Effusion": 18974,
    "Atelectasis": 16057,
    "Nodule": 8409,
    "Mass": 8269,
    "Consolidation": 7177,
    "Pneumothorax": 7134,
    "Pleural Thickening": 5172,
    "Cardiomegaly": 3906,
    "Emphysema": 3586,
    "Edema": 3443,
    "Fibrosis": 2211,
    "Pneumonia": 2092,
    "Hernia": 284,
}
TOTAL_IMAGES = 112_120

# The public labels file spells this class without a space.
_ALIASES = {"Pleural_Thickening": "Pleural Thickening"}
_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}

IMAGE_COLUMN = "Image Index"
LABEL_COLUMN = "Finding Labels"
PATIENT_COLUMN = "Patient ID"
PATH_COLUMN = "Path"
SPLIT_COLUMN = "split"
SPLIT_NAMES = ("train", "validation", "test")
DEFAULT_RATIOS = (0.70, 0.15, 0.15)


def encode_labels(label_string: str) -> np.ndarray:
    """Map a ``'|'``-separated label string onto a 14-element 0/1 vector."""
    bits = np.zeros(N_CLASSES, dtype=np.uint8)
    for token in label_string.split("|"):
        token = token.strip()
        if token == NO_FINDING:
            continue
        token = _ALIASES.get(token, token)
        if token not in _INDEX:
            raise UnknownLabelError(token)
        bits[_INDEX[token]] = 1
    return bits


def decode_labels(bits) -> str:
    names = [CLASS_NAMES[i] for i, b in enumerate(bits) if b]
    return "|".join(names) if names else NO_FINDING


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    path: str
    labels: tuple
    patient_id: str | None = None

    @property
    def label_array(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=np.uint8)


def parse_manifest(csv_path, image_root=None) -> list:
    """Read a labels CSV into :class:`ManifestEntry` records, preserving row order.

    Image paths come from an optional ``Path`` column (relative to the CSV's
    directory) or else ``image_root / Image Index``; ``image_root`` defaults to
    the CSV's directory.
    """
    csv_path = Path(csv_path)
    base = csv_path.resolve().parent
    root = Path(image_root).resolve() if image_root else base
    entries = []
    with open(csv_path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (IMAGE_COLUMN, LABEL_COLUMN):
            if col not in header:
                raise MissingColumnError(col)
        for row in reader:
            line_no = reader.line_num
            if None in row or any(v is None for v in row.values()):
                raise MalformedRowError(line_no)
            image_id = row[IMAGE_COLUMN].strip()
            if not image_id:
                raise MalformedRowError(line_no, "empty image index")
            try:
                bits = encode_labels(row[LABEL_COLUMN])
            except UnknownLabelError as exc:
                raise UnknownLabelError(exc.token, line_no) from None
            rel = (row.get(PATH_COLUMN) or "").strip()
            path = os.path.normpath(base / rel) if rel else os.path.normpath(root / image_id)
            patient = (row.get(PATIENT_COLUMN) or "").strip() or None
            entries.append(ManifestEntry(image_id, path, tuple(int(b) for b in bits), patient))
    return entries


def class_histogram(entries) -> np.ndarray:
    counts = np.zeros(N_CLASSES, dtype=np.int64)
    for e in entries:
        counts += np.asarray(e.labels, dtype=np.int64)
    return counts


def label_matrix(entries) -> np.ndarray:
    if not entries:
        return np.zeros((0, N_CLASSES), dtype=np.float64)
    return np.array([e.labels for e in entries], dtype=np.float64)


@dataclass(frozen=True)
class SplitManifest:
    train: tuple
    validation: tuple
    test: tuple
    seed: int
    ratios: tuple
    grouped: bool = False

    def parts(self):
        return dict(zip(SPLIT_NAMES, (self.train, self.validation, self.test)))


def _check_ratios(ratios):
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(not 0.0 < r < 1.0 for r in ratios):
        raise BadRatiosError(f"ratios must be three values in (0, 1), got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatiosError(f"ratios must sum to 1, got {ratios} (sum {sum(ratios):g})")
    return ratios


def split(entries, ratios=DEFAULT_RATIOS, seed: int = 0, group_by_patient: bool = False) -> SplitManifest:
    """Seeded random train/validation/test partition.

    Entries are permuted, then cut at ``floor(N*r1)`` and ``floor(N*(r1+r2))``.
    With ``group_by_patient`` the permutation acts on patients, and each
    patient's images go wholly to the first split whose quota is still open.
    """
    ratios = _check_ratios(ratios)
    entries = list(entries)
    n = len(entries)
    if n < 3:
        raise TooFewEntriesError(f"need at least 3 entries to split, got {n}")
    # the epsilon keeps products like 20 * 0.85 from flooring one short
    cut1 = math.floor(n * ratios[0] + 1e-9)
    cut2 = math.floor(n * (ratios[0] + ratios[1]) + 1e-9)
    rng = np.random.default_rng(seed)

    if not group_by_patient:
        order = [entries[i] for i in rng.permutation(n)]
        parts = (order[:cut1], order[cut1:cut2], order[cut2:])
    else:
        groups = {}
        for e in entries:
            key = e.patient_id if e.patient_id is not None else f"\0{e.image_id}"
            groups.setdefault(key, []).append(e)
        keys = list(groups)
        parts = ([], [], [])
        taken = 0
        for gi in rng.permutation(len(keys)):
            group = groups[keys[gi]]
            target = 0 if taken < cut1 else (1 if taken < cut2 else 2)
            parts[target].extend(group)
            taken += len(group)

    return SplitManifest(
        train=tuple(parts[0]),
        validation=tuple(parts[1]),
        test=tuple(parts[2]),
        seed=int(seed),
        ratios=ratios,
        grouped=group_by_patient,
    )


def write_entries(path, entries, split_name: str | None = None) -> None:
    """Write entries as a manifest CSV; ``Path`` is stored relative to the file."""
    path = Path(path)
    base = path.resolve().parent
    header = [IMAGE_COLUMN, LABEL_COLUMN, PATIENT_COLUMN, PATH_COLUMN]
    if split_name is not None:
        header.append(SPLIT_COLUMN)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for e in entries:
            rel = os.path.relpath(e.path, base).replace(os.sep, "/")
            row = [e.image_id, decode_labels(e.labels), e.patient_id or "", rel]
            if split_name is not None:
                row.append(split_name)
            writer.writerow(row)


def write_split(split_manifest: SplitManifest, out_dir) -> dict:
    """Write ``train.csv``, ``validation.csv``, ``test.csv`` and ``split_meta.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, part in split_manifest.parts().items():
        p = out_dir / f"{name}.csv"
        write_entries(p, part, name)
        written[name] = p
    meta = {
        "seed": split_manifest.seed,
        "ratios": list(split_manifest.ratios),
        "grouped": split_manifest.grouped,
        "counts": {k: len(v) for k, v in split_manifest.parts().items()},
    }
    meta_path = out_dir / "split_meta.json"
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written["meta"] = meta_path
    return written


def read_split(split_dir) -> SplitManifest:
    split_dir = Path(split_dir)
    meta_path = split_dir / "split_meta.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    parts = [tuple(parse_manifest(split_dir / f"{name}.csv")) for name in SPLIT_NAMES]
    return SplitManifest(
        *parts,
        seed=int(meta.get("seed", 0)),
        ratios=tuple(meta.get("ratios", DEFAULT_RATIOS)),
        grouped=bool(meta.get("grouped", False)),
    )
