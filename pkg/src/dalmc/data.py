"""Dataset manifests, on-disk matrix formats, normalization and synthetic data.

Manifest (JSON)::

    {
      "name": "toy",
      "format": "csv",                 # or "raw-f64"
      "views": [{"path": "view0.csv", "rows": 20, "cols": 300}, ...],
      "labels": "labels.txt"           # optional
    }

Relative paths resolve against the manifest's directory. A view file holds a
``rows x cols`` matrix whose columns are samples. Labels are integers, one per
line.

raw-f64 layout: the 4 bytes ``MVMX``, rows and cols as little-endian uint32,
then ``rows * cols`` little-endian float64 values in row-major order.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DatasetIOError, FormatError, InvalidConfig, ParseError
from .solver import MultiViewDataset

RAW_MAGIC = b"MVMX"
_RAW_HEADER = struct.Struct("<4sII")
FORMATS = ("csv", "raw-f64")
NORMALIZE_MODES = ("none", "unit-columns", "zscore-rows")


@dataclass
class ViewEntry:
    path: str
    rows: int
    cols: int


@dataclass
class DatasetManifest:
    name: str
    views: List[ViewEntry]
    format: str = "csv"
    labels_file: Optional[str] = None
    root: Path = field(default_factory=Path)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.root / p

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "format": self.format,
            "views": [{"path": e.path, "rows": e.rows, "cols": e.cols} for e in self.views],
        }
        if self.labels_file is not None:
            out["labels"] = self.labels_file
        return out


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise DatasetIOError(f"manifest not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest {path} is not valid JSON: {exc}") from exc
    try:
        views = [ViewEntry(str(v["path"]), int(v["rows"]), int(v["cols"])) for v in raw["views"]]
        manifest = DatasetManifest(
            name=str(raw.get("name", path.stem)),
            views=views,
            format=str(raw.get("format", "csv")),
            labels_file=raw.get("labels"),
            root=path.parent,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"manifest {path} is missing or has malformed fields: {exc}") from exc
    if manifest.format not in FORMATS:
        raise FormatError(f"unknown format {manifest.format!r}; expected one of {FORMATS}")
    return manifest


def write_manifest(manifest: DatasetManifest, path) -> None:
    Path(path).write_text(json.dumps(manifest.to_json(), indent=2) + "\n")


# -- matrix files -------------------------------------------------------------

def write_raw(path, m) -> None:
    m = np.asarray(m, dtype="<f8")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(_RAW_HEADER.pack(RAW_MAGIC, rows, cols))
        fh.write(np.ascontiguousarray(m).tobytes(order="C"))


def read_raw(path) -> np.ndarray:
    try:
        blob = Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise DatasetIOError(f"matrix file not found: {path}") from exc
    if len(blob) < _RAW_HEADER.size:
        raise FormatError(f"{path}: truncated raw-f64 header")
    magic, rows, cols = _RAW_HEADER.unpack_from(blob)
    if magic != RAW_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    payload = blob[_RAW_HEADER.size:]
    if len(payload) != 8 * rows * cols:
        raise FormatError(
            f"{path}: header declares {rows}x{cols} but payload holds {len(payload) // 8} values")
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)


def write_csv(path, m) -> None:
    m = np.asarray(m, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in m:
            # 17 significant digits round-trip every float64 exactly
            w.writerow([format(float(val), ".17g") for val in row])


def read_csv(path) -> np.ndarray:
    try:
        fh = open(path, newline="")
    except FileNotFoundError as exc:
        raise DatasetIOError(f"matrix file not found: {path}") from exc
    rows = []
    with fh:
        for i, record in enumerate(csv.reader(fh)):
            if not record:
                continue
            row = []
            for j, cell in enumerate(record):
                try:
                    row.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: non-numeric cell {cell!r} at row {i}, col {j}", row=i, col=j
                    ) from None
            rows.append(row)
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise FormatError(f"{path}: ragged rows with widths {sorted(widths)}")
    if not rows:
        return np.zeros((0, 0))
    return np.array(rows, dtype=np.float64)


def read_matrix(path, fmt: str) -> np.ndarray:
    return read_raw(path) if fmt == "raw-f64" else read_csv(path)


def write_matrix(path, m, fmt: str) -> None:
    if fmt == "raw-f64":
        write_raw(path, m)
    else:
        write_csv(path, m)


def read_labels(path) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except FileNotFoundError as exc:
        raise DatasetIOError(f"labels file not found: {path}") from exc
    labels = []
    for i, tok in enumerate(text.replace(",", " ").split()):
        try:
            labels.append(int(tok))
        except ValueError:
            raise ParseError(f"{path}: label {tok!r} at position {i} is not an integer",
                             row=i, col=0) from None
    return np.array(labels, dtype=np.int64)


def write_labels(path, labels) -> None:
    Path(path).write_text("".join(f"{int(c)}\n" for c in labels))


# -- datasets -----------------------------------------------------------------

def load_dataset(manifest: DatasetManifest) -> MultiViewDataset:
    ns = {e.cols for e in manifest.views}
    if len(ns) != 1:
        raise FormatError(f"manifest views declare different sample counts: {sorted(ns)}")
    views = []
    for p, entry in enumerate(manifest.views):
        m = read_matrix(manifest.resolve(entry.path), manifest.format)
        if m.shape != (entry.rows, entry.cols):
            raise FormatError(
                f"view {p} ({entry.path}) has shape {m.shape}, manifest declares "
                f"{(entry.rows, entry.cols)}")
        views.append(m)
    labels = None
    if manifest.labels_file is not None:
        labels = read_labels(manifest.resolve(manifest.labels_file))
        if labels.shape[0] != views[0].shape[1]:
            raise FormatError(
                f"labels file has {labels.shape[0]} entries, views have {views[0].shape[1]} samples")
    return MultiViewDataset(views=views, labels=labels, name=manifest.name)


def save_dataset(x: MultiViewDataset, directory, fmt: str = "raw-f64",
                 name: Optional[str] = None) -> Path:
    """Write every view plus labels into ``directory`` and return the manifest path."""
    if fmt not in FORMATS:
        raise FormatError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ext = "bin" if fmt == "raw-f64" else "csv"
    entries = []
    for p, xp in enumerate(x.views):
        fname = f"view{p}.{ext}"
        write_matrix(directory / fname, xp, fmt)
        entries.append(ViewEntry(fname, xp.shape[0], xp.shape[1]))
    labels_file = None
    if x.labels is not None:
        labels_file = "labels.txt"
        write_labels(directory / labels_file, x.labels)
    manifest = DatasetManifest(name=name or x.name or "dataset", views=entries,
                               format=fmt, labels_file=labels_file, root=directory)
    path = directory / "manifest.json"
    write_manifest(manifest, path)
    return path


def normalize_with_stats(x: MultiViewDataset, mode: str) -> Tuple[MultiViewDataset, int]:
    """Normalize every view; also return how many zero columns / constant rows were seen."""
    if mode not in NORMALIZE_MODES:
        raise InvalidConfig(f"unknown normalize mode {mode!r}; expected one of {NORMALIZE_MODES}")
    if mode == "none":
        return x, 0
    degenerate = 0
    out = []
    for xp in x.views:
        if mode == "unit-columns":
            norms = np.linalg.norm(xp, axis=0)
            zero = norms == 0
            degenerate += int(zero.sum())
            out.append(xp / np.where(zero, 1.0, norms))
        else:
            centered = xp - xp.mean(axis=1, keepdims=True)
            std = centered.std(axis=1, keepdims=True)
            flat = std == 0
            degenerate += int(flat.sum())
            out.append(centered / np.where(flat, 1.0, std))
    return MultiViewDataset(views=out, labels=x.labels, name=x.name), degenerate


def normalize(x: MultiViewDataset, mode: str) -> MultiViewDataset:
    return normalize_with_stats(x, mode)[0]


@dataclass
class SynthSpec:
    n: int = 300
    k: int = 3
    v: int = 3
    dims: Sequence[int] = (20, 30, 40)
    separation: float = 10.0
    noise: float = 0.5
    seed: int = 42

    def validate(self) -> None:
        if self.k < 1 or self.n < 2 * self.k:
            raise InvalidConfig(f"need k >= 1 and n >= 2k, got n={self.n}, k={self.k}")
        if self.v < 1 or len(self.dims) != self.v or min(self.dims) < 1:
            raise InvalidConfig(f"dims {list(self.dims)} must list v={self.v} positive sizes")
        if self.separation < 0 or self.noise < 0:
            raise InvalidConfig("separation and noise must be nonnegative")


def generate_synthetic(spec: SynthSpec) -> MultiViewDataset:
    """Gaussian blobs seen through ``v`` random linear views.

    Cluster centers are the vertices ``separation / sqrt(2) * e_c`` of a
    simplex in k-dim latent space, so any two centers sit ``separation``
    apart. Memberships are balanced (sizes differ by at most one) and
    shuffled. View ``p`` projects the latent points with a Gaussian map whose
    entries have variance ``1/d_p`` and adds iid ``N(0, noise**2)``.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    labels = rng.permutation(np.arange(spec.n) % spec.k)
    centers = (spec.separation / math.sqrt(2.0)) * np.eye(spec.k)
    latent = centers[:, labels]  # k x n
    views = []
    for d in spec.dims:
        proj = rng.standard_normal((d, spec.k)) / math.sqrt(d)
        views.append(proj @ latent + spec.noise * rng.standard_normal((d, spec.n)))
    return MultiViewDataset(views=views, labels=labels, name="synthetic")
