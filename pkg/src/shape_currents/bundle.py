"""On-disk dataset bundles and run manifests.

A bundle is a directory holding ``index.json`` (dim, ids, labels, metadata)
and one CSV of atoms per shape under ``atoms/``.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .errors import DimensionMismatch, EmptyInput, ParseError
from .geometry import ShapeAtoms

BUNDLE_FORMAT = "shape-currents-bundle/1"


@dataclass
class Dataset:
    shapes: list[ShapeAtoms]
    ids: list[str]

    @property
    def dim(self) -> int:
        return self.shapes[0].dim

    @property
    def labels(self) -> list[str | None]:
        return [s.label for s in self.shapes]

    def __len__(self):
        return len(self.shapes)


@dataclass
class RunManifest:
    command: str
    inputs: list[dict[str, str]] = field(default_factory=list)
    lam: float | None = None
    lambda_source: str | None = None
    seed: int | None = None
    options: dict[str, Any] = field(default_factory=dict)
    version: str = __version__

    @classmethod
    def for_inputs(cls, command: str, paths: Sequence, **kw) -> "RunManifest":
        return cls(command, [{"path": str(p), "sha256": content_hash(p)} for p in paths], **kw)

    def to_dict(self) -> dict:
        return asdict(self)


def content_hash(path) -> str:
    """sha256 of a file, or of every file under a directory in sorted order."""
    path = Path(path)
    h = hashlib.sha256()
    files = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
    for f in files:
        if path.is_dir():
            h.update(f.relative_to(path).as_posix().encode() + b"\0")
        h.update(f.read_bytes())
    return h.hexdigest()


_SAFE = re.compile(r"[^A-Za-z0-9._-]+")


def safe_id(name: str) -> str:
    return _SAFE.sub("_", name).strip("_") or "shape"


def _columns(dim):
    axes = "xyz"[:dim]
    return list(axes) + [f"t{a}" for a in axes]


def write_atoms_csv(atoms: ShapeAtoms, path) -> None:
    rows = np.hstack([atoms.centers, atoms.taus])
    lines = [",".join(_columns(atoms.dim))]
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_atoms_csv(path, label=None, meta=None) -> ShapeAtoms:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty atoms file", path)
    header = lines[0].split(",")
    if header not in (_columns(2), _columns(3)):
        raise ParseError(f"unexpected header {lines[0]!r}", path, 1)
    dim = len(header) // 2
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    except ValueError:
        raise ParseError("non-numeric atom value", path) from None
    if data.ndim != 2 or data.shape[1] != 2 * dim:
        raise ParseError(f"expected {2 * dim} columns", path)
    return ShapeAtoms(data[:, :dim], data[:, dim:], label, meta or {})


def write_bundle(out_dir, shapes: Sequence[ShapeAtoms], ids: Sequence[str] | None = None,
                 manifest: RunManifest | None = None) -> Path:
    if not shapes:
        raise EmptyInput("no shapes to write")
    dims = {s.dim for s in shapes}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed 2D/3D shapes (dims {sorted(dims)})")
    ids = [safe_id(i) for i in (ids or [f"shape-{j:04d}" for j in range(len(shapes))])]
    if len(set(ids)) != len(ids):
        raise ValueError("shape ids must be unique")
    out = Path(out_dir)
    (out / "atoms").mkdir(parents=True, exist_ok=True)
    entries = []
    for sid, s in zip(ids, shapes):
        rel = f"atoms/{sid}.csv"
        write_atoms_csv(s, out / rel)
        entries.append({"id": sid, "label": s.label, "meta": dict(s.meta), "file": rel,
                        "n_atoms": len(s)})
    index = {"format": BUNDLE_FORMAT, "dim": dims.pop(), "shapes": entries}
    if manifest is not None:
        index["manifest"] = manifest.to_dict()
    (out / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return out


def read_bundle(path) -> Dataset:
    path = Path(path)
    index_path = path / "index.json"
    try:
        index = json.loads(index_path.read_text())
    except FileNotFoundError:
        raise ParseError("not a dataset bundle (missing index.json)", path) from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", index_path, exc.lineno) from None
    if index.get("format") != BUNDLE_FORMAT:
        raise ParseError(f"unsupported bundle format {index.get('format')!r}", index_path)
    shapes, ids = [], []
    for e in index["shapes"]:
        s = read_atoms_csv(path / e["file"], e.get("label"), e.get("meta") or {})
        if s.dim != index["dim"]:
            raise DimensionMismatch(f"{e['id']}: dim {s.dim}, bundle dim {index['dim']}")
        shapes.append(s)
        ids.append(e["id"])
    if not shapes:
        raise EmptyInput(f"bundle {path} holds no shapes")
    return Dataset(shapes, ids)
