"""Readers and writers for csv/json polylines and OFF/OBJ meshes."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .geometry import Polyline2D, TriMesh

FORMATS = ("csv-polyline", "json-polyline", "off", "obj")
_EXT = {".csv": "csv-polyline", ".json": "json-polyline", ".off": "off", ".obj": "obj"}


def detect_format(path) -> str:
    fmt = _EXT.get(Path(path).suffix.lower())
    if fmt is None:
        raise ParseError(f"cannot infer format from extension {Path(path).suffix!r}", path)
    return fmt


def load_shape(path, format: str | None = None) -> Polyline2D | TriMesh:
    """Read and validate one shape file.

    Polygonal OFF/OBJ faces are fan-triangulated from their first vertex.
    Invariant violations surface as ``ValidationError`` subclasses with the
    file path prefixed.
    """
    path = Path(path)
    fmt = format or detect_format(path)
    if fmt not in FORMATS:
        raise ParseError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}", path)
    try:
        text = path.read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(str(exc), path) from exc
    parser = {
        "csv-polyline": parse_csv_polyline,
        "json-polyline": parse_json_polyline,
        "off": parse_off,
        "obj": parse_obj,
    }[fmt]
    try:
        return parser(text, path)
    except ValidationError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def _float(tok, path, line):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", path, line) from None


def _int(tok, path, line):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}", path, line) from None


def parse_csv_polyline(text: str, path=None) -> Polyline2D:
    points = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        row = [c.strip() for c in row]
        if not row or all(c == "" for c in row):
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 columns, got {len(row)}", path, lineno)
        if not points and lineno == 1:
            try:
                float(row[0]), float(row[1])
            except ValueError:
                continue  # header
        points.append((_float(row[0], path, lineno), _float(row[1], path, lineno)))
    if not points:
        raise ParseError("no points found", path)
    return Polyline2D(np.array(points))


def parse_json_polyline(text: str, path=None) -> Polyline2D:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    if not isinstance(doc, dict) or "points" not in doc:
        raise ParseError('expected an object with a "points" array', path)
    try:
        pts = np.array(doc["points"], dtype=float)
    except (TypeError, ValueError):
        raise ParseError('"points" must be a list of [x, y] pairs', path) from None
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ParseError('"points" must be a list of [x, y] pairs', path)
    closed = doc.get("closed", False)
    if not isinstance(closed, bool):
        raise ParseError('"closed" must be a boolean', path)
    return Polyline2D(pts, closed)


def _fan(poly):
    return [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]


def _content_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_off(text: str, path=None) -> TriMesh:
    lines = _content_lines(text)
    try:
        lineno, toks = next(lines)
    except StopIteration:
        raise ParseError("empty file", path) from None
    if toks[0] != "OFF":
        raise ParseError(f"expected header 'OFF', got {toks[0]!r}", path, lineno)
    toks = toks[1:]
    if not toks:
        try:
            lineno, toks = next(lines)
        except StopIteration:
            raise ParseError("missing vertex/face counts", path) from None
    if len(toks) < 2:
        raise ParseError("expected 'nV nF nE' counts", path, lineno)
    nv, nf = _int(toks[0], path, lineno), _int(toks[1], path, lineno)
    verts = []
    for _ in range(nv):
        try:
            lineno, toks = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nv} vertices, found {len(verts)}", path) from None
        if len(toks) < 3:
            raise ParseError("vertex needs 3 coordinates", path, lineno)
        verts.append([_float(t, path, lineno) for t in toks[:3]])
    faces = []
    for i in range(nf):
        try:
            lineno, toks = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nf} faces, found {i}", path) from None
        n = _int(toks[0], path, lineno)
        if n < 3 or len(toks) < n + 1:
            raise ParseError(f"face declares {n} vertices but lists {len(toks) - 1}", path, lineno)
        faces.extend(_fan([_int(t, path, lineno) for t in toks[1 : n + 1]]))
    return TriMesh(np.array(verts), np.array(faces, dtype=np.int64).reshape(-1, 3))


def parse_obj(text: str, path=None) -> TriMesh:
    verts, faces = [], []
    for lineno, toks in _content_lines(text):
        tag = toks[0]
        if tag == "v":
            if len(toks) < 4:
                raise ParseError("vertex needs 3 coordinates", path, lineno)
            verts.append([_float(t, path, lineno) for t in toks[1:4]])
        elif tag == "f":
            if len(toks) < 4:
                raise ParseError("face needs at least 3 vertices", path, lineno)
            idx = []
            for t in toks[1:]:
                j = _int(t.split("/", 1)[0], path, lineno)
                if j == 0:
                    raise ParseError("OBJ indices are 1-based; got 0", path, lineno)
                idx.append(j - 1 if j > 0 else len(verts) + j)
            faces.extend(_fan(idx))
    if not verts:
        raise ParseError("no vertices found", path)
    if not faces:
        raise ParseError("no faces found", path)
    return TriMesh(np.array(verts), np.array(faces, dtype=np.int64))


def _num(x):
    return repr(float(x))


def save_shape(geom, path, format: str | None = None) -> None:
    path = Path(path)
    fmt = format or detect_format(path)
    if fmt == "csv-polyline":
        pts = _closed_points(geom)
        path.write_text("x,y\n" + "".join(f"{_num(x)},{_num(y)}\n" for x, y in pts))
    elif fmt == "json-polyline":
        doc = {"points": geom.points.tolist(), "closed": geom.closed}
        path.write_text(json.dumps(doc) + "\n")
    elif fmt == "off":
        out = [f"OFF\n{len(geom.vertices)} {len(geom.faces)} 0\n"]
        out += [" ".join(map(_num, v)) + "\n" for v in geom.vertices]
        out += [f"3 {a} {b} {c}\n" for a, b, c in geom.faces.tolist()]
        path.write_text("".join(out))
    elif fmt == "obj":
        out = ["v " + " ".join(map(_num, v)) + "\n" for v in geom.vertices]
        out += [f"f {a + 1} {b + 1} {c + 1}\n" for a, b, c in geom.faces.tolist()]
        path.write_text("".join(out))
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _closed_points(poly):
    # closure is written explicitly as a repeated first row
    return np.vstack([poly.points, poly.points[:1]]) if poly.closed else poly.points
