"""Polylines, triangle meshes and their discrete currents.

A shape is reduced to a list of atoms ``(x_j, tau_j)``: for a polyline the
midpoint and chord of each segment, for a mesh the barycenter and the
half cross product of each triangle (a normal whose length is the area).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import (
    DegenerateFace,
    DegenerateSegment,
    DimensionMismatch,
    IndexOutOfRange,
    NonOrthogonalRotation,
    OrientationError,
    TooFewPoints,
    ValidationError,
)

CLOSURE_TOL = 1e-9
DEGENERACY_TOL = 1e-12
FLUX_TOL = 1e-9


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _diag(points):
    if len(points) == 0:
        return 0.0
    return float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))


@dataclass(frozen=True, eq=False)
class Polyline2D:
    """Ordered planar points.

    A repeated first point at the end is folded into ``closed=True``, so
    ``points`` always holds distinct consecutive vertices.
    """

    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValidationError(f"polyline points must have shape (n, 2), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("polyline points must be finite")
        closed = bool(self.closed)
        if len(pts) >= 2 and np.all(np.abs(pts[0] - pts[-1]) <= CLOSURE_TOL):
            pts = pts[:-1]
            closed = True
        if len(pts) < 2:
            raise TooFewPoints(f"polyline needs at least 2 distinct points, got {len(pts)}")
        seg = np.diff(np.vstack([pts, pts[:1]]) if closed else pts, axis=0)
        lengths = np.linalg.norm(seg, axis=1)
        bad = np.flatnonzero(lengths <= DEGENERACY_TOL * _diag(pts))
        if len(bad):
            raise DegenerateSegment(f"zero-length segment after point index {int(bad[0])}")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "closed", closed)

    @property
    def n_segments(self) -> int:
        return len(self.points) if self.closed else len(self.points) - 1

    def reversed(self) -> "Polyline2D":
        return Polyline2D(self.points[::-1].copy(), self.closed)

    def signed_area(self) -> float:
        """Shoelace area; positive for counter-clockwise closed curves."""
        x, y = self.points[:, 0], self.points[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray
    closed: bool = False

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        f = np.asarray(self.faces)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValidationError(f"vertices must have shape (n, 3), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("vertices must be finite")
        if f.size == 0:
            raise ValidationError("mesh has no faces")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValidationError(f"faces must have shape (n, 3), got {f.shape}")
        if not np.issubdtype(f.dtype, np.integer):
            if not np.all(np.equal(np.mod(f, 1), 0)):
                raise ValidationError("face indices must be integers")
        f = f.astype(np.int64)
        if f.min() < 0 or f.max() >= len(v):
            i = int(np.flatnonzero((f < 0).any(axis=1) | (f >= len(v)).any(axis=1))[0])
            raise IndexOutOfRange(f"face {i} references a vertex outside 0..{len(v) - 1}")
        doubled = np.linalg.norm(_face_cross(v, f), axis=1)
        bad = np.flatnonzero(doubled <= DEGENERACY_TOL * _diag(v) ** 2)
        if len(bad):
            raise DegenerateFace(f"face {int(bad[0])} has zero area")
        object.__setattr__(self, "vertices", _frozen(v))
        object.__setattr__(self, "faces", _frozen(f, np.int64))
        object.__setattr__(self, "closed", bool(self.closed))
        if self.closed:
            problem = orientation_problem(f)
            if problem:
                raise OrientationError(problem)

    def flipped(self) -> "TriMesh":
        return TriMesh(self.vertices, self.faces[:, [0, 2, 1]], self.closed)

    def area(self) -> float:
        return 0.5 * float(np.sum(np.linalg.norm(_face_cross(self.vertices, self.faces), axis=1)))

    def is_closed_oriented(self) -> bool:
        return orientation_problem(self.faces) is None


def _face_cross(v, f):
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    return np.cross(b - a, c - a)


def orientation_problem(faces) -> str | None:
    """Describe why ``faces`` is not a closed, consistently oriented surface.

    Every undirected edge must be used exactly twice, once per direction.
    Returns None when the check passes.
    """
    faces = np.asarray(faces)
    directed = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    seen: dict[tuple[int, int], int] = {}
    for a, b in directed.tolist():
        seen[(a, b)] = seen.get((a, b), 0) + 1
    for (a, b), n in seen.items():
        if n > 1:
            return f"directed edge ({a}, {b}) used {n} times (inconsistent orientation or non-manifold)"
        if (b, a) not in seen:
            return f"edge ({a}, {b}) is a boundary edge"
    return None


@dataclass(frozen=True, eq=False)
class ShapeAtoms:
    """Discrete current of one shape: centers and weighted direction vectors."""

    centers: np.ndarray
    taus: np.ndarray
    label: str | None = None
    meta: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        t = np.asarray(self.taus, dtype=float)
        if c.ndim != 2 or c.shape[1] not in (2, 3):
            raise ValidationError(f"centers must have shape (n, 2|3), got {c.shape}")
        if c.shape != t.shape:
            raise ValidationError(f"centers {c.shape} and taus {t.shape} differ in shape")
        if len(c) == 0:
            raise ValidationError("a shape needs at least one atom")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(t))):
            raise ValidationError("atoms must be finite")
        object.__setattr__(self, "centers", _frozen(c))
        object.__setattr__(self, "taus", _frozen(t))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def __len__(self):
        return len(self.centers)

    def flux(self) -> np.ndarray:
        return self.taus.sum(axis=0)

    def has_zero_flux(self, tol=FLUX_TOL) -> bool:
        return float(np.linalg.norm(self.flux())) <= tol * float(np.linalg.norm(self.taus, axis=1).sum())

    def __neg__(self) -> "ShapeAtoms":
        return ShapeAtoms(self.centers, -self.taus, self.label, self.meta)

    def with_info(self, label=None, meta=None) -> "ShapeAtoms":
        return ShapeAtoms(
            self.centers,
            self.taus,
            self.label if label is None else label,
            self.meta if meta is None else meta,
        )


def curve_to_atoms(poly: Polyline2D, label=None, meta=None) -> ShapeAtoms:
    pts = poly.points
    ends = np.vstack([pts[1:], pts[:1]]) if poly.closed else pts[1:]
    starts = pts[: len(ends)]
    return ShapeAtoms(0.5 * (starts + ends), ends - starts, label, meta or {})


def mesh_to_atoms(mesh: TriMesh, label=None, meta=None) -> ShapeAtoms:
    v, f = mesh.vertices, mesh.faces
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    centers = (a + b + c) / 3.0
    taus = 0.5 * np.cross(b - a, c - a)
    return ShapeAtoms(centers, taus, label, meta or {})


def to_atoms(geom, label=None, meta=None) -> ShapeAtoms:
    if isinstance(geom, Polyline2D):
        return curve_to_atoms(geom, label, meta)
    if isinstance(geom, TriMesh):
        return mesh_to_atoms(geom, label, meta)
    raise TypeError(f"cannot convert {type(geom).__name__} to atoms")


def _check_motion(rotation, translation, scale, dim):
    R = np.asarray(rotation, dtype=float)
    if R.shape != (dim, dim):
        raise DimensionMismatch(f"rotation must be {dim}x{dim}, got {R.shape}")
    if np.max(np.abs(R.T @ R - np.eye(dim))) > 1e-9:
        raise NonOrthogonalRotation("rotation matrix is not orthogonal within 1e-9")
    t = np.zeros(dim) if translation is None else np.asarray(translation, dtype=float)
    if t.shape != (dim,):
        raise DimensionMismatch(f"translation must have length {dim}")
    if not (scale > 0 and np.isfinite(scale)):
        raise ValidationError(f"scale must be positive, got {scale}")
    return R, t, float(scale)


def transform_shape(atoms: ShapeAtoms, rotation=None, translation=None, scale=1.0) -> ShapeAtoms:
    """Apply ``x -> scale * R x + t`` to the underlying geometry.

    Chords scale linearly and face normals with area. Face normals of a
    reflected mesh pick up det(R), matching a re-run of ``mesh_to_atoms``.
    """
    d = atoms.dim
    R, t, s = _check_motion(np.eye(d) if rotation is None else rotation, translation, scale, d)
    taus = s ** (d - 1) * (atoms.taus @ R.T)
    if d == 3:
        taus = taus * np.sign(np.linalg.det(R))
    return ShapeAtoms(s * (atoms.centers @ R.T) + t, taus, atoms.label, atoms.meta)


def transform_geometry(geom, rotation=None, translation=None, scale=1.0):
    if isinstance(geom, Polyline2D):
        R, t, s = _check_motion(np.eye(2) if rotation is None else rotation, translation, scale, 2)
        return Polyline2D(s * (geom.points @ R.T) + t, geom.closed)
    if isinstance(geom, TriMesh):
        R, t, s = _check_motion(np.eye(3) if rotation is None else rotation, translation, scale, 3)
        return TriMesh(s * (geom.vertices @ R.T) + t, geom.faces, geom.closed)
    raise TypeError(f"unsupported geometry {type(geom).__name__}")


def geometry_points(geom) -> np.ndarray:
    return geom.points if isinstance(geom, Polyline2D) else geom.vertices


def extent(geom, axis: int) -> float:
    p = geometry_points(geom)[:, axis]
    return float(p.max() - p.min())
