"""Seeded parametric shape families and the two experimental scenarios.

Scenario ``common-height`` rescales every shape so its extent along the
height axis equals a common target. Scenario ``two-heights`` does the same,
then enlarges half of each class (rounded up) by ``scale_factor`` and
multiplies every shape by an independent draw from ``jitter_range``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .errors import BadFamilyParams, SpecError
from .geometry import Polyline2D, ShapeAtoms, TriMesh, extent, geometry_points, to_atoms

CONTOUR_FAMILIES = ("ellipse", "rounded-rect", "star")
MESH_FAMILIES = ("sphere", "ellipsoid", "pear")
SCENARIOS = ("common-height", "two-heights")

# pear profile r(z) = sin(pi z) (1 - PEAR_TAPER z), z in [0, 1]
PEAR_TAPER = 0.35

_CONTOUR_DEFAULTS = {
    "ellipse": {"a": 2.0, "b": 1.0},
    "rounded-rect": {"width": 4.0, "height": 2.6, "radius": 0.4},
    "star": {"radius": 1.0, "lobes": 5, "depth": 0.35},
}
_MESH_DEFAULTS = {
    "sphere": {"radius": 1.0},
    "ellipsoid": {"a": 1.0, "b": 1.0, "c": 1.0},
    "pear": {"height": 2.0, "radius": 1.0},
}


def _params(family, given, defaults, perturbation):
    if family not in defaults:
        raise BadFamilyParams(f"unknown family {family!r}; expected one of {sorted(defaults)}")
    p = dict(defaults[family])
    unknown = set(given or {}) - set(p) - {"perturbation", "subdivisions"}
    if unknown:
        raise BadFamilyParams(f"unknown parameters for {family}: {sorted(unknown)}")
    p.update(given or {})
    p.setdefault("perturbation", perturbation)
    for key, val in p.items():
        if not isinstance(val, (int, float)) or not math.isfinite(val):
            raise BadFamilyParams(f"{family}.{key} must be a finite number")
    if p["perturbation"] < 0 or p["perturbation"] >= 0.5:
        raise BadFamilyParams("perturbation must lie in [0, 0.5)")
    return p


def _radial_noise_2d(theta, amp, rng, harmonics=(2, 3, 4)):
    """Smooth multiplicative factor 1 + f(theta) with max |f| = amp."""
    coef = rng.normal(size=(len(harmonics), 2))
    f = sum(c * np.cos(h * theta) + s * np.sin(h * theta) for h, (c, s) in zip(harmonics, coef))
    peak = float(np.max(np.abs(f)))
    return 1.0 + (amp * f / peak if peak > 0 else 0.0)


def _rounded_rect(width, height, radius, n):
    hw, hh = width / 2.0 - radius, height / 2.0 - radius
    # boundary pieces counter-clockwise from (width/2, 0)
    pieces = [
        ("line", (hw + radius, 0.0), (0.0, 1.0), hh),
        ("arc", (hw, hh), 0.0),
        ("line", (hw, hh + radius), (-1.0, 0.0), 2 * hw),
        ("arc", (-hw, hh), 0.5 * math.pi),
        ("line", (-hw - radius, hh), (0.0, -1.0), 2 * hh),
        ("arc", (-hw, -hh), math.pi),
        ("line", (-hw, -hh - radius), (1.0, 0.0), 2 * hw),
        ("arc", (hw, -hh), 1.5 * math.pi),
        ("line", (hw + radius, -hh), (0.0, 1.0), hh),
    ]
    arc_len = 0.5 * math.pi * radius
    lengths = [p[3] if p[0] == "line" else arc_len for p in pieces]
    total = sum(lengths)
    out = []
    for s in np.arange(n) * total / n:
        for piece, ln in zip(pieces, lengths):
            if s <= ln or piece is pieces[-1]:
                break
            s -= ln
        if piece[0] == "line":
            (x0, y0), (dx, dy) = piece[1], piece[2]
            out.append((x0 + s * dx, y0 + s * dy))
        else:
            (cx, cy), a0 = piece[1], piece[2]
            a = a0 + s / radius if radius > 0 else a0
            out.append((cx + radius * math.cos(a), cy + radius * math.sin(a)))
    return np.array(out)


def gen_contour(family: str, params: dict | None = None, n_points: int = 100,
                seed: int | None = 0) -> Polyline2D:
    """Closed counter-clockwise contour of ``n_points`` points, the first repeated last."""
    if n_points < 8:
        raise BadFamilyParams(f"n_points must be >= 8, got {n_points}")
    p = _params(family, params, _CONTOUR_DEFAULTS, 0.05)
    rng = np.random.default_rng(seed)
    n = n_points - 1
    theta = 2.0 * np.pi * np.arange(n) / n
    if family == "ellipse":
        if p["a"] <= 0 or p["b"] <= 0:
            raise BadFamilyParams("ellipse axes must be positive")
        pts = np.column_stack([p["a"] * np.cos(theta), p["b"] * np.sin(theta)])
    elif family == "rounded-rect":
        w, h, r = p["width"], p["height"], p["radius"]
        if w <= 0 or h <= 0 or r < 0 or 2 * r >= min(w, h):
            raise BadFamilyParams("rounded-rect needs 0 <= 2*radius < min(width, height)")
        pts = _rounded_rect(w, h, r, n)
    else:
        lobes, depth = p["lobes"], p["depth"]
        if p["radius"] <= 0 or lobes < 2 or lobes != int(lobes) or not 0 <= depth < 1:
            raise BadFamilyParams("star needs radius > 0, integer lobes >= 2, 0 <= depth < 1")
        r = p["radius"] * (1.0 + depth * np.cos(lobes * theta)) / (1.0 + depth)
        pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    if p["perturbation"] > 0:
        polar = np.arctan2(pts[:, 1], pts[:, 0])
        pts = pts * _radial_noise_2d(polar, p["perturbation"], rng)[:, None]
    return Polyline2D(np.vstack([pts, pts[:1]]))


# -- meshes ----------------------------------------------------------------------

_ICO_T = (1.0 + math.sqrt(5.0)) / 2.0
_ICO_V = np.array([
    [-1, _ICO_T, 0], [1, _ICO_T, 0], [-1, -_ICO_T, 0], [1, -_ICO_T, 0],
    [0, -1, _ICO_T], [0, 1, _ICO_T], [0, -1, -_ICO_T], [0, 1, -_ICO_T],
    [_ICO_T, 0, -1], [_ICO_T, 0, 1], [-_ICO_T, 0, -1], [-_ICO_T, 0, 1],
])
_ICO_F = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
])


def icosphere(depth: int, radius: float = 1.0) -> TriMesh:
    """Unit icosahedron refined ``depth`` times by edge midpoints, 20*4^depth faces."""
    verts = [v / np.linalg.norm(v) for v in _ICO_V.astype(float)]
    faces = [tuple(f) for f in _ICO_F]
    for _ in range(depth):
        cache: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                v = verts[a] + verts[b]
                verts.append(v / np.linalg.norm(v))
                cache[key] = len(verts) - 1
            return cache[key]

        nxt = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nxt += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = nxt
    return TriMesh(radius * np.array(verts), np.array(faces), closed=True)


def _latlong(n_triangles):
    """Ring/segment counts for a pole-to-pole grid with 2*n_lon*(n_lat-1) faces."""
    bands = max(2, round(math.sqrt(n_triangles / 4.0)))
    n_lon = max(3, round(n_triangles / (2.0 * bands)))
    return bands + 1, n_lon


def _revolution(radius_fn, z_fn, n_triangles):
    """Closed outward surface of revolution about z; t in [0, 1] runs pole to pole."""
    n_lat, n_lon = _latlong(n_triangles)
    t = (1.0 - np.cos(np.pi * np.arange(1, n_lat) / n_lat)) / 2.0
    phi = 2.0 * np.pi * np.arange(n_lon) / n_lon
    r, z = radius_fn(t), z_fn(t)
    ring = np.column_stack([
        np.outer(r, np.cos(phi)).ravel(), np.outer(r, np.sin(phi)).ravel(), np.repeat(z, n_lon),
    ])
    bottom, top = np.array([[0.0, 0.0, z_fn(0.0)]]), np.array([[0.0, 0.0, z_fn(1.0)]])
    verts = np.vstack([bottom, ring, top])
    ib, it = 0, len(verts) - 1

    def vid(i, j):
        return 1 + i * n_lon + (j % n_lon)

    faces = []
    for j in range(n_lon):
        faces.append((ib, vid(0, j + 1), vid(0, j)))
    for i in range(n_lat - 2):
        for j in range(n_lon):
            a, b = vid(i, j), vid(i, j + 1)
            c, d = vid(i + 1, j), vid(i + 1, j + 1)
            faces += [(a, b, d), (a, d, c)]
    for j in range(n_lon):
        faces.append((it, vid(n_lat - 2, j), vid(n_lat - 2, j + 1)))
    return verts, np.array(faces)


def _radial_noise_3d(dirs, amp, rng):
    x, y, z = dirs.T
    basis = np.column_stack([x, y, z, x * y, y * z, x * z, x * x - y * y, 3 * z * z - 1])
    f = basis @ rng.normal(size=basis.shape[1])
    peak = float(np.max(np.abs(f)))
    return 1.0 + (amp * f / peak if peak > 0 else 0.0)


def gen_mesh(family: str, params: dict | None = None, n_triangles: int = 1000,
             seed: int | None = 0) -> TriMesh:
    """Closed outward-oriented mesh with about ``n_triangles`` faces.

    ``params["subdivisions"]`` switches spheres and ellipsoids to an
    icosphere of that depth instead of a latitude/longitude grid.
    """
    if n_triangles < 100:
        raise BadFamilyParams(f"n_triangles must be >= 100, got {n_triangles}")
    p = _params(family, params, _MESH_DEFAULTS, 0.03)
    rng = np.random.default_rng(seed)
    if family == "pear":
        h, rad = p["height"], p["radius"]
        if h <= 0 or rad <= 0:
            raise BadFamilyParams("pear height and radius must be positive")
        verts, faces = _revolution(
            lambda t: rad * np.sin(np.pi * t) * (1.0 - PEAR_TAPER * t),
            lambda t: h * (np.asarray(t) - 0.5),
            n_triangles,
        )
        center = np.zeros(3)
    else:
        axes = [p["radius"]] * 3 if family == "sphere" else [p["a"], p["b"], p["c"]]
        if min(axes) <= 0:
            raise BadFamilyParams(f"{family} semi-axes must be positive")
        if "subdivisions" in p:
            depth = p["subdivisions"]
            if depth != int(depth) or depth < 0:
                raise BadFamilyParams("subdivisions must be a non-negative integer")
            base = icosphere(int(depth))
            verts, faces = base.vertices.copy(), base.faces
        else:
            verts, faces = _revolution(
                lambda t: np.sin(np.pi * np.asarray(t)),
                lambda t: -np.cos(np.pi * np.asarray(t)),
                n_triangles,
            )
        verts = verts * np.array(axes)
        center = np.zeros(3)
    if p["perturbation"] > 0:
        rel = verts - center
        dirs = rel / np.linalg.norm(rel, axis=1, keepdims=True)
        verts = center + rel * _radial_noise_3d(dirs, p["perturbation"], rng)[:, None]
    return TriMesh(verts, faces, closed=True)


# -- scenarios -------------------------------------------------------------------


@dataclass
class ClassSpec:
    family: str
    count: int
    params: dict[str, Any] = field(default_factory=dict)
    name: str | None = None

    @property
    def label(self) -> str:
        return self.name or self.family


@dataclass
class ScenarioSpec:
    classes: list[ClassSpec]
    scenario: str = "common-height"
    scale_factor: float = 1.5
    jitter_range: tuple[float, float] = (1.0, 1.1)
    resolution: int | None = None
    seed: int = 0
    target_extent: float = 2.0
    height_axis: int | None = None

    def __post_init__(self):
        self.classes = [c if isinstance(c, ClassSpec) else ClassSpec(**c) for c in self.classes]
        self.jitter_range = tuple(float(x) for x in self.jitter_range)
        if not self.classes:
            raise SpecError("at least one class is required")
        families = {c.family for c in self.classes}
        if families <= set(CONTOUR_FAMILIES):
            self._dim = 2
        elif families <= set(MESH_FAMILIES):
            self._dim = 3
        else:
            raise SpecError(f"families {sorted(families)} mix 2D and 3D or are unknown")
        if any(not isinstance(c.count, int) or c.count < 1 for c in self.classes):
            raise SpecError("class counts must be integers >= 1")
        if len({c.label for c in self.classes}) != len(self.classes):
            raise SpecError("class labels must be unique")
        if self.scenario not in SCENARIOS:
            raise SpecError(f"scenario must be one of {SCENARIOS}")
        if len(self.jitter_range) != 2 or not 0 < self.jitter_range[0] <= self.jitter_range[1]:
            raise SpecError("jitter_range must be [lo, hi] with 0 < lo <= hi")
        if not self.scale_factor > 0:
            raise SpecError("scale_factor must be positive")
        if not self.target_extent > 0:
            raise SpecError("target_extent must be positive")
        if self.resolution is None:
            self.resolution = 100 if self._dim == 2 else 1000
        if self.height_axis is None:
            self.height_axis = 0 if self._dim == 2 else 2
        if not 0 <= self.height_axis < self._dim:
            raise SpecError(f"height_axis must be in 0..{self._dim - 1}")

    @property
    def dim(self) -> int:
        return self._dim

    def to_dict(self) -> dict:
        d = asdict(self)
        d["jitter_range"] = list(self.jitter_range)
        return d

    @classmethod
    def from_dict(cls, doc) -> "ScenarioSpec":
        if not isinstance(doc, dict):
            raise SpecError("scenario spec must be a JSON object")
        allowed = {"classes", "scenario", "scale_factor", "jitter_range", "resolution", "seed",
                   "target_extent", "height_axis"}
        unknown = set(doc) - allowed
        if unknown:
            raise SpecError(f"unknown keys {sorted(unknown)}")
        if not isinstance(doc.get("classes"), list):
            raise SpecError('"classes" must be a list')
        classes = []
        for c in doc["classes"]:
            if not isinstance(c, dict) or set(c) - {"family", "count", "params", "name"} or "family" not in c:
                raise SpecError(f"bad class entry {c!r}")
            classes.append(ClassSpec(c["family"], c.get("count", 1), dict(c.get("params") or {}), c.get("name")))
        try:
            return cls(classes, **{k: v for k, v in doc.items() if k != "classes"})
        except TypeError as exc:
            raise SpecError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSpec":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc.msg}") from None


def default_spec(dim: int, scenario: str = "common-height", count: int | None = None,
                 seed: int = 0, resolution: int | None = None) -> ScenarioSpec:
    if dim == 2:
        classes = [ClassSpec("ellipse", count or 20), ClassSpec("rounded-rect", count or 20),
                   ClassSpec("star", count or 20)]
    elif dim == 3:
        classes = [ClassSpec("ellipsoid", count or 10, {"a": 0.45, "b": 0.45, "c": 1.0}),
                   ClassSpec("sphere", count or 10),
                   ClassSpec("pear", count or 10)]
    else:
        raise SpecError("dim must be 2 or 3")
    return ScenarioSpec(classes, scenario=scenario, seed=seed, resolution=resolution)


@dataclass
class ScenarioShape:
    geometry: Polyline2D | TriMesh
    label: str
    class_label: str
    height: float
    shape_id: str

    def atoms(self) -> ShapeAtoms:
        return to_atoms(self.geometry, self.label, {"height": self.height})


def _center_and_scale(geom, factor):
    pts = geometry_points(geom)
    mid = 0.5 * (pts.max(axis=0) + pts.min(axis=0))
    scaled = (pts - mid) * factor
    if isinstance(geom, Polyline2D):
        return Polyline2D(scaled, geom.closed)
    return TriMesh(scaled, geom.faces, geom.closed)


def scenario_geometries(spec: ScenarioSpec) -> list[ScenarioShape]:
    """Generate every shape of a scenario, bounding-box centered at the origin."""
    out = []
    root = np.random.SeedSequence(spec.seed)
    class_seqs = root.spawn(len(spec.classes))
    for ci, (cls, cseq) in enumerate(zip(spec.classes, class_seqs)):
        n_big = (cls.count + 1) // 2
        for i, mseq in enumerate(cseq.spawn(cls.count)):
            shape_rng = np.random.default_rng(mseq)
            gen_seed = int(shape_rng.integers(2**63))
            if spec.dim == 2:
                geom = gen_contour(cls.family, cls.params, spec.resolution, gen_seed)
            else:
                geom = gen_mesh(cls.family, cls.params, spec.resolution, gen_seed)
            factor = spec.target_extent / extent(geom, spec.height_axis)
            label = cls.label
            if spec.scenario == "two-heights":
                big = i < n_big
                lo, hi = spec.jitter_range
                factor *= (spec.scale_factor if big else 1.0) * shape_rng.uniform(lo, hi)
                label = f"{cls.label}-{'large' if big else 'small'}"
            geom = _center_and_scale(geom, factor)
            out.append(ScenarioShape(geom, label, cls.label, extent(geom, spec.height_axis),
                                     f"{cls.label}-{i:03d}"))
    return out


def build_scenario(spec: ScenarioSpec) -> list[tuple[ShapeAtoms, str]]:
    return [(s.atoms(), s.label) for s in scenario_geometries(spec)]
