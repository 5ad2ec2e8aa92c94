"""Inner products, distances and Gram matrices of discrete currents.

The operator-valued kernel is ``K(x, y) alpha = k(x, y) alpha`` with a
scalar kernel ``k``; for two atom sets the inner product is the double sum
``sum_i sum_j k(x_i, y_j) <tau_i, sigma_j>``.
"""
from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegeneratePointCloud,
    DimensionMismatch,
    EmptySample,
    ParseError,
    ValidationError,
)
from .geometry import ShapeAtoms

UNDERFLOW_EXPONENT = -700.0


def gaussian_profile(sq_ratio: np.ndarray) -> np.ndarray:
    """exp(-r) for r = |x - y|^2 / lambda^2, flushed to 0 below e^-700."""
    arg = -np.asarray(sq_ratio, dtype=float)
    out = np.exp(np.maximum(arg, UNDERFLOW_EXPONENT))
    out[arg < UNDERFLOW_EXPONENT] = 0.0
    return out


# Scalar kernels as functions of the squared distance divided by lambda^2.
KERNELS: dict[str, Callable[[np.ndarray], np.ndarray]] = {"gaussian": gaussian_profile}


def register_kernel(name: str, profile: Callable[[np.ndarray], np.ndarray]) -> None:
    """Add a translation-invariant isotropic scalar kernel.

    ``profile`` must give a positive semi-definite kernel, otherwise Gram
    matrices stop being valid.
    """
    KERNELS[name] = profile


@dataclass(frozen=True)
class KernelConfig:
    lam: float
    dim: int
    kernel: str = "gaussian"

    def __post_init__(self):
        lam = float(self.lam)
        if not (math.isfinite(lam) and lam > 0):
            raise ValidationError(f"lambda must be positive and finite, got {self.lam}")
        if self.dim not in (2, 3):
            raise ValidationError(f"dim must be 2 or 3, got {self.dim}")
        if self.kernel not in KERNELS:
            raise ValidationError(f"unknown kernel {self.kernel!r}")
        object.__setattr__(self, "lam", lam)

    def profile(self, sq_dist):
        return KERNELS[self.kernel](np.asarray(sq_dist, dtype=float) / (self.lam * self.lam))


@dataclass(frozen=True, eq=False)
class WeightedAtoms:
    """A linear combination of shapes kept as weighted atoms.

    Each atom carries its own weight so sums like ``a*S1 + b*S2`` and
    sample means stay exact without densifying into a field.
    """

    centers: np.ndarray
    taus: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        t = np.asarray(self.taus, dtype=float)
        w = np.broadcast_to(np.asarray(self.weights, dtype=float), (len(c),)).copy()
        if c.shape != t.shape or c.ndim != 2 or len(c) == 0:
            raise ValidationError("centers and taus must be matching nonempty (n, d) arrays")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(t)) and np.all(np.isfinite(w))):
            raise ValidationError("weighted atoms must be finite")
        for name, a in (("centers", c), ("taus", t), ("weights", w)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def weight(self) -> float | None:
        """The common weight when all atoms share one, else None."""
        w = self.weights
        return float(w[0]) if np.all(w == w[0]) else None

    @classmethod
    def from_shape(cls, shape: ShapeAtoms, weight: float = 1.0) -> "WeightedAtoms":
        return cls(shape.centers, shape.taus, weight)

    @classmethod
    def combine(cls, terms: Sequence[tuple[float, "ShapeAtoms | WeightedAtoms"]]) -> "WeightedAtoms":
        if not terms:
            raise EmptySample("cannot combine an empty list of terms")
        dims = {s.dim for _, s in terms}
        if len(dims) != 1:
            raise DimensionMismatch(f"cannot combine shapes of dimensions {sorted(dims)}")
        parts = [_as_weighted(s) for _, s in terms]
        return cls(
            np.concatenate([p.centers for p in parts]),
            np.concatenate([p.taus for p in parts]),
            np.concatenate([c * p.weights for (c, _), p in zip(terms, parts)]),
        )


def _as_weighted(s) -> WeightedAtoms:
    return s if isinstance(s, WeightedAtoms) else WeightedAtoms.from_shape(s)


def _effective(s):
    if isinstance(s, WeightedAtoms):
        return s.centers, s.taus * s.weights[:, None]
    return s.centers, s.taus


def kernel_scalar(x, y, cfg: KernelConfig) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != (cfg.dim,) or y.shape != (cfg.dim,):
        raise DimensionMismatch(f"points must have dimension {cfg.dim}")
    d = x - y
    return float(cfg.profile(np.array([d @ d]))[0])


def _check_dims(a, b, cfg):
    if a.dim != b.dim or a.dim != cfg.dim:
        raise DimensionMismatch(f"shape dims {a.dim}, {b.dim} vs kernel dim {cfg.dim}")


_BLOCK_ELEMS = 1 << 21


def _pair_sum(ca, ta, cb, tb, cfg) -> float:
    # Row sums use numpy's pairwise summation and are combined with fsum.
    # Each row sum depends only on its own row, so blocking is invisible.
    rows = max(1, _BLOCK_ELEMS // max(1, len(cb)))
    sums = []
    for s in range(0, len(ca), rows):
        sq = np.zeros((len(ca[s:s + rows]), len(cb)))
        dots = np.zeros_like(sq)
        for k in range(ca.shape[1]):
            d = ca[s:s + rows, k, None] - cb[None, :, k]
            sq += d * d
            dots += ta[s:s + rows, k, None] * tb[None, :, k]
        sums.append((cfg.profile(sq) * dots).sum(axis=1))
    return math.fsum(np.concatenate(sums))


def inner_product(a, b, cfg: KernelConfig) -> float:
    _check_dims(a, b, cfg)
    ca, ta = _effective(a)
    cb, tb = _effective(b)
    return _pair_sum(ca, ta, cb, tb, cfg)


def squared_norm(a, cfg: KernelConfig) -> float:
    return inner_product(a, a, cfg)


def distance(a, b, cfg: KernelConfig) -> float:
    sq = inner_product(a, a, cfg) - 2.0 * inner_product(a, b, cfg) + inner_product(b, b, cfg)
    return math.sqrt(max(0.0, sq))


def mean_field(shapes: Sequence[ShapeAtoms]) -> WeightedAtoms:
    if not shapes:
        raise EmptySample("mean of an empty sample")
    m = len(shapes)
    return WeightedAtoms.combine([(1.0 / m, s) for s in shapes])


LAMBDA_METHODS = ("pooled-rms", "axis-mean")


def lambda_heuristic(shapes: Sequence[ShapeAtoms], method: str = "pooled-rms") -> float:
    """Bandwidth from the spread of all atom centers pooled together.

    ``pooled-rms`` is the root-mean-square distance to the pooled centroid;
    ``axis-mean`` averages the per-coordinate standard deviations.
    """
    if not shapes:
        raise EmptySample("no shapes to estimate lambda from")
    dims = {s.dim for s in shapes}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed dimensions {sorted(dims)}")
    pts = np.concatenate([s.centers for s in shapes])
    if len(pts) < 2:
        raise DegeneratePointCloud("need at least two atom centers")
    dev = pts - pts.mean(axis=0)
    if method == "pooled-rms":
        lam = math.sqrt(float(np.mean(np.sum(dev * dev, axis=1))))
    elif method == "axis-mean":
        lam = float(np.mean(np.sqrt(np.mean(dev * dev, axis=0))))
    else:
        raise ValueError(f"unknown lambda method {method!r}; expected one of {LAMBDA_METHODS}")
    if not lam > 0:
        raise DegeneratePointCloud("all atom centers coincide")
    return lam


def default_threads() -> int:
    env = os.environ.get("SHAPE_CURRENTS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True, eq=False)
class GramMatrix:
    entries: np.ndarray
    lam: float
    shape_ids: tuple[str, ...] = ()
    dim: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.array(self.entries, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValidationError(f"Gram matrix must be square, got {g.shape}")
        g.setflags(write=False)
        object.__setattr__(self, "entries", g)
        ids = tuple(self.shape_ids) or tuple(str(i) for i in range(len(g)))
        if len(ids) != len(g):
            raise ValidationError(f"{len(ids)} shape ids for a {len(g)}x{len(g)} matrix")
        object.__setattr__(self, "shape_ids", ids)

    @property
    def m(self) -> int:
        return len(self.entries)

    def distances(self) -> np.ndarray:
        """Pairwise RKHS distances implied by the inner products."""
        g = self.entries
        d = np.diag(g)
        sq = d[:, None] + d[None, :] - 2.0 * g
        np.fill_diagonal(sq, 0.0)
        return np.sqrt(np.maximum(sq, 0.0))

    def check(self, sym_tol=1e-10, psd_tol=1e-8) -> list[str]:
        """List violated invariants (empty when the matrix is valid)."""
        g = self.entries
        problems = []
        scale = max(float(np.max(np.abs(g))), np.finfo(float).tiny)
        if np.max(np.abs(g - g.T)) > sym_tol * scale:
            problems.append("not symmetric")
        if np.any(np.diag(g) < 0):
            problems.append("negative diagonal entry")
        eig = np.linalg.eigvalsh(0.5 * (g + g.T))
        if eig[0] < -psd_tol * max(eig[-1], 0.0):
            problems.append(f"not positive semi-definite (min eigenvalue {eig[0]:.3e})")
        return problems


def gram_matrix(shapes: Sequence[ShapeAtoms], cfg: KernelConfig, shape_ids=None,
                threads: int | None = None) -> GramMatrix:
    """All pairwise inner products, one sequential double sum per unordered pair.

    Entries do not depend on ``threads``.
    """
    if not shapes:
        raise EmptySample("no shapes")
    for s in shapes:
        if s.dim != cfg.dim:
            raise DimensionMismatch(f"shape of dim {s.dim} with kernel dim {cfg.dim}")
    arrays = [_effective(s) for s in shapes]
    m = len(shapes)
    pairs = [(i, j) for i in range(m) for j in range(i, m)]

    def entry(p):
        i, j = p
        return _pair_sum(*arrays[i], *arrays[j], cfg)

    threads = default_threads() if threads is None else threads
    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = list(pool.map(entry, pairs, chunksize=max(1, len(pairs) // (4 * threads))))
    else:
        values = [entry(p) for p in pairs]
    g = np.zeros((m, m))
    for (i, j), v in zip(pairs, values):
        g[i, j] = g[j, i] = v
    if shape_ids is None:
        shape_ids = [s.label or str(i) for i, s in enumerate(shapes)]
    return GramMatrix(g, cfg.lam, tuple(shape_ids), cfg.dim)


# -- serialization -------------------------------------------------------------

GRAM_MAGIC = b"GRAM1"
_HEADER = struct.Struct("<5sIdI")


def write_gram_binary(gram: GramMatrix, path) -> None:
    """``GRAM1`` | dim u32 | lambda f64 | m u32 | m*m f64 row-major, little endian."""
    data = _HEADER.pack(GRAM_MAGIC, gram.dim, gram.lam, gram.m)
    Path(path).write_bytes(data + gram.entries.astype("<f8").tobytes(order="C"))


def read_gram_binary(path, shape_ids=None) -> GramMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size or raw[:5] != GRAM_MAGIC:
        raise ParseError("missing GRAM1 magic", path)
    _, dim, lam, m = _HEADER.unpack_from(raw)
    body = raw[_HEADER.size:]
    if len(body) != 8 * m * m:
        raise ParseError(f"expected {m * m} entries, found {len(body) // 8}", path)
    g = np.frombuffer(body, dtype="<f8").reshape(m, m)
    return GramMatrix(g, lam, tuple(shape_ids or ()), dim)


def write_gram_csv(gram: GramMatrix, path) -> None:
    lines = [",".join(gram.shape_ids)]
    lines += [",".join(repr(float(v)) for v in row) for row in gram.entries]
    Path(path).write_text("\n".join(lines) + "\n")


def read_gram_csv(path, lam=float("nan"), dim=0) -> GramMatrix:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty Gram CSV", path)
    ids = [s.strip() for s in lines[0].split(",")]
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            rows.append([float(v) for v in ln.split(",")])
        except ValueError:
            raise ParseError("non-numeric Gram entry", path, lineno) from None
        if len(rows[-1]) != len(ids):
            raise ParseError(f"expected {len(ids)} columns", path, lineno)
    if len(rows) != len(ids):
        raise ParseError(f"expected {len(ids)} rows, found {len(rows)}", path)
    return GramMatrix(np.array(rows), lam, tuple(ids), dim)
