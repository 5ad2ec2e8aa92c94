"""Sizing systems from shape clusters.

Banded mode splits the sample by a height-like metadata key and clusters
each band separately with its own bandwidth; pooled mode clusters the
whole sample once. Sizes are described by per-group medians of the
numeric metadata.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .clustering import kernel_kmeans
from .errors import EmptyBand, MissingMetadataKey, ValidationError
from .geometry import ShapeAtoms
from .rkhs import KernelConfig, gram_matrix, lambda_heuristic


@dataclass
class SizeEntry:
    size_id: str
    band: tuple[float, float] | None
    group_size: int
    medians: dict[str, float]
    members: list[str] = field(default_factory=list)


@dataclass
class SizingReport:
    mode: str
    sizes: list[SizeEntry]
    band_key: str | None = None
    lambdas: list[float] = field(default_factory=list)
    unassigned: list[str] = field(default_factory=list)
    converged: bool = True

    @property
    def measurement_keys(self) -> list[str]:
        keys = sorted({k for s in self.sizes for k in s.medians})
        if self.band_key in keys:
            keys.remove(self.band_key)
            keys.insert(0, self.band_key)
        return keys

    def to_dict(self) -> dict:
        d = asdict(self)
        for s in d["sizes"]:
            s["band"] = list(s["band"]) if s["band"] is not None else None
        return d

    def to_csv(self) -> str:
        """One row per size: size, band, median of each measurement, group size."""
        keys = self.measurement_keys
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["size", "band", *keys, "group_size"])
        for s in self.sizes:
            band = f"{_fmt(s.band[0])}-{_fmt(s.band[1])}" if s.band else ""
            w.writerow([s.size_id, band, *(_fmt(s.medians.get(k, math.nan)) for k in keys),
                        s.group_size])
        return buf.getvalue()


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def parse_bands(text: str) -> list[tuple[float, float]]:
    """Parse ``"1190-1250,1250-1310"`` into ordered (lo, hi) pairs."""
    bands = []
    for part in text.split(","):
        part = part.strip()
        lo, sep, hi = part.partition("-")
        try:
            lo_v, hi_v = float(lo), float(hi)
        except ValueError:
            raise ValidationError(f"bad band {part!r}; expected 'lo-hi'") from None
        if not sep or not lo_v < hi_v:
            raise ValidationError(f"bad band {part!r}; need lo < hi")
        bands.append((lo_v, hi_v))
    if not bands:
        raise ValidationError("no bands given")
    for (_, h0), (l1, _) in zip(bands, bands[1:]):
        if l1 < h0:
            raise ValidationError("bands must be sorted and non-overlapping")
    return bands


def _numeric_keys(shapes):
    keys = set()
    for s in shapes:
        keys.update(k for k, v in s.meta.items() if isinstance(v, (int, float)) and not isinstance(v, bool))
    return sorted(keys)


def _medians(shapes, keys):
    out = {}
    for k in keys:
        vals = [float(s.meta[k]) for s in shapes if isinstance(s.meta.get(k), (int, float))]
        if vals:
            out[k] = float(np.median(vals))
    return out


def _cluster(shapes, k, lam, lambda_method, seed, restarts):
    if lam is None:
        lam = lambda_heuristic(shapes, lambda_method)
    gram = gram_matrix(shapes, KernelConfig(lam, shapes[0].dim))
    model = kernel_kmeans(gram, k, seed=seed, restarts=restarts)
    labels = np.array(model.assignment)
    # order groups by mean squared RKHS norm, a size proxy: smallest first
    norms = np.diag(gram.entries)
    order = sorted(range(k), key=lambda c: (float(norms[labels == c].mean()), c))
    return [np.flatnonzero(labels == c) for c in order], lam, model.converged


def banded_sizing(shapes: Sequence[ShapeAtoms], ids: Sequence[str], band_key: str,
                  bands: Sequence[tuple[float, float]], k_per_band: int = 2,
                  lam: float | None = None, lambda_method: str = "pooled-rms",
                  seed: int = 0, restarts: int = 10) -> SizingReport:
    """Cluster each band into ``k_per_band`` sizes.

    A shape falls in ``[lo, hi)``; the last band also includes its upper
    end. Shapes outside every band are listed as unassigned.
    """
    for sid, s in zip(ids, shapes):
        if not isinstance(s.meta.get(band_key), (int, float)):
            raise MissingMetadataKey(f"shape {sid} has no numeric {band_key!r} metadata")
    keys = _numeric_keys(shapes)
    values = np.array([float(s.meta[band_key]) for s in shapes])
    taken = np.zeros(len(shapes), dtype=bool)
    report = SizingReport("banded", [], band_key)
    for b, (lo, hi) in enumerate(bands):
        last = b == len(bands) - 1
        inside = (values >= lo) & ((values <= hi) if last else (values < hi)) & ~taken
        idx = np.flatnonzero(inside)
        taken |= inside
        if len(idx) < k_per_band:
            raise EmptyBand(f"band {lo:g}-{hi:g} has {len(idx)} members, need {k_per_band}")
        members = [shapes[i] for i in idx]
        groups, band_lam, ok = _cluster(members, k_per_band, lam, lambda_method, seed, restarts)
        report.lambdas.append(band_lam)
        report.converged &= ok
        for g in groups:
            report.sizes.append(SizeEntry(
                f"T{len(report.sizes) + 1}", (lo, hi), len(g),
                _medians([members[i] for i in g], keys), [ids[idx[i]] for i in g]))
    report.unassigned = [ids[i] for i in np.flatnonzero(~taken)]
    return report


def pooled_sizing(shapes: Sequence[ShapeAtoms], ids: Sequence[str], k: int,
                  lam: float | None = None, lambda_method: str = "pooled-rms",
                  seed: int = 0, restarts: int = 10, band_key: str | None = None) -> SizingReport:
    keys = _numeric_keys(shapes)
    groups, used_lam, ok = _cluster(list(shapes), k, lam, lambda_method, seed, restarts)
    report = SizingReport("pooled", [], band_key, [used_lam], converged=ok)
    for g in groups:
        report.sizes.append(SizeEntry(
            f"T{len(report.sizes) + 1}", None, len(g),
            _medians([shapes[i] for i in g], keys), [ids[i] for i in g]))
    return report


def long_table(report: SizingReport, shapes: Sequence[ShapeAtoms], ids: Sequence[str]) -> str:
    """Boxplot-ready rows: size, shape id, measurement, value."""
    by_id = dict(zip(ids, shapes))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["size", "shape_id", "measurement", "value"])
    for s in report.sizes:
        for sid in s.members:
            for k in report.measurement_keys:
                v = by_id[sid].meta.get(k)
                if isinstance(v, (int, float)):
                    w.writerow([s.size_id, sid, k, repr(float(v))])
    return buf.getvalue()
