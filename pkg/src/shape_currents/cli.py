"""``shape-currents`` command line: ingest, gram, cluster, sweep, sizing, synth.

Exit codes: 0 success, 1 validation/parse/usage error, 2 k-means stopped at
max_iter without converging.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .bundle import RunManifest, read_bundle, safe_id, write_bundle
from .clustering import adjusted_rand_index, kernel_kmeans, sweep_k
from .errors import (
    DimensionMismatch,
    EmptyInput,
    ParseError,
    ShapeCurrentsError,
    ValidationError,
)
from .geometry import to_atoms
from .meshio import FORMATS, _EXT, load_shape, save_shape
from .rkhs import (
    GRAM_MAGIC,
    LAMBDA_METHODS,
    GramMatrix,
    KernelConfig,
    gram_matrix,
    lambda_heuristic,
    read_gram_binary,
    read_gram_csv,
    write_gram_binary,
    write_gram_csv,
)
from .sizing import banded_sizing, long_table, parse_bands, pooled_sizing
from .synth import ScenarioSpec, default_spec, scenario_geometries

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2


class UsageError(ShapeCurrentsError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _sidecar(path) -> Path:
    return Path(str(path) + ".manifest.json")


def _write_sidecar(path, manifest: RunManifest, **extra) -> None:
    _sidecar(path).write_text(_dump({"manifest": manifest.to_dict(), **extra}))


# -- ingest --------------------------------------------------------------------


def _collect_inputs(inputs):
    files = []
    for raw in inputs:
        p = Path(raw)
        if p.is_dir():
            files += sorted(f for f in p.iterdir() if f.is_file() and f.suffix.lower() in _EXT)
        elif p.exists():
            files.append(p)
        else:
            raise EmptyInput(f"{p}: no such file or directory")
    return files


def _read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and "id" not in rows[0]:
        raise ParseError('table needs an "id" column', path, 1)
    return rows


def _number(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return v


def cmd_ingest(args) -> int:
    files = _collect_inputs(args.inputs)
    if not files:
        raise EmptyInput("no input shape files found")
    labels = {r["id"]: r.get("label") for r in _read_table(args.labels)} if args.labels else {}
    meta = {}
    if args.meta:
        for r in _read_table(args.meta):
            meta[r["id"]] = {k: _number(v) for k, v in r.items() if k != "id" and v not in (None, "")}
    shapes, ids, failures = [], [], []
    for f in files:
        try:
            geom = load_shape(f, args.format)
        except ShapeCurrentsError as exc:
            failures.append(str(exc))
            continue
        sid = safe_id(f.stem)
        ids.append(sid)
        shapes.append(to_atoms(geom, labels.get(f.stem, labels.get(sid)), meta.get(f.stem, meta.get(sid, {}))))
    for msg in failures:
        print(f"error: {msg}", file=sys.stderr)
    if failures:
        return EXIT_INVALID
    dims = {s.dim for s in shapes}
    if len(dims) > 1:
        raise DimensionMismatch("inputs mix 2D polylines and 3D meshes")
    manifest = RunManifest.for_inputs("ingest", files, options={"format": args.format})
    write_bundle(args.output, shapes, ids, manifest)
    print(f"wrote {len(shapes)} shapes to {args.output}")
    return EXIT_OK


# -- gram ----------------------------------------------------------------------


def _resolve_lambda(args, shapes):
    if args.lam is not None:
        KernelConfig(args.lam, shapes[0].dim)  # validates
        return args.lam, "given"
    return lambda_heuristic(shapes, args.lambda_method), f"auto:{args.lambda_method}"


def cmd_gram(args) -> int:
    ds = read_bundle(args.dataset)
    lam, source = _resolve_lambda(args, ds.shapes)
    gram = gram_matrix(ds.shapes, KernelConfig(lam, ds.dim), ds.ids, threads=args.threads)
    fmt = args.format or ("binary" if str(args.output).endswith((".bin", ".gram")) else "csv")
    (write_gram_binary if fmt == "binary" else write_gram_csv)(gram, args.output)
    manifest = RunManifest.for_inputs("gram", [args.dataset], lam=lam, lambda_source=source,
                                      options={"format": fmt, "lambda_method": args.lambda_method})
    _write_sidecar(args.output, manifest, shape_ids=list(gram.shape_ids), dim=gram.dim,
                   labels=ds.labels)
    print(f"lambda = {lam!r} ({source})")
    print(_dump(manifest.to_dict()), end="")
    return EXIT_OK


def load_gram(path) -> tuple[GramMatrix, dict]:
    path = Path(path)
    side = json.loads(_sidecar(path).read_text()) if _sidecar(path).exists() else {}
    man = side.get("manifest", {})
    with open(path, "rb") as fh:
        head = fh.read(len(GRAM_MAGIC))
    if head == GRAM_MAGIC:
        gram = read_gram_binary(path, side.get("shape_ids"))
    else:
        gram = read_gram_csv(path, man.get("lam") or float("nan"), side.get("dim", 0))
    bad = gram.check()
    if bad:
        raise ValidationError(f"{path}: invalid Gram matrix: {', '.join(bad)}")
    return gram, side


def _true_labels(args, side, m):
    if getattr(args, "dataset", None):
        labels = read_bundle(args.dataset).labels
    else:
        labels = side.get("labels")
    if labels and len(labels) == m and all(lab is not None for lab in labels):
        return labels
    return None


def cmd_cluster(args) -> int:
    gram, side = load_gram(args.gram)
    model = kernel_kmeans(gram, args.k, seed=args.seed, init=args.init, max_iter=args.max_iter,
                          restarts=args.restarts, threads=args.threads)
    out = model.to_dict()
    out["shape_ids"] = list(gram.shape_ids)
    truth = _true_labels(args, side, gram.m)
    if truth is not None and gram.m >= 2:
        out["ari"] = adjusted_rand_index(truth, model.assignment)
    out["manifest"] = RunManifest.for_inputs(
        "cluster", [args.gram], lam=gram.lam if gram.lam == gram.lam else None, seed=args.seed,
        options={"k": args.k, "restarts": args.restarts, "init": args.init,
                 "max_iter": args.max_iter}).to_dict()
    text = _dump(out)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if "ari" in out:
        print(f"ARI vs true labels: {out['ari']:.6f}", file=sys.stderr)
    return EXIT_OK if model.converged else EXIT_NOT_CONVERGED


def cmd_sweep(args) -> int:
    if args.k_min > args.k_max:
        raise UsageError(f"--k-min ({args.k_min}) must not exceed --k-max ({args.k_max})")
    gram, _ = load_gram(args.gram)
    rows = sweep_k(gram, range(args.k_min, args.k_max + 1), seed=args.seed,
                   restarts=args.restarts, max_iter=args.max_iter, threads=args.threads)
    lines = ["k,W,silhouette"]
    lines += [f"{r.k},{r.W!r},{'' if r.mean_silhouette is None else repr(r.mean_silhouette)}" for r in rows]
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
        manifest = RunManifest.for_inputs("sweep", [args.gram], lam=gram.lam, seed=args.seed,
                                          options={"k_min": args.k_min, "k_max": args.k_max,
                                                   "restarts": args.restarts})
        _write_sidecar(args.output, manifest)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sizing(args) -> int:
    ds = read_bundle(args.dataset)
    opts = dict(lam=args.lam, lambda_method=args.lambda_method, seed=args.seed,
                restarts=args.restarts)
    if args.pooled:
        if args.k is None:
            raise UsageError("--pooled needs --k")
        report = pooled_sizing(ds.shapes, ds.ids, args.k, band_key=args.band_key, **opts)
    else:
        if not args.band_key or not args.bands:
            raise UsageError("banded mode needs --band-key and --bands (or use --pooled --k K)")
        report = banded_sizing(ds.shapes, ds.ids, args.band_key, parse_bands(args.bands),
                               args.k_per_band, **opts)
    prefix = Path(args.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest.for_inputs(
        "sizing", [args.dataset], lam=args.lam, seed=args.seed,
        lambda_source="given" if args.lam is not None else f"auto:{args.lambda_method}",
        options={"mode": report.mode, "band_key": args.band_key, "bands": args.bands,
                 "k_per_band": args.k_per_band, "k": args.k, "restarts": args.restarts})
    doc = report.to_dict()
    doc["manifest"] = manifest.to_dict()
    Path(f"{prefix}.json").write_text(_dump(doc))
    Path(f"{prefix}.csv").write_text(report.to_csv())
    Path(f"{prefix}.long.csv").write_text(long_table(report, ds.shapes, ds.ids))
    _write_sidecar(f"{prefix}.csv", manifest)
    sys.stdout.write(report.to_csv())
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_synth(args) -> int:
    if args.preset:
        dim, _, scenario = args.preset.partition(":")
        spec = default_spec(int(dim[0]), scenario or "common-height", seed=args.seed or 0)
        inputs = []
    else:
        if not args.spec:
            raise UsageError("give a scenario spec JSON file or --preset")
        spec = ScenarioSpec.from_json(Path(args.spec).read_text())
        if args.seed is not None:
            spec.seed = args.seed
        inputs = [args.spec]
    items = scenario_geometries(spec)
    shapes = [it.atoms() for it in items]
    ids = [it.shape_id for it in items]
    manifest = RunManifest.for_inputs("synth", inputs, seed=spec.seed,
                                      options={"spec": spec.to_dict()})
    out = write_bundle(args.output, shapes, ids, manifest)
    if args.export_geometry:
        gdir = out / "geometry"
        gdir.mkdir(exist_ok=True)
        ext = ".csv" if spec.dim == 2 else ".off"
        for it in items:
            save_shape(it.geometry, gdir / f"{it.shape_id}{ext}")
    print(f"wrote {len(shapes)} shapes ({len(set(it.label for it in items))} labels) to {out}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _add_lambda(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float, help="kernel bandwidth, same unit as the data")
    g.add_argument("--lambda-auto", action="store_true",
                   help="bandwidth from the spread of all atom centers (default)")
    p.add_argument("--lambda-method", choices=LAMBDA_METHODS, default="pooled-rms")


def _add_kmeans(p, k=True):
    if k:
        p.add_argument("--k", type=int, required=True)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shape-currents", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="convert shape files into a dataset bundle")
    p.add_argument("inputs", nargs="+", help="shape files or directories")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", choices=FORMATS, default=None, help="default: by file extension")
    p.add_argument("--labels", help="CSV with columns id,label")
    p.add_argument("--meta", help="CSV with an id column and numeric measurement columns")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gram", help="compute the Gram matrix of a bundle")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", choices=("csv", "binary"), default=None)
    p.add_argument("--threads", type=int, default=None)
    _add_lambda(p)
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("cluster", help="kernel k-means on a Gram matrix")
    p.add_argument("gram")
    p.add_argument("-o", "--output")
    p.add_argument("--init", choices=("kmeans++", "random"), default="kmeans++")
    p.add_argument("--dataset", help="bundle whose labels are used to report the ARI")
    _add_kmeans(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("sweep", help="W and mean silhouette over a range of k")
    p.add_argument("gram")
    p.add_argument("-o", "--output")
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=8)
    _add_kmeans(p, k=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sizing", help="sizing report from a bundle with metadata")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True, help="output prefix")
    p.add_argument("--band-key")
    p.add_argument("--bands", help='e.g. "1190-1250,1250-1310"')
    p.add_argument("--k-per-band", type=int, default=2)
    p.add_argument("--pooled", action="store_true")
    p.add_argument("--k", type=int)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    _add_lambda(p)
    p.set_defaults(func=cmd_sizing)

    p = sub.add_parser("synth", help="generate a synthetic scenario bundle")
    p.add_argument("spec", nargs="?", help="scenario spec JSON file")
    p.add_argument("--preset", choices=("2d:common-height", "2d:two-heights",
                                        "3d:common-height", "3d:two-heights"))
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--export-geometry", action="store_true",
                   help="also write csv/OFF geometry files under geometry/")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ShapeCurrentsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
