"""Command-line entry point.

Subcommands cover every pipeline stage: render, sketch, compare, index,
query, evaluate, dataset-build. Exit codes: 0 success, 1 data failure
(bad input files, failed models, unmatched ids), 2 usage error. Progress
and diagnostics go to stderr; machine-readable output goes to stdout or
to files named with -o.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import dataset as ds
from .config import Config, load_config
from .errors import CadSketchError
from .hog import HogParams
from .image import load_png, save_png
from .metrics import average_metrics, compare_corpus, metrics_csv
from .mesh_io import load_mesh, normalize_mesh
from .retrieval import (QueryRecord, build_index, eval_csv, evaluate,
                        load_index, query, save_index)
from .sketch import OPERATORS, generate_sketch
from .view_render import render_all_views, write_view_pngs

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _config_overrides(args) -> dict:
    keys = ("gaussian_kernel", "gaussian_sigma", "dodge_scale",
            "binary_threshold", "canny_low", "canny_high", "operator", "nms",
            "blend_weight", "pixels_per_cell", "orientations", "block_norm",
            "render_size", "policy", "manual_index", "workers", "seed")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _load_cfg(args) -> Config:
    try:
        return load_config(getattr(args, "config", None), _config_overrides(args))
    except (ValueError, CadSketchError) as exc:
        raise UsageError(str(exc))


def _bool_flag(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_sketch_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--operator", choices=OPERATORS,
                   help="edge operator for the sketch's edge branch (default canny)")
    p.add_argument("--nms", type=_bool_flag, metavar="BOOL",
                   help="apply non-maximum suppression inside Canny (default true)")
    p.add_argument("--w", dest="blend_weight", type=float, metavar="W",
                   help="blend weight of the dodge branch, 0..1 (default 0.15)")
    p.add_argument("--kernel", dest="gaussian_kernel", type=int, metavar="K",
                   help="dodge blur kernel size, odd (default 21)")
    p.add_argument("--sigma", dest="gaussian_sigma", type=float, metavar="S",
                   help="dodge blur sigma in pixels (default 6.0)")
    p.add_argument("--scale", dest="dodge_scale", type=float, metavar="C",
                   help="dodge division scale (default 256.0)")
    p.add_argument("--threshold", dest="binary_threshold", type=int, metavar="T",
                   help="dodge branch binary threshold (default 245)")
    p.add_argument("--low", dest="canny_low", type=float, metavar="L",
                   help="Canny low gradient threshold (default 50)")
    p.add_argument("--high", dest="canny_high", type=float, metavar="H",
                   help="Canny high gradient threshold, also the single threshold "
                        "of non-Canny operators (default 150)")


def _add_hog_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cell", dest="pixels_per_cell", type=int, metavar="N",
                   help="square cell size in pixels (default 8)")
    p.add_argument("--orientations", type=int, metavar="N",
                   help="orientation bins over 180 degrees (default 8)")
    p.add_argument("--block-norm", dest="block_norm", choices=("L2", "L2Hys"),
                   help="per-cell normalization (default L2)")


def _add_render_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--size", dest="render_size", type=int, metavar="PX",
                   help="view image size in pixels (default 256)")
    p.add_argument("--policy", choices=("max-silhouette", "max-entropy", "manual"),
                   help="representative view selection policy (default max-silhouette)")
    p.add_argument("--manual-index", dest="manual_index", type=int, metavar="I",
                   help="view index 0..19 for --policy manual")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cadsketch",
        description="CAD mesh to sketch pipeline: render views, synthesize "
                    "sketches, score them, and run sketch-query retrieval.")
    parser.add_argument("--config", metavar="FILE",
                        help="key=value config file (default ./cadsketch.conf if present)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render the 20 dodecahedron views of a mesh or corpus")
    p.add_argument("input", help="mesh file (.obj/.off/.stl) or corpus directory")
    p.add_argument("-o", "--out", required=True, help="output directory")
    _add_render_flags(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("sketch", help="generate a sketch from an image or directory of images")
    p.add_argument("input", help="PNG file or directory of PNGs")
    p.add_argument("-o", "--out", default=".", help="output directory (default .)")
    _add_sketch_flags(p)
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser("compare", help="average similarity measures of generated vs reference sketches")
    p.add_argument("generated", help="directory of generated sketches, or of per-method subdirectories")
    p.add_argument("reference", help="directory of reference sketches")
    p.add_argument("-o", "--out", help="write CSV here instead of stdout")
    p.add_argument("--times", metavar="CSV",
                   help="optional model_id,seconds file for the conversion-time column")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("index", help="build the per-view descriptor index from a dataset manifest")
    p.add_argument("--manifest", required=True, help="manifest.jsonl of a built dataset")
    p.add_argument("-o", "--out", required=True, help="feature store output path (.cskn)")
    _add_hog_flags(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="rank indexed models against a query sketch")
    p.add_argument("sketch", help="query sketch PNG")
    p.add_argument("--index", required=True, help="feature store built by 'index'")
    p.add_argument("--manifest", help="manifest for class names (the store keeps numeric ids)")
    p.add_argument("-k", type=int, default=10, help="results to print (default 10)")
    p.add_argument("--aggregate", choices=("min", "mean"), default="min",
                   help="per-model aggregation over its 20 view distances (default min)")
    _add_hog_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("evaluate", help="run the retrieval evaluation harness over a dataset")
    p.add_argument("--manifest", required=True, help="manifest.jsonl of a built dataset")
    p.add_argument("--index", help="reuse a feature store instead of re-extracting")
    p.add_argument("-k", type=int, default=10, help="cutoff for precision/accuracy (default 10)")
    p.add_argument("--split", choices=("all", "train", "test"), default="all",
                   help="which entries' sketches act as queries (default all)")
    p.add_argument("--aggregate", choices=("min", "mean"), default="min")
    p.add_argument("-o", "--out", help="write the per-class CSV here instead of stdout")
    _add_hog_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("dataset-build", help="run the whole corpus -> dataset pipeline")
    p.add_argument("corpus", help="corpus root (class folders) or corpus manifest file")
    p.add_argument("-o", "--out", required=True, help="dataset output directory")
    p.add_argument("--layout", choices=(ds.LAYOUT_CLASS_FOLDERS, ds.LAYOUT_MANIFEST_FILE),
                   default=ds.LAYOUT_CLASS_FOLDERS)
    p.add_argument("--seed", type=int, help="split shuffle seed, recorded in the manifest (default 0)")
    p.add_argument("--workers", type=int, help="parallel model workers (default 1, env CADSKETCH_WORKERS)")
    _add_render_flags(p)
    _add_sketch_flags(p)
    p.set_defaults(func=cmd_dataset_build)

    return parser


def cmd_render(args) -> int:
    cfg = _load_cfg(args)
    src = Path(args.input)
    out = Path(args.out)
    manual = cfg.manual_index if cfg.manual_index >= 0 else None
    if src.is_file():
        mesh = normalize_mesh(load_mesh(src))
        views = render_all_views(mesh, model_id=src.stem, size=cfg.render_size,
                                 policy=cfg.policy, manual_index=manual)
        write_view_pngs(views, out)
        _info(f"rendered {src.stem}: 20 views + representative -> {out}")
        return EXIT_OK
    if not src.is_dir():
        raise CadSketchError(f"no such file or directory: {src}")
    corpus = ds.scan_corpus(src)
    failures = 0
    for model_id, class_label, mesh_path in corpus:
        try:
            mesh = normalize_mesh(load_mesh(mesh_path))
            views = render_all_views(mesh, model_id=model_id, size=cfg.render_size,
                                     policy=cfg.policy, manual_index=manual)
            write_view_pngs(views, out / class_label)
        except (CadSketchError, OSError) as exc:
            failures += 1
            _info(f"FAILED {model_id}: {exc}")
    _info(f"rendered {len(corpus) - failures}/{len(corpus)} models -> {out}")
    return EXIT_DATA if failures else EXIT_OK


def cmd_sketch(args) -> int:
    cfg = _load_cfg(args)
    params = cfg.sketch_params()
    src = Path(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if src.is_file():
        inputs = [src]
    elif src.is_dir():
        inputs = sorted(p for p in src.iterdir() if p.suffix.lower() == ".png")
        if not inputs:
            raise UsageError(f"no PNG images under {src}")
    else:
        raise CadSketchError(f"no such file or directory: {src}")
    for path in inputs:
        img = load_png(path)
        started = time.perf_counter()
        result = generate_sketch(img, params)
        elapsed = time.perf_counter() - started
        save_png(result, out / f"{path.stem}_sketch.png")
        print(f"{path.stem},{elapsed:.4f}")
    return EXIT_OK


def _sketch_id(path: Path) -> str:
    stem = path.stem
    return stem[:-7] if stem.endswith("_sketch") else stem


def _load_sketch_dir(directory: Path) -> dict:
    images = {}
    for p in sorted(directory.iterdir()):
        if p.is_file() and p.suffix.lower() == ".png":
            images[_sketch_id(p)] = load_png(p)
    return images


def _load_times_csv(path) -> dict:
    times = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            model_id, _, value = line.partition(",")
            times[model_id.strip()] = float(value)
    return times


def cmd_compare(args) -> int:
    gen_dir = Path(args.generated)
    ref_dir = Path(args.reference)
    if not gen_dir.is_dir() or not ref_dir.is_dir():
        raise UsageError("compare needs two directories")
    reference = _load_sketch_dir(ref_dir)
    subdirs = sorted(p for p in gen_dir.iterdir() if p.is_dir())
    times = _load_times_csv(args.times) if args.times else None
    if subdirs:
        methods = {p.name: _load_sketch_dir(p) for p in subdirs}
        methods = {name: imgs for name, imgs in methods.items() if imgs}
        table = compare_corpus(methods, reference,
                               {name: times for name in methods} if times else None)
    else:
        generated = _load_sketch_dir(gen_dir)
        if not generated or not reference:
            raise UsageError("no PNG sketches to compare")
        table = {gen_dir.name: average_metrics(generated, reference, times)}
    if not table:
        raise UsageError("no PNG sketches to compare")
    csv_text = metrics_csv(table)
    for name, avg in sorted(table.items()):
        if avg.identical_pairs:
            _info(f"{name}: {avg.identical_pairs} identical pair(s) excluded "
                  f"from the PSNR mean")
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_index(args) -> int:
    cfg = _load_cfg(args)
    manifest = ds.load_manifest(args.manifest)
    bag = build_index(manifest, cfg.hog_params())
    save_index(bag, args.out)
    _info(f"indexed {len(bag.entries)} models "
          f"({len(bag.entries) * 20} vectors, dim {bag.dim}) -> {args.out}")
    return EXIT_OK


def cmd_query(args) -> int:
    cfg = _load_cfg(args)
    if args.k < 1:
        raise UsageError(f"-k must be >= 1, got {args.k}")
    manifest = ds.load_manifest(args.manifest) if args.manifest else None
    bag = load_index(args.index, classes=manifest, params=cfg.hog_params())
    sketch = load_png(args.sketch)
    result = query(sketch, bag, k=args.k, aggregate=args.aggregate)
    for rank, (model_id, class_label, score) in enumerate(result.items, start=1):
        print(f"{rank},{model_id},{class_label},{score:.6g}")
    _info(f"query time: {result.query_time:.3e} s")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_cfg(args)
    if args.k < 1:
        raise UsageError(f"-k must be >= 1, got {args.k}")
    manifest = ds.load_manifest(args.manifest)
    if args.index:
        bag = load_index(args.index, classes=manifest, params=cfg.hog_params())
    else:
        bag = build_index(manifest, cfg.hog_params())
    queries = []
    for e in manifest.ok_entries():
        if args.split != "all" and e.split != args.split:
            continue
        queries.append(QueryRecord(
            query_id=e.model_id,
            image=load_png(manifest.resolve(e.sketch_path)),
            truth_class=e.class_label))
    if not queries:
        raise CadSketchError(f"no queries in split {args.split!r}")
    report = evaluate(bag, queries, k=args.k, aggregate=args.aggregate)
    csv_text = eval_csv(report)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_dataset_build(args) -> int:
    cfg = _load_cfg(args)
    corpus = ds.scan_corpus(args.corpus, layout=args.layout)
    manual = cfg.manual_index if cfg.manual_index >= 0 else None
    manifest, timing = ds.build_dataset(
        corpus, args.out, params=cfg.sketch_params(), policy=cfg.policy,
        manual_index=manual, seed=cfg.seed, size=cfg.render_size,
        workers=cfg.workers)
    failed = [e for e in manifest.entries if e.failed]
    for e in failed:
        _info(f"FAILED {e.model_id}: {e.error}")
    _info(f"built {len(manifest.entries) - len(failed)}/{len(manifest.entries)} "
          f"models -> {args.out} (mean {timing.overall_mean:.3f} s/model)")
    return EXIT_DATA if failed else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        _info(f"usage error: {exc}")
        return EXIT_USAGE
    except (CadSketchError, OSError) as exc:
        _info(f"error: {exc}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
