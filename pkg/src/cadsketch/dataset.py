"""End-to-end dataset construction: scan a mesh corpus, render views,
pick representatives, generate sketches, and write a reproducible
manifest with stratified train/test splits and per-class timing.

Output layout under the chosen directory:

  <class>/<model_id>_view00.png .. _view19.png
  <class>/<model_id>_repr.png
  <class>/<model_id>_sketch.png
  manifest.jsonl          one JSON object per line, header line first
  timing.csv              class, count, mean_seconds, total_seconds

The manifest stores view/sketch paths relative to its own directory and
contains no timestamps, so identical corpus + parameters + seed rebuilds
to identical bytes. Per-model failures do not abort the batch; they are
recorded as entries with an "error" field.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
import random
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import CadSketchError, DuplicateModelId, EmptyCorpus
from .image import load_png, save_png
from .mesh_io import load_mesh, normalize_mesh, parse_mesh
from .sketch import SketchParams, generate_sketch
from .view_render import (POLICY_MAX_SILHOUETTE, VIEW_COUNT, render_all_views)

MESH_EXTENSIONS = (".obj", ".off", ".stl")

SPLIT_TRAIN = "train"
SPLIT_TEST = "test"
TRAIN_FRACTION = 0.8

LAYOUT_CLASS_FOLDERS = "class-folders"
LAYOUT_MANIFEST_FILE = "manifest-file"

MANIFEST_NAME = "manifest.jsonl"
TIMING_NAME = "timing.csv"


@dataclass(frozen=True)
class ManifestEntry:
    model_id: str
    class_label: str
    mesh_path: str
    view_paths: tuple = ()
    representative_index: int = 0
    sketch_path: str = ""
    split: str = ""
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


@dataclass
class DatasetManifest:
    seed: int
    render_size: int
    entries: list
    base_dir: str = "."

    @property
    def class_index(self) -> dict:
        counts = {}
        for e in self.entries:
            if not e.failed:
                counts[e.class_label] = counts.get(e.class_label, 0) + 1
        return counts

    def ok_entries(self):
        return [e for e in self.entries if not e.failed]

    def resolve(self, rel_path: str) -> Path:
        return Path(self.base_dir) / rel_path


@dataclass(frozen=True)
class TimingReport:
    per_class: dict  # class -> (count, mean_seconds, total_seconds)
    overall_mean: float


def scan_corpus(root, layout: str = LAYOUT_CLASS_FOLDERS):
    """List (model_id, class_label, mesh_path), lexicographically ordered.

    class-folders: each immediate subdirectory of root is a class holding
    mesh files; the model id is the file stem. manifest-file: root is a
    JSONL file of {"model_id", "class", "path"} objects.
    """
    found = []
    if layout == LAYOUT_CLASS_FOLDERS:
        root = Path(root)
        if not root.is_dir():
            raise EmptyCorpus(f"not a directory: {root}")
        for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
            for mesh in sorted(class_dir.iterdir()):
                if mesh.suffix.lower() in MESH_EXTENSIONS and mesh.is_file():
                    found.append((mesh.stem, class_dir.name, str(mesh)))
    elif layout == LAYOUT_MANIFEST_FILE:
        with open(root, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                row = json.loads(line)
                found.append((row["model_id"], row["class"], row["path"]))
        found.sort(key=lambda t: (t[1], t[0]))
    else:
        raise ValueError(f"unknown corpus layout {layout!r}")
    if not found:
        raise EmptyCorpus(f"no mesh files under {root}")
    seen = {}
    for model_id, class_label, path in found:
        if model_id in seen:
            raise DuplicateModelId(
                f"model id {model_id!r} appears at both {seen[model_id]} and {path}"
            )
        seen[model_id] = path
    return found


def split_assignments(ids_by_class: dict, seed: int) -> dict:
    """Stratified 80/20 split: per class, a shuffle seeded by (seed, class)
    sends the first ceil(0.8 n) models to train. Returns id -> split."""
    assignment = {}
    for class_label in sorted(ids_by_class):
        ids = sorted(ids_by_class[class_label])
        rng = random.Random(f"{seed}:{class_label}")
        rng.shuffle(ids)
        train_n = math.ceil(TRAIN_FRACTION * len(ids))
        for i, model_id in enumerate(ids):
            assignment[model_id] = SPLIT_TRAIN if i < train_n else SPLIT_TEST
    return assignment


def _process_model(model_id, class_label, mesh_path, out_dir, params,
                   policy, manual_index, size):
    """Parse, render, sketch and persist one model. Returns
    (entry_fields, seconds) or raises."""
    with open(mesh_path, "rb") as fh:
        data = fh.read()
    started = time.perf_counter()
    mesh = normalize_mesh(parse_mesh(data, filename=mesh_path))
    views = render_all_views(mesh, model_id=model_id, size=size,
                             policy=policy, manual_index=manual_index)
    sketch = generate_sketch(views.representative, params)
    seconds = time.perf_counter() - started

    class_dir = Path(out_dir) / class_label
    class_dir.mkdir(parents=True, exist_ok=True)
    rel_views = []
    for i, img in enumerate(views.images):
        rel = f"{class_label}/{model_id}_view{i:02d}.png"
        save_png(img, Path(out_dir) / rel)
        rel_views.append(rel)
    save_png(views.representative, class_dir / f"{model_id}_repr.png")
    rel_sketch = f"{class_label}/{model_id}_sketch.png"
    save_png(sketch, Path(out_dir) / rel_sketch)
    return {
        "view_paths": tuple(rel_views),
        "representative_index": views.representative_index,
        "sketch_path": rel_sketch,
    }, seconds


def build_dataset(corpus, out_dir, params: SketchParams | None = None,
                  policy: str = POLICY_MAX_SILHOUETTE,
                  manual_index: int | None = None,
                  seed: int = 0, size: int = 256, workers: int = 1):
    """Run the full corpus -> sketch pipeline.

    corpus is the scan_corpus listing. Returns (DatasetManifest,
    TimingReport); the manifest is written last via temp-file rename.
    """
    if params is None:
        params = SketchParams()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ids_by_class = {}
    for model_id, class_label, _ in corpus:
        ids_by_class.setdefault(class_label, []).append(model_id)
    splits = split_assignments(ids_by_class, seed)

    def job(item):
        model_id, class_label, mesh_path = item
        try:
            fields, seconds = _process_model(
                model_id, class_label, mesh_path, out_dir, params,
                policy, manual_index, size)
            return item, fields, seconds, None
        except (CadSketchError, OSError) as exc:
            return item, None, 0.0, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, corpus))
    else:
        results = [job(item) for item in corpus]

    entries = []
    timings = {}
    for (model_id, class_label, mesh_path), fields, seconds, error in results:
        if error is not None:
            entries.append(ManifestEntry(
                model_id=model_id, class_label=class_label,
                mesh_path=mesh_path, error=error))
            continue
        entries.append(ManifestEntry(
            model_id=model_id, class_label=class_label, mesh_path=mesh_path,
            view_paths=fields["view_paths"],
            representative_index=fields["representative_index"],
            sketch_path=fields["sketch_path"],
            split=splits[model_id]))
        timings.setdefault(class_label, []).append(seconds)

    manifest = DatasetManifest(seed=seed, render_size=size,
                               entries=entries, base_dir=str(out_dir))
    write_manifest(manifest, out_dir / MANIFEST_NAME)

    per_class = {}
    all_times = []
    for class_label in sorted(timings):
        times = timings[class_label]
        per_class[class_label] = (len(times), sum(times) / len(times), sum(times))
        all_times.extend(times)
    timing = TimingReport(
        per_class=per_class,
        overall_mean=sum(all_times) / len(all_times) if all_times else 0.0)
    write_timing_csv(timing, out_dir / TIMING_NAME)
    return manifest, timing


def write_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    lines = [json.dumps({
        "kind": "cadsketch-manifest",
        "version": 1,
        "seed": manifest.seed,
        "render_size": manifest.render_size,
    }, sort_keys=True)]
    for e in manifest.entries:
        row = {"model_id": e.model_id, "class": e.class_label,
               "mesh_path": e.mesh_path}
        if e.failed:
            row["error"] = e.error
        else:
            row.update({
                "view_paths": list(e.view_paths),
                "representative_index": e.representative_index,
                "sketch_path": e.sketch_path,
                "split": e.split,
            })
        lines.append(json.dumps(row, sort_keys=True))
    tmp = path.with_suffix(".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    entries = []
    seed = 0
    size = 256
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if i == 0 and row.get("kind") == "cadsketch-manifest":
                seed = row.get("seed", 0)
                size = row.get("render_size", 256)
                continue
            entries.append(ManifestEntry(
                model_id=row["model_id"], class_label=row["class"],
                mesh_path=row.get("mesh_path", ""),
                view_paths=tuple(row.get("view_paths", ())),
                representative_index=row.get("representative_index", 0),
                sketch_path=row.get("sketch_path", ""),
                split=row.get("split", ""),
                error=row.get("error", "")))
    return DatasetManifest(seed=seed, render_size=size, entries=entries,
                           base_dir=str(path.parent))


def write_timing_csv(timing: TimingReport, path) -> None:
    lines = ["class,count,mean_seconds,total_seconds"]
    for class_label in sorted(timing.per_class):
        count, mean_s, total_s = timing.per_class[class_label]
        lines.append(f"{class_label},{count},{mean_s:.6f},{total_s:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def validate_manifest(manifest: DatasetManifest):
    """Data-quality checks; violations are returned, not raised."""
    violations = []
    seen = set()
    split_counts = {}
    for e in manifest.entries:
        if e.model_id in seen:
            violations.append(f"duplicate model_id {e.model_id!r}")
        seen.add(e.model_id)
        if e.failed:
            continue
        counts = split_counts.setdefault(e.class_label, {SPLIT_TRAIN: 0, SPLIT_TEST: 0})
        if e.split in counts:
            counts[e.split] += 1
        else:
            violations.append(f"{e.model_id}: unknown split {e.split!r}")
        if len(e.view_paths) != VIEW_COUNT:
            violations.append(f"{e.model_id}: {len(e.view_paths)} view paths, expected {VIEW_COUNT}")
        for rel in list(e.view_paths) + [e.sketch_path]:
            p = manifest.resolve(rel)
            if not p.is_file():
                violations.append(f"{e.model_id}: missing file {p}")
            else:
                img = load_png(p)
                if img.shape != (manifest.render_size, manifest.render_size):
                    violations.append(
                        f"{e.model_id}: {p} is {img.shape[1]}x{img.shape[0]}, "
                        f"expected {manifest.render_size}x{manifest.render_size}")
    for class_label in sorted(split_counts):
        counts = split_counts[class_label]
        n = counts[SPLIT_TRAIN] + counts[SPLIT_TEST]
        if n and abs(counts[SPLIT_TRAIN] / n - TRAIN_FRACTION) > 1.0 / n + 1e-9:
            violations.append(
                f"class {class_label!r}: split {counts[SPLIT_TRAIN]}/{counts[SPLIT_TEST]} "
                f"violates the 80/20 ratio")
    return violations
