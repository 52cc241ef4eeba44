"""Sketch-query retrieval over a bag of per-view descriptors, plus the
evaluation harness (precision / recall / mAP / top-k accuracy / timing).

Indexing extracts one descriptor per view image of every model. A query
descriptor is scored against each model by the minimum MSE distance over
that model's 20 view descriptors (mean aggregation is available), ranked
ascending with lexicographic model-id tie-breaks. The harness is
ranking-agnostic: any list of RankedResult can be scored, so rankings
produced elsewhere can be evaluated through the same code path.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dataset import DatasetManifest
from .errors import DimensionMismatch, EmptyIndex, MissingViews
from .hog import (HogParams, compute_descriptor, read_feature_store,
                  write_feature_store)
from .image import GrayImage, load_png
from .view_render import VIEW_COUNT

AGGREGATE_MIN = "min"
AGGREGATE_MEAN = "mean"

DEFAULT_TOP_K = 10


@dataclass
class FeatureBag:
    """Immutable-after-build index: model_id -> (class id, (20, dim) f32)."""

    classes: tuple  # class id -> class label
    entries: dict
    dim: int
    hog_params: HogParams | None = None

    def class_label(self, class_id: int) -> str:
        if 0 <= class_id < len(self.classes):
            return self.classes[class_id]
        return str(class_id)

    def class_sizes(self) -> dict:
        sizes = {}
        for class_id, _ in self.entries.values():
            label = self.class_label(class_id)
            sizes[label] = sizes.get(label, 0) + 1
        return sizes

    def model_class(self, model_id: str) -> str:
        return self.class_label(self.entries[model_id][0])


@dataclass(frozen=True)
class RankedResult:
    items: tuple  # (model_id, class_label, score), ascending score
    query_time: float


@dataclass(frozen=True)
class ClassEval:
    model_count: int
    precision: float
    recall: float
    map: float
    topk_accuracy: float
    mean_retrieval_time: float


@dataclass(frozen=True)
class EvalReport:
    per_class: dict
    overall: ClassEval
    k: int


@dataclass(frozen=True)
class QueryRecord:
    """One evaluation query: id (matched against indexed models for the
    recall correction), image, and ground-truth class."""

    query_id: str
    image: GrayImage
    truth_class: str


def class_table(labels) -> tuple:
    return tuple(sorted(set(labels)))


def build_index_from_views(items, params: HogParams | None = None) -> FeatureBag:
    """items: iterable of (model_id, class_label, [20 images])."""
    if params is None:
        params = HogParams()
    items = list(items)
    classes = class_table(label for _, label, _ in items)
    class_ids = {label: i for i, label in enumerate(classes)}
    entries = {}
    dim = None
    for model_id, class_label, images in items:
        if len(images) != VIEW_COUNT:
            raise MissingViews(
                f"model {model_id!r} has {len(images)} views, expected {VIEW_COUNT}")
        vectors = np.stack([compute_descriptor(im, params) for im in images])
        if dim is None:
            dim = vectors.shape[1]
        elif vectors.shape[1] != dim:
            raise DimensionMismatch(
                f"descriptor length {vectors.shape[1]} for {model_id!r}, expected {dim}")
        entries[model_id] = (class_ids[class_label], vectors)
    if dim is None:
        raise EmptyIndex("no models to index")
    return FeatureBag(classes=classes, entries=entries, dim=dim, hog_params=params)


def build_index(manifest: DatasetManifest, params: HogParams | None = None) -> FeatureBag:
    """Index every non-failed manifest entry from its 20 view PNGs."""

    def iter_items():
        for e in manifest.ok_entries():
            if len(e.view_paths) != VIEW_COUNT:
                raise MissingViews(
                    f"model {e.model_id!r} has {len(e.view_paths)} views, "
                    f"expected {VIEW_COUNT}")
            images = []
            for rel in e.view_paths:
                p = manifest.resolve(rel)
                if not p.is_file():
                    raise MissingViews(f"model {e.model_id!r}: missing view {p}")
                images.append(load_png(p))
            yield e.model_id, e.class_label, images

    return build_index_from_views(iter_items(), params)


def save_index(bag: FeatureBag, path) -> None:
    """Persist in the feature-store format, records ordered by
    (model_id, view index) for byte determinism."""

    def records():
        for model_id in sorted(bag.entries):
            class_id, vectors = bag.entries[model_id]
            for view_index in range(vectors.shape[0]):
                yield model_id, class_id, view_index, vectors[view_index]

    write_feature_store(path, records(), bag.dim)


def load_index(path, classes=None, params: HogParams | None = None) -> FeatureBag:
    """Read a feature store. The binary format carries numeric class ids
    only; pass the class table (or the manifest the store was built from)
    to restore labels, otherwise ids print as bare numbers."""
    if isinstance(classes, DatasetManifest):
        classes = class_table(e.class_label for e in classes.ok_entries())
    dim, records = read_feature_store(path)
    grouped = {}
    class_ids = {}
    for model_id, class_id, view_index, vector in records:
        grouped.setdefault(model_id, {})[view_index] = vector
        class_ids[model_id] = class_id
    entries = {}
    for model_id, by_view in grouped.items():
        if len(by_view) != VIEW_COUNT:
            raise MissingViews(
                f"model {model_id!r} has {len(by_view)} vectors, expected {VIEW_COUNT}")
        vectors = np.stack([by_view[i] for i in range(VIEW_COUNT)])
        entries[model_id] = (class_ids[model_id], vectors)
    if classes is None:
        max_id = max(class_ids.values(), default=-1)
        classes = tuple(str(i) for i in range(max_id + 1))
    return FeatureBag(classes=tuple(classes), entries=entries, dim=dim,
                      hog_params=params)


def descriptor_mse(a: np.ndarray, b: np.ndarray) -> float:
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(d * d))


def query(sketch: GrayImage, bag: FeatureBag, k: int = DEFAULT_TOP_K,
          aggregate: str = AGGREGATE_MIN,
          descriptor: np.ndarray | None = None) -> RankedResult:
    """Rank indexed models against a query sketch.

    Scores are MSE distances between descriptors, aggregated per model
    over its views (minimum by default). k is clamped to the index size.
    Timing covers scoring and sorting only.
    """
    if not bag.entries:
        raise EmptyIndex("feature bag has no entries")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if descriptor is None:
        descriptor = compute_descriptor(sketch, bag.hog_params or HogParams())
    if descriptor.shape != (bag.dim,):
        raise DimensionMismatch(
            f"query descriptor length {descriptor.shape[0]} != index dim {bag.dim}")
    q = descriptor.astype(np.float64)

    started = time.perf_counter()
    scored = []
    for model_id in bag.entries:
        class_id, vectors = bag.entries[model_id]
        diff = vectors.astype(np.float64) - q
        per_view = np.mean(diff * diff, axis=1)
        score = float(per_view.min() if aggregate == AGGREGATE_MIN else per_view.mean())
        scored.append((score, model_id, class_id))
    scored.sort(key=lambda t: (t[0], t[1]))
    elapsed = time.perf_counter() - started

    top = scored[:min(k, len(scored))]
    items = tuple((model_id, bag.class_label(class_id), score)
                  for score, model_id, class_id in top)
    return RankedResult(items=items, query_time=elapsed)


def topk_accuracy(results, truths, k: int = DEFAULT_TOP_K) -> float:
    """Percentage of the top-k retrieved items sharing the query's class,
    averaged over queries."""
    if len(results) != len(truths):
        raise ValueError("results and truths must align")
    if not results:
        return 0.0
    scores = []
    for result, truth in zip(results, truths):
        considered = result.items[:k]
        if not considered:
            scores.append(0.0)
            continue
        hits = sum(1 for _, label, _ in considered if label == truth)
        scores.append(100.0 * hits / len(considered))
    return sum(scores) / len(scores)


def precision_recall(results, truths, k: int, bag: FeatureBag,
                     query_ids=None):
    """Averaged precision@k and recall@k.

    recall@k divides by the class size minus one when the query itself is
    an indexed model (its own entry is not a retrievable "other" match),
    by the full class size otherwise. The hit count includes a retrieved
    self-match, so recall is capped at 1 for the k >= class size regime.
    """
    if query_ids is None:
        query_ids = [None] * len(results)
    sizes = bag.class_sizes()
    precisions = []
    recalls = []
    for result, truth, query_id in zip(results, truths, query_ids):
        top = result.items[:k]
        hits = sum(1 for _, label, _ in top if label == truth)
        precisions.append(hits / k)
        size = sizes.get(truth, 0)
        if query_id is not None and query_id in bag.entries:
            size -= 1
        recalls.append(min(hits / size, 1.0) if size > 0 else (1.0 if hits else 0.0))
    n = len(results)
    return (sum(precisions) / n, sum(recalls) / n) if n else (0.0, 0.0)


def average_precision(ranking_relevance) -> float:
    """AP of one ranking given a relevance flag per rank: the mean of
    precision-at-r over the relevant ranks r."""
    hits = 0
    precisions = []
    for rank, relevant in enumerate(ranking_relevance, start=1):
        if relevant:
            hits += 1
            precisions.append(hits / rank)
    return sum(precisions) / len(precisions) if precisions else 0.0


def mean_average_precision(results, truths) -> float:
    """Mean over queries of the AP of the full ranking."""
    if not results:
        return 0.0
    aps = []
    for result, truth in zip(results, truths):
        aps.append(average_precision(label == truth for _, label, _ in result.items))
    return sum(aps) / len(aps)


def evaluate(bag: FeatureBag, queries, k: int = DEFAULT_TOP_K,
             aggregate: str = AGGREGATE_MIN) -> EvalReport:
    """Score a query set: per-truth-class and overall metrics.

    queries is a sequence of QueryRecord. Rankings are computed in full
    (k only caps the reported precision/accuracy cutoffs).
    """
    queries = list(queries)
    if not queries:
        raise ValueError("empty query set")
    full_k = len(bag.entries)
    runs = []
    for rec in queries:
        result = query(rec.image, bag, k=full_k, aggregate=aggregate)
        runs.append((rec, result))

    def summarize(pairs) -> ClassEval:
        results = [r for _, r in pairs]
        truths = [rec.truth_class for rec, _ in pairs]
        ids = [rec.query_id for rec, _ in pairs]
        precision, recall = precision_recall(results, truths, k, bag, ids)
        return ClassEval(
            model_count=0,
            precision=precision,
            recall=recall,
            map=mean_average_precision(results, truths),
            topk_accuracy=topk_accuracy(results, truths, k),
            mean_retrieval_time=sum(r.query_time for r in results) / len(results),
        )

    sizes = bag.class_sizes()
    per_class = {}
    for truth in sorted({rec.truth_class for rec, _ in runs}):
        pairs = [(rec, res) for rec, res in runs if rec.truth_class == truth]
        summary = summarize(pairs)
        per_class[truth] = ClassEval(
            model_count=sizes.get(truth, 0), precision=summary.precision,
            recall=summary.recall, map=summary.map,
            topk_accuracy=summary.topk_accuracy,
            mean_retrieval_time=summary.mean_retrieval_time)
    overall = summarize(runs)
    overall = ClassEval(
        model_count=len(bag.entries), precision=overall.precision,
        recall=overall.recall, map=overall.map,
        topk_accuracy=overall.topk_accuracy,
        mean_retrieval_time=overall.mean_retrieval_time)
    return EvalReport(per_class=per_class, overall=overall, k=k)


EVAL_CSV_HEADER = "Class,No.of Models,Precision,Recall,Retrieval Time,mAP,Top k-Accuracy"


def eval_csv(report: EvalReport) -> str:
    def row(name, ev: ClassEval) -> str:
        return (f"{name},{ev.model_count},{ev.precision:.4f},{ev.recall:.4f},"
                f"{ev.mean_retrieval_time:.3e},{ev.map:.4f},{ev.topk_accuracy:.2f}")

    lines = [EVAL_CSV_HEADER]
    for name in sorted(report.per_class):
        lines.append(row(name, report.per_class[name]))
    lines.append(row("Overall", report.overall))
    return "\n".join(lines) + "\n"
