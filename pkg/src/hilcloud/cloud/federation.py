"""Key layout on the shared store, demo catalogs, and dual storage of learned artifacts."""

from __future__ import annotations

import csv
import io
from typing import Sequence

from ..demo import DatasetManifest, Demonstration, fmt, parse_demo, write_demo
from ..errors import ParseError, ValidationError
from ..models import load_bundle
from .store import DEFAULT_BUCKET, ObjectStore, StoreKey

KNOWLEDGE_COLUMNS = ("sequence_index", "primitive", "name", "mean_error", "segment_std_mean",
                     "condition_std_mean")


def demo_key(task_id: str, demo_id: str, bucket: str = DEFAULT_BUCKET) -> StoreKey:
    return StoreKey(bucket, f"demos/{task_id}/{demo_id}.demo.jsonl")


def manifest_key(dataset_id: str, bucket: str = DEFAULT_BUCKET) -> StoreKey:
    return StoreKey(bucket, f"manifests/{dataset_id}.manifest.json")


def model_key(task_id: str, bucket: str = DEFAULT_BUCKET) -> StoreKey:
    return StoreKey(bucket, f"models/{task_id}/bundle.json")


def knowledge_key(task_id: str, bucket: str = DEFAULT_BUCKET) -> StoreKey:
    return StoreKey(bucket, f"knowledge/{task_id}/summary.csv")


def push_demos(store: ObjectStore, demos: Sequence[Demonstration], dataset_id: str | None = None,
               bucket: str = DEFAULT_BUCKET) -> dict[str, str]:
    """Upload demos (and a manifest when ``dataset_id`` is given); returns key -> hash."""
    out = {}
    for d in demos:
        key = demo_key(d.params.task_id, d.demo_id, bucket)
        out[key.key] = store.put(key, write_demo(d))
    if dataset_id is not None:
        key = manifest_key(dataset_id, bucket)
        out[key.key] = store.put(key, DatasetManifest.build(dataset_id, demos).to_json())
    return out


def load_catalog(store: ObjectStore, bucket: str = DEFAULT_BUCKET) -> list[Demonstration]:
    """Every demonstration under ``demos/``, in key order."""
    demos = []
    for key in store.list(bucket, "demos/"):
        if key.endswith(".demo.jsonl"):
            demos.append(parse_demo(store.get(StoreKey(bucket, key))))
    return demos


def knowledge_csv(rows: Sequence[dict]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(KNOWLEDGE_COLUMNS)
    for r in rows:
        w.writerow([fmt(r[c]) if isinstance(r[c], float) else r[c] for c in KNOWLEDGE_COLUMNS])
    return buf.getvalue().encode("utf-8")


def dual_store(store: ObjectStore, task_id: str, bundle_bytes: bytes, rows: Sequence[dict],
               bucket: str = DEFAULT_BUCKET) -> tuple[str, str]:
    """Persist the model bundle and its CSV knowledge summary; returns both hashes."""
    try:
        load_bundle(bundle_bytes)
    except ParseError as exc:
        raise ValidationError(f"refusing to store a malformed bundle: {exc}") from None
    h_bundle = store.put(model_key(task_id, bucket), bundle_bytes)
    h_csv = store.put(knowledge_key(task_id, bucket), knowledge_csv(rows))
    return h_bundle, h_csv
