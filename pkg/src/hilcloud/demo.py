"""Demonstration records, the ``.demo.jsonl`` format, outlier removal and segmentation."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, ParseError, ValidationError
from .trajectory import Trajectory, Waypoint, vec3

N_PRIMITIVES = 8
DONE = 9
SOURCES = ("recorded", "synthetic", "federated")
QUAT_NORM_TOLERANCE = 1e-3


def fmt(x: float) -> str:
    """Render a float with 17 significant digits (round-trip exact)."""
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError(f"cannot serialize non-finite value {x}")
    if x == 0.0:
        return "0"  # JSON reads "-0" back as the integer 0, so never write it
    return format(x, ".17g")


def fmt_list(values) -> str:
    return "[" + ",".join(fmt(v) for v in values) + "]"


@dataclass(frozen=True)
class TaskParameters:
    task_id: str
    tile_width: float
    tile_depth: float
    grid_anchor: tuple[float, float, float]

    def __post_init__(self) -> None:
        if not (self.tile_width > 0 and self.tile_depth > 0):
            raise ValidationError("tile dimensions must be positive")
        object.__setattr__(self, "tile_width", float(self.tile_width))
        object.__setattr__(self, "tile_depth", float(self.tile_depth))
        object.__setattr__(self, "grid_anchor", vec3(self.grid_anchor))

    def with_anchor(self, anchor, task_id: str | None = None) -> "TaskParameters":
        return TaskParameters(task_id or self.task_id, self.tile_width, self.tile_depth, anchor)


def validate_labels(labels: Sequence[int], n_waypoints: int) -> None:
    if len(labels) != n_waypoints:
        raise ValidationError(f"{len(labels)} labels for {n_waypoints} waypoints")
    prev = 0
    for i, lab in enumerate(labels):
        if not 1 <= lab <= N_PRIMITIVES:
            raise ValidationError(f"label {lab} at waypoint {i} outside 1..{N_PRIMITIVES}")
        if lab < prev:
            raise ValidationError(f"label regression {prev} -> {lab} at waypoint {i}")
        prev = lab
    missing = set(range(1, N_PRIMITIVES + 1)) - set(labels)
    if missing:
        raise ValidationError(f"primitives {sorted(missing)} have no waypoints")


@dataclass(frozen=True)
class Demonstration:
    params: TaskParameters
    trajectory: Trajectory
    labels: tuple[int, ...]
    demo_id: str
    source: str = "synthetic"

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))
        validate_labels(self.labels, len(self.trajectory))
        if self.source not in SOURCES:
            raise ValidationError(f"unknown source {self.source!r}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Demonstration):
            return NotImplemented
        return (self.params == other.params and self.trajectory == other.trajectory
                and self.labels == other.labels and self.demo_id == other.demo_id
                and self.source == other.source)

    __hash__ = None  # type: ignore[assignment]


# --- file format ------------------------------------------------------------

def write_demo(demo: Demonstration) -> bytes:
    pr = demo.params
    lines = [
        '{"kind":"demo","version":1,"demo_id":%s,"task_id":%s,"tile_w":%s,"tile_d":%s,'
        '"grid_anchor":%s,"source":%s}' % (
            json.dumps(demo.demo_id), json.dumps(pr.task_id), fmt(pr.tile_width),
            fmt(pr.tile_depth), fmt_list(pr.grid_anchor), json.dumps(demo.source))
    ]
    tr = demo.trajectory
    for i in range(len(tr)):
        lines.append('{"t":%s,"p":%s,"q":%s,"prim":%d}' % (
            fmt(tr.t[i]), fmt_list(tr.p[i]), fmt_list(tr.q[i]), demo.labels[i]))
    return ("\n".join(lines) + "\n").encode("utf-8")


def _num(obj: dict, key: str, line: int) -> float:
    if key not in obj:
        raise ParseError("missing field", line=line, field=key)
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"expected number, got {v!r}", line=line, field=key)
    return float(v)


def _nums(obj: dict, key: str, n: int, line: int) -> list[float]:
    if key not in obj:
        raise ParseError("missing field", line=line, field=key)
    v = obj[key]
    if (not isinstance(v, list) or len(v) != n
            or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v)):
        raise ParseError(f"expected {n} numbers, got {v!r}", line=line, field=key)
    out = [float(c) for c in v]
    if not all(math.isfinite(c) for c in out):
        raise ParseError("non-finite value", line=line, field=key)
    return out


def _str(obj: dict, key: str, line: int) -> str:
    if key not in obj:
        raise ParseError("missing field", line=line, field=key)
    if not isinstance(obj[key], str):
        raise ParseError(f"expected string, got {obj[key]!r}", line=line, field=key)
    return obj[key]


def parse_demo(data: bytes | str) -> Demonstration:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    rows = text.split("\n")
    if rows and rows[-1] == "":
        rows.pop()
    if not rows:
        raise ParseError("empty demonstration file", line=1)
    objs = []
    for n, row in enumerate(rows, start=1):
        try:
            obj = json.loads(row)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON: {exc.msg}", line=n) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", line=n)
        objs.append(obj)

    head = objs[0]
    if head.get("kind") != "demo":
        raise ParseError("header kind must be 'demo'", line=1, field="kind")
    if head.get("version") != 1:
        raise ParseError(f"unsupported version {head.get('version')!r}", line=1, field="version")
    try:
        params = TaskParameters(_str(head, "task_id", 1), _num(head, "tile_w", 1),
                                _num(head, "tile_d", 1), _nums(head, "grid_anchor", 3, 1))
    except ValidationError as exc:
        raise ParseError(str(exc), line=1) from None

    t, p, q, labels = [], [], [], []
    for n, obj in enumerate(objs[1:], start=2):
        tn = _num(obj, "t", n)
        if not math.isfinite(tn):
            raise ParseError("non-finite timestamp", line=n, field="t")
        if t and tn <= t[-1]:
            raise ParseError(f"timestamp {tn} does not increase", line=n, field="t")
        qn = _nums(obj, "q", 4, n)
        norm = math.sqrt(sum(c * c for c in qn))
        if abs(norm - 1.0) > QUAT_NORM_TOLERANCE:
            raise ParseError(f"quaternion norm {norm} off by more than {QUAT_NORM_TOLERANCE}",
                             line=n, field="q")
        if "prim" not in obj:
            raise ParseError("missing field", line=n, field="prim")
        lab = obj["prim"]
        if isinstance(lab, bool) or not isinstance(lab, int) or not 1 <= lab <= N_PRIMITIVES:
            raise ParseError(f"primitive label must be an integer in 1..8, got {lab!r}",
                             line=n, field="prim")
        if labels and lab < labels[-1]:
            raise ParseError(f"label regression {labels[-1]} -> {lab}", line=n, field="prim")
        t.append(tn)
        p.append(_nums(obj, "p", 3, n))
        q.append(qn)
        labels.append(lab)
    if not t:
        raise ParseError("no waypoints", line=2)
    try:
        return Demonstration(params, Trajectory(t, p, q), tuple(labels),
                             _str(head, "demo_id", 1), _str(head, "source", 1))
    except ValidationError as exc:
        raise ParseError(str(exc), line=1) from None


# --- cleaning and segmentation -----------------------------------------------

def remove_outliers(readings: Sequence[Waypoint]) -> list[Waypoint]:
    """Drop readings more than 3 MAD from the per-axis median.

    At most 20% of the readings are dropped; if more are flagged, the
    readings closest to the median point are kept instead.
    """
    return [readings[i] for i in outlier_mask(np.array([w.position for w in readings]))]


def outlier_mask(points: np.ndarray) -> np.ndarray:
    """Indices (ascending) of the points kept by the 3-MAD rule with a 20% cap."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n < 4:
        raise InvalidArgument(f"outlier removal needs >= 4 readings, got {n}")
    med = np.median(pts, axis=0)
    dev = np.abs(pts - med)
    mad = np.median(dev, axis=0)
    flagged = np.any(dev > 3.0 * mad, axis=1)
    max_drop = int(math.floor(0.2 * n))
    if flagged.sum() <= max_drop:
        return np.flatnonzero(~flagged)
    dist = np.linalg.norm(pts - med, axis=1)
    keep = np.sort(np.argsort(dist, kind="stable")[: n - max_drop])
    return keep


def segment_by_label(demo: Demonstration) -> list[Trajectory]:
    labels = np.asarray(demo.labels)
    segments = []
    for prim in range(1, N_PRIMITIVES + 1):
        idx = np.flatnonzero(labels == prim)
        if len(idx) == 0:
            raise ValidationError(f"primitive {prim} missing from {demo.demo_id}")
        segments.append(demo.trajectory.slice(int(idx[0]), int(idx[-1]) + 1))
    return segments


def label_runs(labels: Sequence[int]) -> list[int]:
    """Collapse consecutive duplicates: ``[1,1,2,2,3] -> [1,2,3]``."""
    out: list[int] = []
    for lab in labels:
        if not out or out[-1] != lab:
            out.append(int(lab))
    return out


# --- manifests --------------------------------------------------------------

def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class ManifestEntry:
    demo_id: str
    task_id: str
    grid_anchor: tuple[float, float, float]
    tile_w: float
    tile_d: float
    sha256: str


@dataclass(frozen=True)
class DatasetManifest:
    dataset_id: str
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)
    created_at: str = "1970-01-01T00:00:00Z"

    def __post_init__(self) -> None:
        entries = tuple(sorted(self.entries, key=lambda e: e.demo_id))
        ids = [e.demo_id for e in entries]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate demo_id in manifest")
        for e in entries:
            if len(e.sha256) != 64 or any(c not in "0123456789abcdef" for c in e.sha256):
                raise ValidationError(f"bad content hash for {e.demo_id}: {e.sha256!r}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def build(cls, dataset_id: str, demos: Sequence[Demonstration],
              created_at: str = "1970-01-01T00:00:00Z") -> "DatasetManifest":
        entries = [ManifestEntry(d.demo_id, d.params.task_id, d.params.grid_anchor,
                                 d.params.tile_width, d.params.tile_depth,
                                 content_hash(write_demo(d))) for d in demos]
        return cls(dataset_id, tuple(entries), created_at)

    def to_json(self) -> bytes:
        rows = []
        for e in self.entries:
            rows.append('{"demo_id":%s,"task_id":%s,"grid_anchor":%s,"tile_w":%s,"tile_d":%s,'
                        '"sha256":"%s"}' % (json.dumps(e.demo_id), json.dumps(e.task_id),
                                            fmt_list(e.grid_anchor), fmt(e.tile_w),
                                            fmt(e.tile_d), e.sha256))
        body = '{"kind":"manifest","dataset_id":%s,"created_at":%s,"entries":[%s]}\n' % (
            json.dumps(self.dataset_id), json.dumps(self.created_at), ",".join(rows))
        return body.encode("utf-8")

    @classmethod
    def from_json(cls, data: bytes | str) -> "DatasetManifest":
        try:
            obj = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, offset=exc.pos) from None
        try:
            entries = tuple(ManifestEntry(e["demo_id"], e["task_id"], tuple(e["grid_anchor"]),
                                          float(e["tile_w"]), float(e["tile_d"]), e["sha256"])
                            for e in obj["entries"])
            return cls(obj["dataset_id"], entries, obj["created_at"])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad manifest: {exc}") from None
