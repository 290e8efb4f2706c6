"""Task-similarity retrieval and anchor-shift pooling of federated demonstrations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..demo import Demonstration, TaskParameters
from ..errors import InvalidArgument
from ..trajectory import HomTransform, apply_transform, translation_between

DEFAULT_MIN_COUNT = 5
DEFAULT_RADIUS = 1.0


@dataclass(frozen=True)
class Provenance:
    demo_id: str
    original_anchor: tuple[float, float, float]
    transform: HomTransform


@dataclass(frozen=True)
class PooledDataset:
    target: TaskParameters
    demos: tuple[Demonstration, ...]
    provenance: tuple[Provenance, ...] = field(default_factory=tuple)
    dataset_id: str = "pool"

    def __len__(self) -> int:
        return len(self.demos)


@dataclass(frozen=True)
class Insufficiency:
    needed: int
    found: int

    def __str__(self) -> str:
        return f"insufficient: {self.found}/{self.needed}"


def _header(entry) -> tuple[str, TaskParameters]:
    if isinstance(entry, Demonstration):
        return entry.demo_id, entry.params
    demo_id, params = entry
    return demo_id, params


def find_related(catalog: Iterable, target: TaskParameters, radius: float = DEFAULT_RADIUS) -> list[str]:
    """Ids of demos with the same tile size or an anchor within ``radius`` of the target.

    ``catalog`` holds demonstrations or ``(demo_id, TaskParameters)`` headers.
    """
    if not radius > 0:
        raise InvalidArgument("radius must be > 0")
    tgt = np.array(target.grid_anchor)
    hits = set()
    for entry in catalog:
        demo_id, params = _header(entry)
        same_dims = params.tile_width == target.tile_width and params.tile_depth == target.tile_depth
        near = float(np.linalg.norm(np.array(params.grid_anchor) - tgt)) <= radius
        if same_dims or near:
            hits.add(demo_id)
    return sorted(hits)


def shift_to_target(demo: Demonstration, target: TaskParameters) -> tuple[Demonstration, Provenance]:
    T = translation_between(demo.params.grid_anchor, target.grid_anchor)
    params = TaskParameters(demo.params.task_id, demo.params.tile_width, demo.params.tile_depth,
                            target.grid_anchor)
    moved = Demonstration(params, apply_transform(T, demo.trajectory), demo.labels, demo.demo_id,
                          demo.source)
    return moved, Provenance(demo.demo_id, demo.params.grid_anchor, T)


def pool_for_task(target: TaskParameters, local: Sequence[Demonstration], related: Sequence[Demonstration],
                  min_count: int = DEFAULT_MIN_COUNT,
                  dataset_id: str | None = None) -> PooledDataset | Insufficiency:
    """Shift every demo onto the target anchor; local demos come first."""
    if min_count < 1:
        raise InvalidArgument("min_count must be >= 1")
    found = len(local) + len(related)
    if found < min_count:
        return Insufficiency(min_count, found)
    demos, prov = [], []
    for d in list(local) + list(related):
        moved, p = shift_to_target(d, target)
        demos.append(moved)
        prov.append(p)
    return PooledDataset(target, tuple(demos), tuple(prov), dataset_id or f"pool-{target.task_id}")
