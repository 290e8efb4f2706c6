"""Frame calibration from paired pose readings.

Each reading pairs a pose seen in the demonstration frame with the same pose
measured in the world frame. Every pair yields a candidate transform
``M_world @ inv(M_demo)``; candidates are averaged (translations arithmetically,
rotations by sign-aligned quaternion mean) into a single calibration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .demo import fmt_list, outlier_mask
from .errors import InsufficientData, ParseError
from .rng import SplitMix64
from .trajectory import HomTransform, Waypoint, matrix_to_quat, quat_to_matrix


@dataclass(frozen=True)
class PairedReading:
    unity_pose: Waypoint
    world_pose: Waypoint


@dataclass(frozen=True)
class CalibrationResult:
    transform: HomTransform
    mean_error: float
    per_location_errors: tuple[float, ...]
    n_readings: int


def pose_to_matrix(w: Waypoint) -> HomTransform:
    return HomTransform.from_pose(w.position, w.orientation)


def _orthonormalize(r: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(r)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def estimate_transform(readings: Sequence[PairedReading],
                       locations: Sequence[int] | None = None) -> CalibrationResult:
    """Estimate the demonstration-to-world transform.

    ``locations`` optionally tags each reading with the rig location it was
    taken at; outliers are then removed per location and the per-location
    residuals are reported. Without tags all readings form one location.
    """
    readings = list(readings)
    if locations is None:
        locations = [0] * len(readings)
    locations = list(locations)
    if len(locations) != len(readings):
        raise ValueError("locations must tag every reading")

    kept: list[int] = []
    for loc in sorted(set(locations)):
        idx = [i for i, g in enumerate(locations) if g == loc]
        if len(idx) < 4:
            kept.extend(idx)
            continue
        u = np.array([readings[i].unity_pose.position for i in idx])
        w = np.array([readings[i].world_pose.position for i in idx])
        ku = set(outlier_mask(u).tolist())
        kw = set(outlier_mask(w).tolist())
        kept.extend(idx[j] for j in range(len(idx)) if j in ku and j in kw)
    kept.sort()
    if len(kept) < 3:
        raise InsufficientData(f"calibration needs >= 3 readings after outlier removal, got {len(kept)}")

    mu = np.array([pose_to_matrix(readings[i].unity_pose).m for i in kept])
    mw = np.array([pose_to_matrix(readings[i].world_pose).m for i in kept])
    # inverse of a rigid pose matrix
    mu_inv = np.zeros_like(mu)
    rt = np.transpose(mu[:, :3, :3], (0, 2, 1))
    mu_inv[:, :3, :3] = rt
    mu_inv[:, :3, 3] = -np.einsum("nij,nj->ni", rt, mu[:, :3, 3])
    mu_inv[:, 3, 3] = 1.0
    per = mw @ mu_inv

    translation = per[:, :3, 3].mean(axis=0)
    quats = np.array([matrix_to_quat(m[:3, :3]) for m in per])
    ref = quats[0]
    quats[np.sum(quats * ref, axis=1) < 0] *= -1.0
    q = quats.mean(axis=0)
    q /= np.linalg.norm(q)
    rotation = _orthonormalize(quat_to_matrix(q))
    m = np.eye(4)
    m[:3, :3] = rotation
    m[:3, 3] = translation
    transform = HomTransform(m)

    up = np.array([readings[i].unity_pose.position for i in kept])
    wp = np.array([readings[i].world_pose.position for i in kept])
    err = np.linalg.norm(transform.apply_points(up) - wp, axis=1)
    groups = [locations[i] for i in kept]
    per_loc = tuple(float(err[[g == loc for g in groups]].mean()) for loc in sorted(set(groups)))
    return CalibrationResult(transform, float(err.mean()), per_loc, len(kept))


def parse_pairs(data: bytes | str, with_locations: bool = False):
    """Read a ``.pairs.jsonl`` file: one ``{"u":{p,q},"w":{p,q}}`` object per line.

    An optional integer ``"loc"`` member tags the rig location; with
    ``with_locations`` the tags are returned too (None when no line has one).
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    out, locs = [], []
    for n, row in enumerate(text.splitlines(), start=1):
        if not row.strip():
            continue
        try:
            obj = json.loads(row)
            u, w = obj["u"], obj["w"]
            out.append(PairedReading(Waypoint(0.0, u["p"], u.get("q", (0, 0, 0, 1))),
                                     Waypoint(0.0, w["p"], w.get("q", (0, 0, 0, 1)))))
            loc = obj.get("loc")
            if loc is not None and (isinstance(loc, bool) or not isinstance(loc, int)):
                raise ValueError("loc must be an integer")
            locs.append(loc)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON: {exc.msg}", line=n) from None
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad pair record: {exc}", line=n) from None
    if not with_locations:
        return out
    if all(v is None for v in locs):
        return out, None
    if any(v is None for v in locs):
        raise ParseError("either every line or no line may carry a loc tag")
    return out, locs


def write_pairs(readings: Sequence[PairedReading], locations: Sequence[int] | None = None) -> bytes:
    rows = []
    for i, r in enumerate(readings):
        loc = "" if locations is None else ',"loc":%d' % int(locations[i])
        rows.append('{"u":{"p":%s,"q":%s},"w":{"p":%s,"q":%s}%s}' % (
            fmt_list(r.unity_pose.position), fmt_list(r.unity_pose.orientation),
            fmt_list(r.world_pose.position), fmt_list(r.world_pose.orientation), loc))
    return ("\n".join(rows) + "\n").encode("utf-8")


def synthetic_readings(transform: HomTransform, locations: Sequence[Sequence[float]], per_location: Sequence[int],
                       noise_rms: float = 0.0, seed: int = 0,
                       spread: float = 0.05) -> tuple[list[PairedReading], list[int]]:
    """Paired readings of a tracker held near each rig location.

    Demonstration-frame positions scatter ``spread`` around each location; the
    world-frame readings are the exact transform plus isotropic Gaussian noise
    whose 3-D RMS magnitude is ``noise_rms`` (per-axis sigma ``noise_rms/sqrt(3)``).
    """
    rng = SplitMix64(seed)
    readings, tags = [], []
    sigma = noise_rms / math.sqrt(3.0)
    q_world = tuple(matrix_to_quat(transform.rotation))   # demo-frame orientation is identity
    for loc, (centre, count) in enumerate(zip(locations, per_location)):
        u = np.asarray(centre, float) + spread * rng.normal((count, 3))
        w = transform.apply_points(u) + sigma * rng.normal((count, 3))
        for a, b in zip(u, w):
            readings.append(PairedReading(Waypoint(0.0, tuple(a)), Waypoint(0.0, tuple(b), q_world)))
            tags.append(loc)
    return readings, tags
