"""Timestamped 7-DOF pose trajectories and the pure geometry on them.

Positions are meters, quaternions are ``(qx, qy, qz, qw)``. A :class:`Trajectory`
stores its samples as read-only float64 arrays; :class:`Waypoint` is the
per-sample value type used at API boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument, ValidationError

IDENTITY_QUAT = (0.0, 0.0, 0.0, 1.0)


def _finite_tuple(values: Iterable[float], n: int, what: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if len(out) != n:
        raise InvalidArgument(f"{what} needs {n} components, got {len(out)}")
    if not all(math.isfinite(v) for v in out):
        raise InvalidArgument(f"{what} has non-finite components: {out}")
    return out


def vec3(values: Iterable[float]) -> tuple[float, float, float]:
    return _finite_tuple(values, 3, "Vec3")  # type: ignore[return-value]


def normalize_quat(values: Iterable[float]) -> tuple[float, float, float, float]:
    q = _finite_tuple(values, 4, "Quat")
    n = math.sqrt(sum(c * c for c in q))
    if n == 0.0:
        raise InvalidArgument("zero quaternion cannot be normalized")
    if abs(n - 1.0) <= 1e-12:
        return q  # type: ignore[return-value]
    return tuple(c / n for c in q)  # type: ignore[return-value]


# --- quaternion algebra -----------------------------------------------------

def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product, broadcasting over leading axes."""
    ax, ay, az, aw = np.moveaxis(np.asarray(a, dtype=float), -1, 0)
    bx, by, bz, bw = np.moveaxis(np.asarray(b, dtype=float), -1, 0)
    return np.stack([
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    ], axis=-1)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrices for (..., 4) quaternions, assumed unit norm."""
    x, y, z, w = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], axis=-1),
        np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], axis=-1),
        np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], axis=-1),
    ], axis=-2)


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Unit quaternion with ``qw >= 0`` for a 3x3 rotation matrix (Shepperd)."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [(m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s, 0.25 * s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = [0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s, (m[2, 1] - m[1, 2]) / s]
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = [(m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s, (m[0, 2] - m[2, 0]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = [(m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s, (m[1, 0] - m[0, 1]) / s]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return -q if q[3] < 0 else q


def quat_from_axis_angle(axis: Sequence[float], angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    s = math.sin(angle / 2.0)
    return np.array([axis[0] * s, axis[1] * s, axis[2] * s, math.cos(angle / 2.0)])


def nlerp(q0: np.ndarray, q1: np.ndarray, f: np.ndarray | float) -> np.ndarray:
    """Normalized linear interpolation along the shorter arc."""
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    sign = np.where(np.sum(q0 * q1, axis=-1, keepdims=True) < 0, -1.0, 1.0)
    f = np.asarray(f, dtype=float)[..., None] if np.ndim(f) else f
    q = (1.0 - f) * q0 + f * sign * q1
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


# --- value types ------------------------------------------------------------

@dataclass(frozen=True)
class Waypoint:
    t: float
    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float] = IDENTITY_QUAT

    def __post_init__(self) -> None:
        t = float(self.t)
        if not math.isfinite(t):
            raise InvalidArgument(f"timestamp must be finite, got {self.t}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "position", vec3(self.position))
        object.__setattr__(self, "orientation", normalize_quat(self.orientation))


class Trajectory:
    """Ordered, strictly time-increasing list of waypoints (immutable)."""

    __slots__ = ("t", "p", "q")

    def __init__(self, t, p, q=None, *, normalize: bool = True):
        t = np.array(t, dtype=np.float64).reshape(-1)
        p = np.array(p, dtype=np.float64).reshape(-1, 3)
        if q is None:
            q = np.tile(np.array(IDENTITY_QUAT), (len(t), 1))
        q = np.array(q, dtype=np.float64).reshape(-1, 4)
        if len(t) < 1:
            raise ValidationError("trajectory needs at least one waypoint")
        if not (len(t) == len(p) == len(q)):
            raise ValidationError(f"length mismatch: t={len(t)} p={len(p)} q={len(q)}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise ValidationError("trajectory contains non-finite values")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            bad = int(np.argmin(np.diff(t) > 0)) + 1
            raise ValidationError(f"timestamps not strictly increasing at waypoint {bad}")
        if normalize:
            norms = np.linalg.norm(q, axis=1)
            if np.any(norms == 0):
                raise ValidationError("zero quaternion in trajectory")
            off = np.abs(norms - 1.0) > 1e-12
            if np.any(off):
                q[off] /= norms[off, None]
        for a in (t, p, q):
            a.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    def __setattr__(self, name, value):
        raise AttributeError("Trajectory is immutable")

    @classmethod
    def from_waypoints(cls, waypoints: Sequence[Waypoint]) -> "Trajectory":
        if not waypoints:
            raise ValidationError("trajectory needs at least one waypoint")
        return cls([w.t for w in waypoints], [w.position for w in waypoints],
                   [w.orientation for w in waypoints], normalize=False)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Waypoint:
        return Waypoint(self.t[i], tuple(self.p[i]), tuple(self.q[i]))

    @property
    def waypoints(self) -> list[Waypoint]:
        return [self[i] for i in range(len(self))]

    def slice(self, start: int, stop: int) -> "Trajectory":
        return Trajectory(self.t[start:stop], self.p[start:stop], self.q[start:stop], normalize=False)

    def path_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.p, axis=0), axis=1)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (np.array_equal(self.t, other.t) and np.array_equal(self.p, other.p)
                and np.array_equal(self.q, other.q))

    def __repr__(self) -> str:
        return f"Trajectory(n={len(self)}, t=[{self.t[0]:.3f}..{self.t[-1]:.3f}])"


class HomTransform:
    """4x4 homogeneous transform with a fixed ``(0, 0, 0, 1)`` bottom row."""

    __slots__ = ("m",)

    def __init__(self, m):
        m = np.array(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise InvalidArgument(f"transform must be 4x4, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidArgument("transform has non-finite entries")
        if not np.array_equal(m[3], [0.0, 0.0, 0.0, 1.0]):
            raise InvalidArgument(f"bottom row must be (0,0,0,1), got {m[3]}")
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    def __setattr__(self, name, value):
        raise AttributeError("HomTransform is immutable")

    @classmethod
    def identity(cls) -> "HomTransform":
        return cls(np.eye(4))

    @classmethod
    def rigid(cls, rotation, translation) -> "HomTransform":
        r = np.asarray(rotation, dtype=float)
        if np.max(np.abs(r @ r.T - np.eye(3))) > 1e-6 or np.linalg.det(r) < 0:
            raise InvalidArgument("rotation block is not a proper orthonormal matrix")
        m = np.eye(4)
        m[:3, :3] = r
        m[:3, 3] = np.asarray(translation, dtype=float)
        return cls(m)

    @classmethod
    def from_pose(cls, position, orientation) -> "HomTransform":
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(np.asarray(orientation, dtype=float))
        m[:3, 3] = np.asarray(position, dtype=float)
        return cls(m)

    @property
    def rotation(self) -> np.ndarray:
        return self.m[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.m[:3, 3]

    def inverse(self) -> "HomTransform":
        r = self.rotation
        m = np.eye(4)
        m[:3, :3] = r.T
        m[:3, 3] = -r.T @ self.translation
        return HomTransform(m)

    def __matmul__(self, other: "HomTransform") -> "HomTransform":
        out = self.m @ other.m
        out[3] = (0.0, 0.0, 0.0, 1.0)
        return HomTransform(out)

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if np.array_equal(self.rotation, np.eye(3)):
            return pts + self.translation
        return pts @ self.rotation.T + self.translation

    def __repr__(self) -> str:
        return f"HomTransform({self.m.tolist()})"


# --- operations -------------------------------------------------------------

def translation_between(old_anchor, new_anchor) -> HomTransform:
    """Rigid shift that carries ``old_anchor`` onto ``new_anchor``."""
    old = np.array(vec3(old_anchor))
    new = np.array(vec3(new_anchor))
    m = np.eye(4)
    m[:3, 3] = new - old
    return HomTransform(m)


def apply_transform(T: HomTransform, traj: Trajectory) -> Trajectory:
    p = T.apply_points(traj.p)
    if np.array_equal(T.rotation, np.eye(3)):
        q = traj.q
    else:
        q = quat_multiply(matrix_to_quat(T.rotation), traj.q)
    return Trajectory(traj.t, p, q)


def resample_uniform(traj: Trajectory, k: int) -> Trajectory:
    """Resample to ``k`` waypoints evenly spaced in arc length.

    A path with zero total length but several samples is parameterized by
    sample index instead, so rotations in place are still resampled.
    """
    if k < 2:
        raise InvalidArgument(f"k must be >= 2, got {k}")
    n = len(traj)
    if n == 1:
        t0 = traj.t[0]
        # replicated pose; timestamps must still increase
        t = t0 + np.arange(k) * 1e-6
        return Trajectory(t, np.repeat(traj.p, k, axis=0), np.repeat(traj.q, k, axis=0), normalize=False)
    steps = np.linalg.norm(np.diff(traj.p, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(steps)])
    if s[-1] == 0.0:
        s = np.arange(n, dtype=float)
        steps = np.ones(n - 1)
    targets = np.linspace(0.0, s[-1], k)
    idx = np.clip(np.searchsorted(s, targets, side="right") - 1, 0, n - 2)
    # skip zero-length pieces so the fraction is well defined
    idx = _advance_past_zero(idx, steps, targets, s)
    f = (targets - s[idx]) / steps[idx]
    f = np.clip(f, 0.0, 1.0)
    p = traj.p[idx] + f[:, None] * (traj.p[idx + 1] - traj.p[idx])
    t = traj.t[idx] + f * (traj.t[idx + 1] - traj.t[idx])
    q = nlerp(traj.q[idx], traj.q[idx + 1], f)
    p[0], p[-1] = traj.p[0], traj.p[-1]
    q[0], q[-1] = traj.q[0], traj.q[-1]
    t[0], t[-1] = traj.t[0], traj.t[-1]
    return Trajectory(t, p, q, normalize=False)


def _advance_past_zero(idx, steps, targets, s):
    idx = idx.copy()
    for j in range(len(idx)):
        i = idx[j]
        while steps[i] == 0.0 and i < len(steps) - 1 and s[i + 1] <= targets[j]:
            i += 1
        while steps[i] == 0.0 and i > 0:
            i -= 1
        idx[j] = i
    return idx


def smooth_adaptive(traj: Trajectory, threshold: float = 0.1) -> Trajectory:
    """Collapse runs of nearby waypoints into their running average.

    A waypoint joins the current window while it lies within ``threshold``
    meters of the window's running mean position. Each closed window emits
    one waypoint: mean position, orientation and timestamp of its first
    member.
    """
    if not threshold > 0:
        raise InvalidArgument(f"threshold must be > 0, got {threshold}")
    out_t, out_p, out_q = [], [], []
    start = 0
    total = traj.p[0].copy()
    count = 1
    for i in range(1, len(traj)):
        mean = total / count
        if np.linalg.norm(traj.p[i] - mean) <= threshold:
            total = total + traj.p[i]
            count += 1
            continue
        out_t.append(traj.t[start])
        out_p.append(traj.p[start] if count == 1 else mean)
        out_q.append(traj.q[start])
        start, total, count = i, traj.p[i].copy(), 1
    out_t.append(traj.t[start])
    out_p.append(traj.p[start] if count == 1 else total / count)
    out_q.append(traj.q[start])
    return Trajectory(out_t, out_p, out_q, normalize=False)


def trajectory_error(generated: Trajectory, reference: Trajectory) -> float:
    """Mean index-aligned positional distance after resampling both paths."""
    if generated is None or reference is None or len(generated) == 0 or len(reference) == 0:
        raise InvalidArgument("trajectory_error needs two non-empty trajectories")
    k = max(len(generated), len(reference), 2)
    a = resample_uniform(generated, k).p
    b = resample_uniform(reference, k).p
    return float(np.mean(np.linalg.norm(a - b, axis=1)))
