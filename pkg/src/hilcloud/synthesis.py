"""Open-loop trajectory synthesis from a trained bundle, plus waypoint CSV export."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .demo import DONE, TaskParameters, fmt
from .errors import InvalidArgument, ParseError, SynthesisFailure
from .models import SkillModelBundle, condition_vector, decode_segment, predict_next
from .trajectory import Trajectory, Waypoint, smooth_adaptive

SMOOTHING_THRESHOLD = 0.1
OUTPUT_DT = 0.05
CSV_HEADER = ("t", "x", "y", "z", "qx", "qy", "qz", "qw")


@dataclass(frozen=True)
class SynthesisRequest:
    params: TaskParameters
    start_pose: Waypoint
    max_steps: int = 10

    def __post_init__(self) -> None:
        if not isinstance(self.start_pose, Waypoint):
            object.__setattr__(self, "start_pose", Waypoint(0.0, tuple(self.start_pose)))
        if self.max_steps < 8:
            raise InvalidArgument("max_steps must be >= 8")


def chain_segments(segments: Sequence[Trajectory]) -> Trajectory:
    """Join segments end to start; each later segment is shifted onto the previous end.

    The shifted first waypoint of every later segment duplicates the junction
    and is dropped. Output timestamps run at a fixed step from the first
    segment's start time.
    """
    if not segments:
        raise InvalidArgument("chain_segments needs at least one segment")
    if len(segments) == 1:
        return segments[0]
    ps, qs = [segments[0].p], [segments[0].q]
    end = segments[0].p[-1]
    for seg in segments[1:]:
        p = seg.p + (end - seg.p[0])
        p[0] = end
        ps.append(p[1:])
        qs.append(seg.q[1:])
        end = p[-1]
    p = np.concatenate(ps)
    q = np.concatenate(qs)
    t = segments[0].t[0] + OUTPUT_DT * np.arange(len(p))
    return Trajectory(t, p, q, normalize=False)


def synthesize_trajectory(bundle: SkillModelBundle, req: SynthesisRequest) -> tuple[Trajectory, list[int]]:
    """Roll the sequence model, decode each primitive at z = 0, chain, smooth.

    Smoothing averages the last window, which would lift the tile off its
    seat, so the exact final decoded pose is re-appended when it differs.
    """
    history: list[int] = []
    segments: list[Trajectory] = []
    pos = np.asarray(req.start_pose.position, dtype=float)
    quat = np.asarray(req.start_pose.orientation, dtype=float)
    for _ in range(req.max_steps):
        label, _ = predict_next(bundle.sequential, history)
        history.append(label)
        if label == DONE:
            break
        seg = decode_segment(bundle.model_for(label), condition_vector(req.params, pos, quat))
        segments.append(seg)
        pos, quat = seg.p[-1], seg.q[-1]
    else:
        raise SynthesisFailure(f"no DONE within {req.max_steps} steps", history)
    if not segments:
        raise SynthesisFailure("sequence model emitted DONE before any primitive", history)

    chained = chain_segments(segments)
    smooth = smooth_adaptive(chained, SMOOTHING_THRESHOLD)
    p, q = smooth.p, smooth.q
    if not np.array_equal(p[-1], chained.p[-1]) or not np.array_equal(q[-1], chained.q[-1]):
        p = np.vstack([p, chained.p[-1]])
        q = np.vstack([q, chained.q[-1]])
    t = req.start_pose.t + OUTPUT_DT * np.arange(len(p))
    return Trajectory(t, p, q, normalize=False), history


def export_waypoints_csv(traj: Trajectory) -> bytes:
    lines = [",".join(CSV_HEADER)]
    for i in range(len(traj)):
        lines.append(",".join(fmt(v) for v in (traj.t[i], *traj.p[i], *traj.q[i])))
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_waypoints_csv(data: bytes | str) -> Trajectory:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ParseError(f"expected header {','.join(CSV_HEADER)}", line=1)
    values = []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_HEADER):
            raise ParseError(f"expected {len(CSV_HEADER)} columns, got {len(row)}", line=n)
        try:
            values.append([float(v) for v in row])
        except ValueError as exc:
            raise ParseError(str(exc), line=n) from None
    if not values:
        raise ParseError("no waypoints", line=2)
    arr = np.array(values)
    return Trajectory(arr[:, 0], arr[:, 1:4], arr[:, 4:8])
