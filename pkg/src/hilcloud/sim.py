"""Kinematic ceiling-grid world.

The grid is an unbounded lattice of T-bar beams at height ``grid_height``.
Each cell has a square-ish opening; beam bands of ``flange_width`` separate
openings, so the lattice pitch is ``opening + flange``. Tiles are slightly
larger than the opening and rest on the flanges around their cell.

A tile can only pass the opening when it is yawed 45 degrees and tilted
steeply about one of its edges: a rigid square never fits through a smaller
square by tilting about a single horizontal axis alone, because its extent
along that axis is unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .demo import Demonstration, TaskParameters
from .errors import InfeasibleTask, InvalidArgument, ParseError, SynthesisFailure, ValidationError
from .rng import SplitMix64
from .trajectory import Trajectory, Waypoint, nlerp, quat_from_axis_angle, quat_multiply, quat_to_matrix

if TYPE_CHECKING:
    from .models import SkillModelBundle

TILE_THICKNESS = 0.015
FLANGE_WIDTH = 0.024
FLANGE_OVERLAP = 0.0098       # tile overhang onto the flange on each side
BEAM_DEPTH = 0.04
SEAT_CONTACT_TOLERANCE = 0.005  # tile resting on the flange top is contact, not collision
PASS_YAW = math.radians(45.0)
PASS_TILT = math.radians(85.0)
PICKUP_POSITION = (3.2, 1.2, 1.2)
START_JITTER = 0.005          # trial start perturbation
DEMO_START_SPREAD = 0.02      # where the demonstrator happens to pick the tile up
VIA_SPREAD = 0.01             # demonstrators never level the tile at quite the same spot
PHASE_POINTS = 20
DT = 0.05
CLEARANCE = 0.2
FINAL_TILT_LIMIT_DEG = 2.0
SWEEP_STEP = 0.01             # max travel of any tile sample point between swept poses

PHASE_NAMES = ("approach-pick", "lift", "tilt", "raise-through-opening", "level-above-grid",
               "translate-over-seat", "lower-onto-seat", "release-retreat")


@dataclass(frozen=True)
class TileBody:
    width: float
    depth: float
    thickness: float = TILE_THICKNESS

    def __post_init__(self) -> None:
        if min(self.width, self.depth, self.thickness) <= 0:
            raise ValidationError("tile dimensions must be positive")

    def sample_points(self) -> np.ndarray:
        """Corners, edge midpoints and center of the top and bottom faces (tile frame)."""
        hw, hd, ht = self.width / 2, self.depth / 2, self.thickness / 2
        xy = [(sx * hw, sy * hd) for sx in (-1, 0, 1) for sy in (-1, 0, 1)]
        return np.array([(x, y, z) for z in (-ht, ht) for x, y in xy])


@dataclass(frozen=True)
class GridWorld:
    grid_height: float
    cell_anchor: tuple[float, float, float]
    cell_opening: tuple[float, float]
    flange_width: float = FLANGE_WIDTH
    collider_inflation: float = 0.01

    def __post_init__(self) -> None:
        if min(self.cell_opening) <= 0:
            raise ValidationError("cell opening must be positive")
        if self.collider_inflation < 0:
            raise ValidationError("collider inflation must be >= 0")
        object.__setattr__(self, "cell_anchor", tuple(float(v) for v in self.cell_anchor))
        object.__setattr__(self, "cell_opening", tuple(float(v) for v in self.cell_opening))

    @classmethod
    def for_task(cls, params: TaskParameters, collider_inflation: float = 0.01) -> "GridWorld":
        """Grid sized for the task's tile, with the grid plane at the anchor height."""
        anchor = params.grid_anchor
        return cls(anchor[2], anchor, (params.tile_width - 2 * FLANGE_OVERLAP,
                                       params.tile_depth - 2 * FLANGE_OVERLAP),
                   FLANGE_WIDTH, collider_inflation)

    @property
    def opening_center(self) -> np.ndarray:
        ax, ay, _ = self.cell_anchor
        return np.array([ax + self.cell_opening[0] / 2, ay + self.cell_opening[1] / 2, self.grid_height])

    def seat_position(self, tile: TileBody) -> np.ndarray:
        c = self.opening_center
        return np.array([c[0], c[1], self.grid_height + tile.thickness / 2])

    def to_json(self, tile: TileBody | None = None) -> str:
        obj = {"grid_height": self.grid_height, "cell_anchor": list(self.cell_anchor),
               "cell_opening": list(self.cell_opening), "flange_width": self.flange_width,
               "collider_inflation": self.collider_inflation}
        if tile is not None:
            obj["tile"] = [tile.width, tile.depth, tile.thickness]
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str | bytes) -> tuple["GridWorld", TileBody | None]:
        try:
            obj = json.loads(text)
            world = cls(float(obj["grid_height"]), tuple(obj["cell_anchor"]),
                        tuple(obj["cell_opening"]), float(obj["flange_width"]),
                        float(obj.get("collider_inflation", 0.01)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad world config: {exc}") from None
        tile = TileBody(*obj["tile"]) if "tile" in obj else None
        return world, tile


def check_tile_fits(tile: TileBody, world: GridWorld) -> None:
    if not (tile.width > world.cell_opening[0] and tile.depth > world.cell_opening[1]):
        raise ValidationError("tile must be larger than the grid opening in both directions")


# --- collision ----------------------------------------------------------------

def _in_beam_band(coord: np.ndarray, origin: float, pitch: float, flange: float, inflation: float):
    r = np.mod(coord - origin, pitch)
    return (r > pitch - flange - inflation) | (r < inflation)


def points_in_beams(points: np.ndarray, world: GridWorld) -> np.ndarray:
    """Boolean mask of world-frame points lying inside an inflated beam box."""
    pts = np.asarray(points, dtype=float)
    infl = world.collider_inflation
    gh = world.grid_height
    in_z = (pts[..., 2] > gh - BEAM_DEPTH - infl) & (pts[..., 2] < gh - SEAT_CONTACT_TOLERANCE)
    ax, ay, _ = world.cell_anchor
    px = world.cell_opening[0] + world.flange_width
    py = world.cell_opening[1] + world.flange_width
    in_x = _in_beam_band(pts[..., 0], ax, px, world.flange_width, infl)
    in_y = _in_beam_band(pts[..., 1], ay, py, world.flange_width, infl)
    return in_z & (in_x | in_y)


def collisions(positions: np.ndarray, orientations: np.ndarray, tile: TileBody,
               world: GridWorld) -> np.ndarray:
    """Per-pose collision flags for arrays of tile poses."""
    local = tile.sample_points()
    rot = quat_to_matrix(np.asarray(orientations, dtype=float).reshape(-1, 4))
    pts = np.einsum("nij,kj->nki", rot, local) + np.asarray(positions, float).reshape(-1, 1, 3)
    return np.any(points_in_beams(pts, world), axis=1)


def check_collision(tile_pose, tile: TileBody, world: GridWorld) -> bool:
    return bool(collisions(np.array([tile_pose.position]), np.array([tile_pose.orientation]),
                           tile, world)[0])


# --- trials -------------------------------------------------------------------

@dataclass(frozen=True)
class TrialResult:
    success: bool
    failure_reason: str
    final_offset: float
    collision_step: int | None = None

    def __post_init__(self) -> None:
        if self.failure_reason not in ("none", "collision", "seat_miss", "no_plan"):
            raise ValidationError(f"unknown failure reason {self.failure_reason!r}")
        if self.success != (self.failure_reason == "none"):
            raise ValidationError("success must coincide with failure_reason == 'none'")


def tilt_degrees(q) -> float:
    r = quat_to_matrix(np.asarray(q, dtype=float))
    return math.degrees(math.acos(max(-1.0, min(1.0, r[2, 2]))))


def _sweep(p: np.ndarray, q: np.ndarray, tile: TileBody, step: float = SWEEP_STEP):
    """Poses along the straight-line motion between consecutive waypoints.

    Each pair is cut into an even number of pieces (so its midpoint is always
    included) such that no tile sample point moves more than ``step`` per piece.
    Returns positions, orientations and the index of the pair each pose lies
    on; waypoint ``i`` itself is reported as pair ``i`` (the last as ``n - 1``).
    """
    n = len(p)
    if n == 1:
        return p, q, np.zeros(1, dtype=int)
    reach = float(np.max(np.linalg.norm(tile.sample_points(), axis=1)))
    dots = np.abs(np.sum(q[:-1] * q[1:], axis=1))
    angle = 2.0 * np.arccos(np.clip(dots, 0.0, 1.0))
    travel = np.linalg.norm(np.diff(p, axis=0), axis=1) + reach * angle
    pieces = 2 * np.maximum(1, np.ceil(travel / (2.0 * step)).astype(int))
    ps, qs, idx = [], [], []
    for i in range(n - 1):
        f = np.arange(pieces[i]) / pieces[i]
        ps.append(p[i] + f[:, None] * (p[i + 1] - p[i]))
        qs.append(nlerp(q[i], q[i + 1], f))
        qs[-1][0] = q[i]
        idx.append(np.full(pieces[i], i))
    ps.append(p[-1:])
    qs.append(q[-1:])
    idx.append(np.array([n - 1]))
    return np.concatenate(ps), np.concatenate(qs), np.concatenate(idx)


def run_trial(traj: Trajectory, tile: TileBody, world: GridWorld,
              seat_tolerance: float = 0.005) -> TrialResult:
    """Sweep a tile trajectory through the grid and grade the final placement."""
    p, q, pair = _sweep(traj.p, traj.q, tile)
    offset = float(np.linalg.norm(traj.p[-1] - world.seat_position(tile)))
    hits = np.flatnonzero(collisions(p, q, tile, world))
    if len(hits):
        return TrialResult(False, "collision", offset, int(pair[hits[0]]))
    if offset <= seat_tolerance and tilt_degrees(traj.q[-1]) <= FINAL_TILT_LIMIT_DEG:
        return TrialResult(True, "none", offset)
    return TrialResult(False, "seat_miss", offset)


# --- scripted expert ------------------------------------------------------------

def pass_orientation(fraction: float = 1.0) -> np.ndarray:
    """Yawed-and-tilted pass-through orientation, partially applied by ``fraction``."""
    yaw = quat_from_axis_angle((0, 0, 1), PASS_YAW * fraction)
    tilt = quat_from_axis_angle((1, 0, 0), PASS_TILT * fraction)
    return quat_multiply(yaw, tilt)


def _half_height(tile: TileBody) -> float:
    return 0.5 * tile.depth * math.sin(PASS_TILT) + 0.5 * tile.thickness * math.cos(PASS_TILT)


def default_start(seed: int, jitter: float = START_JITTER) -> np.ndarray:
    rng = SplitMix64(seed ^ 0x5DEECE66D)
    return np.asarray(PICKUP_POSITION) + jitter * rng.normal(3)


def via_offset(seed: int, spread: float = VIA_SPREAD) -> np.ndarray:
    """Horizontal offset of the level-above-grid keyframe for demo ``seed``."""
    rng = SplitMix64(seed ^ 0x2545F4914F6CDD1D)
    return np.array([*(spread * rng.normal(2)), 0.0])


def expert_keyframes(start: np.ndarray, tile: TileBody, world: GridWorld,
                     via: Sequence[float] = (0.0, 0.0, 0.0)) -> list[tuple[np.ndarray, float]]:
    """Phase end points as (position, pass fraction) pairs, starting with the pickup pose.

    ``via`` moves the level-above-grid keyframe, so the translate-over-seat
    phase starts from a slightly different spot in each demonstration.
    """
    c = world.opening_center
    gh = world.grid_height
    half = _half_height(tile)
    z_low = gh - BEAM_DEPTH - world.collider_inflation - half - CLEARANCE
    z_high = gh + half + CLEARANCE
    seat = world.seat_position(tile)
    return [
        (np.asarray(start, float), 0.0),
        (np.array([c[0], c[1], z_low - 0.15]), 0.0),   # 1 approach-pick
        (np.array([c[0], c[1], z_low]), 0.0),          # 2 lift
        (np.array([c[0], c[1], z_low + 0.05]), 1.0),   # 3 tilt
        (np.array([c[0], c[1], z_high]), 1.0),         # 4 raise through the opening
        (np.array([c[0] + 0.05, c[1] + 0.05, z_high + 0.03]) + via, 0.0),  # 5 level above grid
        (seat + np.array([0.0, 0.0, 0.08]), 0.0),      # 6 translate over seat
        (seat + np.array([0.0, 0.0, 0.01]), 0.0),      # 7 lower onto seat
        (seat.copy(), 0.0),                            # 8 settle and release
    ]


def _check_passage(tile: TileBody, world: GridWorld) -> None:
    c = world.opening_center
    half = _half_height(tile)
    zs = np.linspace(world.grid_height - half - BEAM_DEPTH, world.grid_height + half, 25)
    p = np.column_stack([np.full_like(zs, c[0]), np.full_like(zs, c[1]), zs])
    q = np.tile(pass_orientation(1.0), (len(zs), 1))
    if np.any(collisions(p, q, tile, world)):
        raise InfeasibleTask(f"a {tile.width}x{tile.depth} m tile cannot pass a "
                             f"{world.cell_opening[0]}x{world.cell_opening[1]} m opening")


def scripted_expert(params: TaskParameters, world: GridWorld | None = None, noise_sigma: float = 0.0,
                    seed: int = 0, start_position: Sequence[float] | None = None,
                    demo_id: str | None = None) -> Demonstration:
    """Deterministic labeled 8-phase installation demonstration.

    Consecutive phases share their junction pose (the second copy is a short
    dwell), so the segments chain back into the demonstration exactly. Jitter
    is applied per unique pose, never to the start or the final seat pose,
    and is redrawn (then zeroed) wherever it would cause a collision.
    """
    world = world or GridWorld.for_task(params)
    tile = TileBody(params.tile_width, params.tile_depth)
    check_tile_fits(tile, world)
    _check_passage(tile, world)
    start = default_start(seed, DEMO_START_SPREAD) if start_position is None else np.asarray(start_position, float)

    keys = expert_keyframes(start, tile, world, via_offset(seed))
    ps, fs, labels = [], [], []
    for phase in range(1, 9):
        (p0, f0), (p1, f1) = keys[phase - 1], keys[phase]
        s = np.linspace(0.0, 1.0, PHASE_POINTS + 1)
        ps.append(p0 + s[:, None] * (p1 - p0))
        fs.append(f0 + s * (f1 - f0))
        labels.extend([phase] * (PHASE_POINTS + 1))
    p = np.concatenate(ps)
    frac = np.concatenate(fs)
    q = np.array([pass_orientation(f) for f in frac])
    n = len(p)

    # unique pose id: the first waypoint of each later phase repeats the previous one
    uid = np.arange(n)
    for phase in range(1, 8):
        j = phase * (PHASE_POINTS + 1)
        uid[j] = uid[j - 1]
    if noise_sigma > 0:
        rng = SplitMix64(seed)
        free = np.ones(n, dtype=bool)
        free[uid == 0] = False
        free[uid == uid[-1]] = False
        jitter = noise_sigma * rng.normal((n, 3))[uid]
        jitter[~free] = 0.0
        for _ in range(10):
            bad = _colliding_waypoints(p + jitter, q, tile, world)
            if not bad.any():
                break
            redraw = noise_sigma * rng.normal((n, 3))[uid]
            mask = np.isin(uid, uid[bad]) & free
            jitter[mask] = redraw[mask]
        bad = _colliding_waypoints(p + jitter, q, tile, world)
        if bad.any():
            jitter[np.isin(uid, uid[bad])] = 0.0
        p = p + jitter
    t = np.arange(n) * DT
    return Demonstration(params, Trajectory(t, p, q), tuple(labels),
                         demo_id or f"{params.task_id}-s{seed}", "synthetic")


def _colliding_waypoints(p: np.ndarray, q: np.ndarray, tile: TileBody, world: GridWorld) -> np.ndarray:
    """Waypoints that collide themselves or on the way to or from a neighbour."""
    sp, sq, pair = _sweep(p, q, tile)
    out = np.zeros(len(p), dtype=bool)
    hit_pairs = np.unique(pair[collisions(sp, sq, tile, world)])
    out[hit_pairs] = True
    out[np.minimum(hit_pairs + 1, len(p) - 1)] = True
    return out


# --- batch evaluation ------------------------------------------------------------

@dataclass
class EvalReport:
    scenario: str
    trials: int
    success_rate: float
    failures: dict[str, int] = field(default_factory=dict)
    mean_final_offset: float = 0.0
    results: list[TrialResult] = field(default_factory=list)

    @property
    def dominant_failure(self) -> str | None:
        counts = {k: v for k, v in self.failures.items() if v > 0}
        return max(sorted(counts), key=counts.get) if counts else None

    def to_json(self) -> str:
        return json.dumps({
            "scenario": self.scenario, "trials": self.trials,
            "success_rate": self.success_rate, "failures": self.failures,
            "mean_final_offset": self.mean_final_offset,
            "results": [{"success": r.success, "failure_reason": r.failure_reason,
                         "final_offset": r.final_offset, "collision_step": r.collision_step}
                        for r in self.results],
        }, indent=2, sort_keys=False)


def batch_success_rate(bundle: "SkillModelBundle", scenario: TaskParameters, world: GridWorld | None = None,
                       trials: int = 20, seed: int = 0, label: str | None = None) -> EvalReport:
    """Run seeded synthesis-plus-execution trials from jittered pickup poses."""
    from .synthesis import SynthesisRequest, synthesize_trajectory

    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    world = world or GridWorld.for_task(scenario)
    tile = TileBody(scenario.tile_width, scenario.tile_depth)
    results = []
    for k in range(trials):
        start = default_start(seed * 1_000_003 + k)
        req = SynthesisRequest(scenario, Waypoint(0.0, tuple(start), pickup_orientation()))
        try:
            traj, _ = synthesize_trajectory(bundle, req)
        except SynthesisFailure:
            results.append(TrialResult(False, "no_plan", float("nan")))
            continue
        results.append(run_trial(traj, tile, world))
    failures = {"collision": 0, "seat_miss": 0, "no_plan": 0}
    for r in results:
        if not r.success:
            failures[r.failure_reason] += 1
    offsets = [r.final_offset for r in results if math.isfinite(r.final_offset)]
    successes = sum(r.success for r in results)
    return EvalReport(label or scenario.task_id, trials, successes / trials, failures,
                      float(np.mean(offsets)) if offsets else float("nan"), results)


def pickup_orientation() -> tuple[float, float, float, float]:
    return (0.0, 0.0, 0.0, 1.0)
