import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hilcloud.calibration import (PairedReading, estimate_transform, parse_pairs, pose_to_matrix,
                                  synthetic_readings, write_pairs)
from hilcloud.errors import InsufficientData, ParseError
from hilcloud.trajectory import HomTransform, Waypoint, matrix_to_quat, quat_from_axis_angle, quat_to_matrix

RIG = [(0.0, 0.0, 1.0), (1.0, 0.5, 1.2), (2.0, -0.5, 0.8), (0.5, 1.5, 1.0), (1.5, 1.0, 1.4)]


def rigid(seed):
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    q = quat_from_axis_angle(axis / np.linalg.norm(axis), rng.uniform(-math.pi, math.pi))
    return HomTransform.rigid(quat_to_matrix(q), rng.uniform(-2, 2, size=3))


def quat_matrix_oracle(q):
    """Textbook unit-quaternion rotation matrix, written out term by term."""
    x, y, z, w = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def test_identity_pose_matrix():
    assert np.array_equal(pose_to_matrix(Waypoint(0.0, (0, 0, 0))).m, np.eye(4))


def test_translation_pose_matrix():
    m = pose_to_matrix(Waypoint(0.0, (1, 2, 3))).m
    assert m[:, 3].tolist() == [1.0, 2.0, 3.0, 1.0]


def test_quarter_turn_about_z():
    h = math.sqrt(2) / 2
    m = pose_to_matrix(Waypoint(0.0, (0, 0, 0), (0, 0, h, h))).m
    np.testing.assert_allclose(m[:3, :3] @ [1, 0, 0], [0, 1, 0], atol=1e-12)
    np.testing.assert_allclose(m[:3, :3], quat_matrix_oracle(np.array([0, 0, h, h])), atol=1e-15)


def test_identity_readings_recover_identity():
    readings, tags = synthetic_readings(HomTransform.identity(), RIG, [6] * 5, seed=1)
    res = estimate_transform(readings, tags)
    np.testing.assert_allclose(res.transform.m, np.eye(4), atol=1e-12)
    assert res.mean_error <= 1e-12


def test_translation_recovered_exactly():
    T = HomTransform.rigid(np.eye(3), (0.55, 0.5, 0.0))
    readings, tags = synthetic_readings(T, RIG, [10] * 5, seed=2)
    res = estimate_transform(readings, tags)
    np.testing.assert_allclose(res.transform.m, T.m, atol=1e-12)
    assert res.mean_error <= 1e-12
    assert len(res.per_location_errors) == 5


def test_noisy_728_readings_mean_error_below_3mm():
    T = rigid(7)
    readings, tags = synthetic_readings(T, RIG, [146, 146, 146, 145, 145], noise_rms=0.002, seed=3)
    assert len(readings) == 728
    res = estimate_transform(readings, tags)
    assert res.mean_error <= 0.003


def test_outlier_reading_does_not_bias_estimate():
    T = HomTransform.rigid(np.eye(3), (0.1, 0.2, 0.3))
    readings, tags = synthetic_readings(T, RIG[:1], [20], seed=4)
    bad = readings[0]
    readings[0] = PairedReading(bad.unity_pose, Waypoint(0.0, np.add(bad.world_pose.position, (3, 0, 0)),
                                                         bad.world_pose.orientation))
    res = estimate_transform(readings, tags)
    assert res.n_readings <= 19
    np.testing.assert_allclose(res.transform.translation, [0.1, 0.2, 0.3], atol=1e-12)


def test_too_few_readings():
    readings, _ = synthetic_readings(HomTransform.identity(), RIG[:1], [2], seed=0)
    with pytest.raises(InsufficientData):
        estimate_transform(readings)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_noise_free_recovery_any_rigid_transform(seed):
    T = rigid(seed)
    readings, tags = synthetic_readings(T, RIG, [8] * 5, seed=seed)
    res = estimate_transform(readings, tags)
    np.testing.assert_allclose(res.transform.m, T.m, atol=1e-9)
    assert res.mean_error <= 1e-9
    r = res.transform.rotation
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-9)
    assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-9)


def move_readings(readings, G, side):
    out = []
    for r in readings:
        u, w = pose_to_matrix(r.unity_pose).m, pose_to_matrix(r.world_pose).m
        u, w = (u @ G.m, w @ G.m) if side == "body" else (G.m @ u, G.m @ w)
        out.append(PairedReading(pose(u), pose(w)))
    return out


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_mean_error_invariant_under_common_body_offset(seed, motion_seed):
    # the same rigid offset composed onto the tracked body in both frames
    T = rigid(seed)
    readings, tags = synthetic_readings(T, RIG, [12] * 5, noise_rms=0.002, seed=seed)
    base = estimate_transform(readings, tags).mean_error
    moved = move_readings(readings, rigid(motion_seed), "body")
    assert estimate_transform(moved, tags).mean_error == pytest.approx(base, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_mean_error_invariant_under_common_frame_motion_noise_free(seed, motion_seed):
    T = rigid(seed)
    readings, tags = synthetic_readings(T, RIG, [12] * 5, seed=seed)
    moved = move_readings(readings, rigid(motion_seed), "frame")
    assert estimate_transform(moved, tags).mean_error <= 1e-9


def pose(m):
    return Waypoint(0.0, tuple(m[:3, 3]), tuple(matrix_to_quat(m[:3, :3])))


def test_pairs_file_round_trip():
    readings, tags = synthetic_readings(rigid(1), RIG, [3] * 5, seed=5)
    blob = write_pairs(readings, tags)
    back, locs = parse_pairs(blob, with_locations=True)
    assert locs == tags
    assert write_pairs(back, locs) == blob
    assert parse_pairs(write_pairs(readings), with_locations=True)[1] is None


def test_pairs_file_errors_name_the_line():
    readings, tags = synthetic_readings(rigid(1), RIG[:1], [2], seed=5)
    text = write_pairs(readings).decode() + "{broken\n"
    with pytest.raises(ParseError, match="line 3"):
        parse_pairs(text)
    mixed = write_pairs(readings, tags).decode().splitlines()[0] + "\n" + write_pairs(readings[:1]).decode()
    with pytest.raises(ParseError):
        parse_pairs(mixed, with_locations=True)
