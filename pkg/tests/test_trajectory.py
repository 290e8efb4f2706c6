import math

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from hilcloud.errors import InvalidArgument, ValidationError
from hilcloud.trajectory import (HomTransform, Trajectory, Waypoint, apply_transform, quat_from_axis_angle,
                                 quat_to_matrix, resample_uniform, smooth_adaptive, trajectory_error,
                                 translation_between)


def line(xs, ys=None, zs=None):
    n = len(xs)
    ys = [0.0] * n if ys is None else ys
    zs = [0.0] * n if zs is None else zs
    return Trajectory(np.arange(n, dtype=float), np.column_stack([xs, ys, zs]))


def reference_scan(xs, threshold):
    """Scalar re-statement of the windowed running-average scan on 1-D positions."""
    out = []
    window = [xs[0]]
    for x in xs[1:]:
        if abs(x - sum(window) / len(window)) <= threshold:
            window.append(x)
        else:
            out.append(sum(window) / len(window))
            window = [x]
    out.append(sum(window) / len(window))
    return out


coord = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
points = st.lists(st.tuples(coord, coord, coord), min_size=1, max_size=25)


def traj_from(pts):
    return Trajectory(np.arange(len(pts), dtype=float), np.array(pts, dtype=float))


def random_rigid(seed):
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3)
    q = quat_from_axis_angle(axis / np.linalg.norm(axis), rng.uniform(-math.pi, math.pi))
    return HomTransform.rigid(quat_to_matrix(q), rng.uniform(-3, 3, size=3))


# --- value types

def test_waypoint_normalizes_orientation():
    w = Waypoint(0.0, (1, 2, 3), (0, 0, 0, 2))
    assert w.orientation == (0.0, 0.0, 0.0, 1.0)


def test_trajectory_rejects_non_increasing_time():
    with pytest.raises(ValidationError, match="waypoint 2"):
        Trajectory([0.0, 1.0, 1.0], np.zeros((3, 3)))


def test_trajectory_rejects_nan():
    with pytest.raises(ValidationError):
        Trajectory([0.0, 1.0], [[0, 0, 0], [np.nan, 0, 0]])


def test_transform_bottom_row_checked():
    m = np.eye(4)
    m[3, 0] = 1.0
    with pytest.raises(InvalidArgument):
        HomTransform(m)


# --- translation_between / apply_transform

def test_translation_between_anchors():
    T = translation_between((2.95, 1.5, 2), (3.5, 2, 2))
    # independent: plain component differences
    np.testing.assert_allclose(T.translation, [3.5 - 2.95, 0.5, 0.0], atol=0, rtol=0)
    np.testing.assert_array_equal(T.rotation, np.eye(3))


def test_translation_between_same_anchor_is_identity():
    assert np.array_equal(translation_between((1, 2, 3), (1, 2, 3)).m, np.eye(4))


def test_translation_applied_to_point_matches_matrix_product():
    T = translation_between((1, 1, 1), (1.55, 1.5, 1))
    traj = apply_transform(T, Trajectory([0.0], [[1, 1, 1]]))
    brute = T.m @ np.array([1.0, 1.0, 1.0, 1.0])
    np.testing.assert_allclose(traj.p[0], brute[:3], atol=1e-15)
    np.testing.assert_allclose(traj.p[0], [1.55, 1.5, 1], atol=1e-15)


def test_identity_transform_leaves_trajectory_unchanged():
    traj = line([0.0, 1.0, 2.0])
    assert apply_transform(HomTransform.identity(), traj) == traj


def test_pure_translation_shifts_positions_only():
    traj = Trajectory([0, 1, 2], [[0, 0, 0], [1, 0, 0], [2, 0, 0]],
                      [[0, 0, 0, 1], [0, 0, 0.6, 0.8], [0.6, 0, 0, 0.8]])
    out = apply_transform(translation_between((0, 0, 0), (0.55, 0.5, 0)), traj)
    np.testing.assert_array_equal(out.p, traj.p + np.array([0.55, 0.5, 0.0]))
    np.testing.assert_array_equal(out.q, traj.q)


def test_rotation_about_z_maps_x_to_y():
    T = HomTransform.rigid(quat_to_matrix(quat_from_axis_angle((0, 0, 1), math.pi / 2)), (0, 0, 0))
    out = apply_transform(T, Trajectory([0.0], [[1, 0, 0]]))
    np.testing.assert_allclose(out.p[0], [0, 1, 0], atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(points, st.integers(0, 10_000))
def test_inverse_transform_round_trip(pts, seed):
    traj = traj_from(pts)
    T = random_rigid(seed)
    back = apply_transform(T.inverse(), apply_transform(T, traj))
    np.testing.assert_allclose(back.p, traj.p, atol=1e-9)
    # quaternions may flip sign; compare as rotations
    for a, b in zip(back.q, traj.q):
        np.testing.assert_allclose(quat_to_matrix(a), quat_to_matrix(b), atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.tuples(coord, coord, coord), st.tuples(coord, coord, coord))
def test_translation_between_maps_a_onto_b(a, b):
    out = apply_transform(translation_between(a, b), Trajectory([0.0], [a]))
    np.testing.assert_allclose(out.p[0], b, atol=1e-12)


# --- resample_uniform

def test_resample_line_k5():
    out = resample_uniform(line([0.0, 1.0]), 5)
    np.testing.assert_allclose(out.p[:, 0], [0, 0.25, 0.5, 0.75, 1.0], atol=1e-15)


def test_resample_single_waypoint_repeats():
    out = resample_uniform(Trajectory([0.0], [[1, 2, 3]]), 4)
    assert len(out) == 4
    assert np.all(out.p == [1, 2, 3])


def test_resample_l_shape_middle_sample_at_corner():
    out = resample_uniform(line([0.0, 1.0, 1.0], [0.0, 0.0, 1.0]), 3)
    # arc length 2, so the midpoint sits at s = 1: the corner
    np.testing.assert_allclose(out.p[1], [1, 0, 0], atol=1e-12)


def test_resample_rejects_k_below_two():
    with pytest.raises(InvalidArgument):
        resample_uniform(line([0.0, 1.0]), 1)


@settings(max_examples=60, deadline=None)
@given(points, st.integers(0, 30))
def test_resample_preserves_endpoints(pts, extra):
    traj = traj_from(pts)
    out = resample_uniform(traj, max(len(traj), 2) + extra)
    assert np.array_equal(out.p[0], traj.p[0]) and np.array_equal(out.p[-1], traj.p[-1])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20), st.integers(0, 30))
def test_resample_preserves_length_on_straight_paths(steps, extra):
    xs = np.concatenate([[0.0], np.cumsum(steps)])
    traj = line(list(xs))
    out = resample_uniform(traj, len(traj) + extra)
    assert out.path_length() == pytest.approx(traj.path_length(), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(points, st.integers(0, 30))
@example([(0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 1.0), (0.0, 0.0, 0.0)], 0)
def test_resample_preserves_length_for_k_at_least_n(pts, extra):
    # stated for every path; uniform arc-length samples cut corners, so this
    # fails on bent paths: the pinned out-and-back path of length 2 resamples
    # to z = 0, 2/3, 2/3, 0 with length 4/3 (see the decision log)
    traj = traj_from(pts)
    out = resample_uniform(traj, max(len(traj), 2) + extra)
    if len(traj) > 1 and traj.path_length() > 0:
        assert out.path_length() == pytest.approx(traj.path_length(), abs=1e-9)


# --- smooth_adaptive

def test_smoothing_jitter_example():
    out = smooth_adaptive(line([0.0, 0.001, 0.002, 0.5]), 0.1)
    assert len(out) == 2
    np.testing.assert_allclose(out.p[:, 0], reference_scan([0.0, 0.001, 0.002, 0.5], 0.1), atol=1e-15)
    np.testing.assert_allclose(out.p[:, 0], [0.001, 0.5], atol=1e-15)


def test_smoothing_keeps_widely_spaced_points():
    traj = line([0.0, 0.5, 1.0, 1.7])
    assert smooth_adaptive(traj, 0.1) == traj


def test_smoothing_constant_trajectory_collapses():
    traj = line([0.3] * 10)
    out = smooth_adaptive(traj, 0.1)
    assert len(out) == 1
    assert out.t[0] == traj.t[0]


def test_smoothing_window_keeps_first_orientation_and_time():
    q = [quat_from_axis_angle((0, 0, 1), a) for a in (0.0, 0.3, 0.6, 0.9)]
    traj = Trajectory([0, 1, 2, 3], [[0, 0, 0], [0.01, 0, 0], [0.02, 0, 0], [1, 0, 0]], q)
    out = smooth_adaptive(traj, 0.1)
    np.testing.assert_array_equal(out.q[0], traj.q[0])
    assert out.t.tolist() == [0.0, 3.0]


def test_smoothing_rejects_non_positive_threshold():
    with pytest.raises(InvalidArgument):
        smooth_adaptive(line([0.0, 1.0]), 0.0)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=30),
       st.floats(0.01, 1.0))
def test_smoothing_matches_scalar_scan(xs, threshold):
    out = smooth_adaptive(line(xs), threshold)
    np.testing.assert_allclose(out.p[:, 0], reference_scan(xs, threshold), atol=1e-12)
    assert len(out) <= len(xs)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0.0, 0.3), min_size=1, max_size=30), st.floats(0.01, 0.5))
def test_smoothing_idempotent_on_monotone_paths(steps, threshold):
    xs = np.cumsum(steps)
    once = smooth_adaptive(line(list(xs)), threshold)
    assert smooth_adaptive(once, threshold) == once


@settings(max_examples=80, deadline=None)
@given(points)
@example([(0.0, 0.0, 0.0), (0.11, 0.0, 0.0), (0.02, 0.0, 0.0)])
def test_smoothing_idempotent_in_general(pts):
    # the stated invariant; the scan itself breaks it when a window's mean
    # drifts back within reach of the previous emitted point (pinned example:
    # one pass gives x = 0, 0.065 and a second merges them). See the decision log
    once = smooth_adaptive(traj_from(pts), 0.1)
    assert smooth_adaptive(once, 0.1) == once


# --- trajectory_error

def test_error_identical_is_zero():
    traj = line([0.0, 1.0, 3.0])
    assert trajectory_error(traj, traj) == 0.0


def test_error_uniform_offset():
    a = line([0.0, 1.0, 2.0])
    b = line([0.003, 1.003, 2.003])
    assert trajectory_error(a, b) == pytest.approx(0.003, abs=1e-12)


def test_error_two_vs_three_point_line():
    a = line([0.0, 1.0])
    b = line([0.0, 0.5, 1.0], [0.0, 0.01, 0.0])
    # both resample to 3 points; b's arc-length midpoint is its own middle vertex
    pairs = [([0, 0, 0], [0, 0, 0]), ([0.5, 0, 0], [0.5, 0.01, 0]), ([1, 0, 0], [1, 0, 0])]
    expected = sum(math.dist(p, q) for p, q in pairs) / 3
    assert trajectory_error(a, b) == pytest.approx(expected, abs=1e-12)
    assert trajectory_error(b, a) == trajectory_error(a, b)


@settings(max_examples=60, deadline=None)
@given(points, points, st.integers(0, 10_000))
def test_error_properties(pa, pb, seed):
    a, b = traj_from(pa), traj_from(pb)
    e = trajectory_error(a, b)
    assert e >= 0
    assert trajectory_error(a, a) == 0
    T = random_rigid(seed)
    assert trajectory_error(apply_transform(T, a), apply_transform(T, b)) == pytest.approx(e, abs=1e-9)
