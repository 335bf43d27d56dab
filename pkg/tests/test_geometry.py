import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from arttrack.geometry import (
    BoundingBox,
    box_to_measurement,
    iou,
    iou_matrix,
    measurement_to_box,
)

coord = st.floats(-500, 500, allow_nan=False)
side = st.floats(0.5, 200, allow_nan=False)
boxes = st.builds(BoundingBox, coord, coord, side, side)


def test_iou_identity_and_disjoint():
    b = BoundingBox(3.3, 7.1, 12.7, 5.9)
    assert iou(b, b) == 1.0
    assert iou(BoundingBox(0, 0, 2, 2), BoundingBox(10, 10, 2, 2)) == 0.0


def test_iou_partial_overlap():
    # intersection 1, union 4 + 4 - 1
    assert iou(BoundingBox(0, 0, 2, 2), BoundingBox(1, 1, 2, 2)) == pytest.approx(1 / 7, abs=1e-15)


def test_touching_edges_have_zero_iou():
    assert iou(BoundingBox(0, 0, 2, 2), BoundingBox(2, 0, 2, 2)) == 0.0


@given(boxes, boxes)
def test_iou_bounded_and_symmetric(a, b):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou(b, a)


@given(boxes)
def test_iou_self_is_one(a):
    assert iou(a, a) == 1.0


@given(boxes, boxes, st.floats(-100, 100), st.floats(-100, 100))
def test_iou_translation_invariant(a, b, dx, dy):
    a2 = BoundingBox(a.x + dx, a.y + dy, a.w, a.h)
    b2 = BoundingBox(b.x + dx, b.y + dy, b.w, b.h)
    assert iou(a2, b2) == pytest.approx(iou(a, b), abs=1e-9)


@given(st.lists(boxes, min_size=1, max_size=5), st.lists(boxes, min_size=1, max_size=5))
def test_iou_matrix_matches_scalar(xs, ys):
    arr_a = np.array([[b.x, b.y, b.w, b.h] for b in xs])
    arr_b = np.array([[b.x, b.y, b.w, b.h] for b in ys])
    m = iou_matrix(arr_a, arr_b)
    for i, a in enumerate(xs):
        for j, b in enumerate(ys):
            assert m[i, j] == pytest.approx(iou(a, b), abs=1e-12)


def test_measurement_conversion():
    assert box_to_measurement(BoundingBox(0, 0, 2, 2)).tolist() == [1, 1, 2, 2]
    assert box_to_measurement(BoundingBox(10, 20, 4, 6)).tolist() == [12, 23, 4, 6]


@given(boxes)
def test_measurement_round_trip(b):
    back = measurement_to_box(box_to_measurement(b))
    for u, v in zip((back.x, back.y, back.w, back.h), (b.x, b.y, b.w, b.h)):
        assert math.isclose(u, v, rel_tol=1e-12, abs_tol=1e-9)


def test_center_and_clamp():
    b = BoundingBox(1, 2, 4, 6)
    assert b.center() == (3.0, 5.0)
    c = BoundingBox(5, 5, -2, 0.2).clamped()
    assert (c.w, c.h) == (1.0, 1.0)
