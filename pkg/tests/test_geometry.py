import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relwin.errors import ValidationError
from relwin.geometry import (
    Window,
    as_window_array,
    intersection_area,
    overlap_loss,
    overlaps_with,
    relation_descriptor,
    relation_tensor,
    relations_to,
    window_areas,
)

coords = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
sizes = st.floats(min_value=1e-3, max_value=1e6, allow_nan=False, allow_infinity=False)


@st.composite
def windows(draw):
    x, y = draw(coords), draw(coords)
    return Window(x, y, x + draw(sizes), y + draw(sizes))


def test_intersection_area_frozen():
    assert intersection_area(Window(0, 0, 10, 10), Window(5, 5, 15, 15)) == 25.0


def test_intersection_area_disjoint_and_touching():
    a = Window(0, 0, 10, 10)
    assert intersection_area(a, Window(20, 20, 30, 30)) == 0.0
    # shared edge has zero area
    assert intersection_area(a, Window(10, 0, 20, 10)) == 0.0


def test_nested_descriptor_frozen():
    inner = Window(0, 0, 10, 10)
    outer = Window(0, 0, 20, 20)
    rel = relation_descriptor(inner, outer)
    assert (rel.overlap, rel.part, rel.container) == (0.25, 1.0, 0.25)
    assert overlap_loss(inner, outer) == 0.75


def test_identical_windows_give_ones():
    w = Window(3.5, -2.0, 7.25, 4.0)
    rel = relation_descriptor(w, w)
    assert (rel.overlap, rel.part, rel.container) == (1.0, 1.0, 1.0)
    assert overlap_loss(w, w) == 0.0


def test_disjoint_windows_give_zeros():
    rel = relation_descriptor(Window(0, 0, 1, 1), Window(5, 5, 6, 6))
    assert (rel.overlap, rel.part, rel.container) == (0.0, 0.0, 0.0)
    assert overlap_loss(Window(0, 0, 1, 1), Window(5, 5, 6, 6)) == 1.0


@settings(max_examples=300, deadline=None)
@given(windows(), windows())
def test_swap_duality_and_bounds(a, b):
    ra = relation_descriptor(a, b)
    rb = relation_descriptor(b, a)
    # overlap is symmetric, part and container swap roles
    assert ra.overlap == rb.overlap
    assert ra.part == rb.container
    assert ra.container == rb.part
    for v in (ra.overlap, ra.part, ra.container):
        assert 0.0 <= v <= 1.0
    # union >= each area, so overlap never exceeds part or container
    assert ra.overlap <= ra.part
    assert ra.overlap <= ra.container
    assert overlap_loss(a, b) == 1.0 - ra.overlap


@settings(max_examples=200, deadline=None)
@given(windows(), windows())
def test_descriptor_extremes_iff(a, b):
    rel = relation_descriptor(a, b)
    same = (a.x_min, a.y_min, a.x_max, a.y_max) == (b.x_min, b.y_min, b.x_max, b.y_max)
    if same:
        assert (rel.overlap, rel.part, rel.container) == (1.0, 1.0, 1.0)
    if rel.overlap == 1.0 and rel.part == 1.0 and rel.container == 1.0:
        assert intersection_area(a, b) == a.area == b.area
    disjoint = intersection_area(a, b) == 0.0
    assert disjoint == ((rel.overlap, rel.part, rel.container) == (0.0, 0.0, 0.0))


def test_window_validation():
    with pytest.raises(ValidationError):
        Window(0, 0, 0, 10)          # zero width
    with pytest.raises(ValidationError):
        Window(5, 0, 4, 10)          # inverted
    with pytest.raises(ValidationError):
        Window(0, 0, np.inf, 10)
    with pytest.raises(ValidationError):
        Window(np.nan, 0, 1, 1)


def test_window_helpers():
    w = Window(1.0, 2.0, 4.0, 6.0)
    assert w.area == 12.0
    assert np.array_equal(w.as_array(), [1.0, 2.0, 4.0, 6.0])
    assert Window.from_sequence([1, 2, 4, 6]) == w


def test_as_window_array_validation():
    with pytest.raises(ValidationError):
        as_window_array(np.zeros((3, 5)))
    with pytest.raises(ValidationError):
        as_window_array(np.array([[0.0, 0.0, 0.0, 1.0]]))  # degenerate box
    arr = as_window_array([[0, 0, 2, 3], [1, 1, 4, 4]])
    assert arr.shape == (2, 4)
    assert np.array_equal(window_areas(arr), [6.0, 9.0])


def test_relations_to_matches_scalar_descriptor(rng):
    from tests.conftest import random_windows

    boxes = random_windows(rng, 40)
    ref = boxes[7]
    rel = relations_to(boxes, ref)
    ref_w = Window.from_sequence(ref)
    for i in range(len(boxes)):
        expect = relation_descriptor(Window.from_sequence(boxes[i]), ref_w)
        assert rel[i, 0] == expect.overlap
        assert rel[i, 1] == expect.part
        assert rel[i, 2] == expect.container
    assert np.array_equal(overlaps_with(boxes, ref), rel[:, 0])


def test_relation_tensor_matches_columns(rng):
    from tests.conftest import random_windows

    boxes = random_windows(rng, 25)
    tensor = relation_tensor(boxes)
    assert tensor.shape == (25, 25, 3)
    for l in (0, 11, 24):
        assert np.array_equal(tensor[:, l, :], relations_to(boxes, boxes[l]))
    # every window relates to itself with the identity triple
    diag = tensor[np.arange(25), np.arange(25), :]
    assert np.array_equal(diag, np.ones((25, 3)))
