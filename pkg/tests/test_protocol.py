import pytest
from hypothesis import given
from hypothesis import strategies as st

from quantcons.protocol import (
    NodeState,
    ProtocolError,
    TokenMessage,
    aggregate,
    init_node,
    is_triggered,
    quantized_state,
    split_mass,
    trigger_update,
)


@pytest.mark.parametrize("y0, expected", [
    (5, (5, 1, 5, 1, 5)),
    (0, (0, 1, 0, 1, 0)),
    (-3, (-3, 1, -3, 1, -3)),
])
def test_init_node(y0, expected):
    assert init_node(y0).as_tuple() == expected


def test_is_triggered():
    assert is_triggered(NodeState(8, 2, 8, 2, 4))
    assert not is_triggered(NodeState(0, 0, 2, 1, 2))
    assert is_triggered(NodeState(-5, 1, 0, 1, 0))


def test_split_examples():
    assert split_mass(8, 2) == [4, 4]
    assert split_mass(13, 3) == [5, 4, 4]
    assert split_mass(-7, 3) == [-2, -2, -3]


def test_split_brute_force_window():
    for y in range(-50, 51):
        for z in range(1, 11):
            pieces = split_mass(y, z)
            assert len(pieces) == z
            assert sum(pieces) == y
            assert max(pieces) - min(pieces) <= 1
            # the multiset is unique: z pieces, spread <= 1, sum y
            lo = min(pieces)
            assert sorted(pieces) == sorted([lo] * (z - (y - lo * z)) + [lo + 1] * (y - lo * z))


@pytest.mark.parametrize("z", [0, -2])
def test_split_rejects_nonpositive(z):
    with pytest.raises(ProtocolError):
        split_mass(5, z)


@given(st.integers(-10**6, 10**6), st.integers(1, 10**3))
def test_split_properties(y, z):
    pieces = split_mass(y, z)
    assert len(pieces) == z
    assert sum(pieces) == y
    assert max(pieces) - min(pieces) in (0, 1)
    r = y - z * (y // z)
    assert 0 <= r < z
    assert pieces.count(y // z + 1) == r or r == 0


def test_quantized_state():
    assert quantized_state(13, 3) == 4
    assert quantized_state(8, 2) == 4
    assert quantized_state(-7, 2) == -4
    with pytest.raises(ProtocolError):
        quantized_state(3, 0)


def test_trigger_update_examples():
    s, pieces = trigger_update(NodeState(8, 2, 3, 1, 3))
    assert s.as_tuple() == (8, 2, 8, 2, 4) and pieces == [4, 4]
    s, pieces = trigger_update(NodeState(7, 1, 5, 1, 5))
    assert s.as_tuple() == (7, 1, 7, 1, 7) and pieces == [7]
    s, pieces = trigger_update(NodeState(0, 1, 9, 1, 9))
    assert s.as_tuple() == (0, 1, 0, 1, 0) and pieces == [0]
    with pytest.raises(ProtocolError):
        trigger_update(NodeState(0, 0, 2, 1, 2))


def test_aggregate_examples():
    before = NodeState(3, 1, 3, 1, 3)
    after = aggregate(before, [TokenMessage(3, origin=1, dest=1), TokenMessage(5, origin=0, dest=1)], 1)
    assert (after.y, after.z) == (8, 2)
    assert (after.y_s, after.z_s, after.q_s) == (3, 1, 3)
    empty = aggregate(NodeState(2, 1, 2, 1, 2), [], 3)
    assert empty.as_tuple() == (0, 0, 2, 1, 2)
    assert aggregate(before, [TokenMessage(4, 0, 0)], 0).as_tuple()[:2] == (4, 1)
    with pytest.raises(ProtocolError):
        aggregate(before, [TokenMessage(1, origin=0, dest=2)], 1)


def test_token_count_is_one():
    with pytest.raises(ProtocolError):
        TokenMessage(3, 0, 1, z_piece=2)


@given(st.integers(-1000, 1000), st.integers(1, 50), st.lists(st.integers(-100, 100), max_size=8))
def test_aggregate_never_touches_state_variables(y, z, pieces):
    s, _ = trigger_update(NodeState(y, z, 0, 1, 0))
    out = aggregate(s, [TokenMessage(p, 0, 0) for p in pieces], 0)
    assert (out.y_s, out.z_s, out.q_s) == (s.y_s, s.z_s, s.q_s)
    assert out.z_s >= 1
