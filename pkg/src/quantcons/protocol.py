"""Node-local mass-splitting state machine.

All functions are pure.  Integer division is floor division (toward
negative infinity) throughout, which keeps ``0 <= r < z`` and the piece
spread at most 1 for negative masses as well.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class NodeState:
    y: int
    z: int
    y_s: int
    z_s: int
    q_s: int

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.y, self.z, self.y_s, self.z_s, self.q_s)


@dataclass(frozen=True, slots=True)
class TokenMessage:
    y_piece: int
    origin: int
    dest: int
    z_piece: int = 1

    def __post_init__(self) -> None:
        if self.z_piece != 1:
            raise ProtocolError(f"token count must be 1, got {self.z_piece}")


def init_node(y0: int) -> NodeState:
    return NodeState(y=y0, z=1, y_s=y0, z_s=1, q_s=y0)


def is_triggered(s: NodeState) -> bool:
    return s.z > 0


def quantized_state(y_s: int, z_s: int) -> int:
    if z_s <= 0:
        raise ProtocolError(f"state counter must be positive, got {z_s}")
    return y_s // z_s


def split_mass(y: int, z: int) -> list[int]:
    """Split ``y`` into ``z`` integer pieces that differ by at most one.

    The first ``r = y mod z`` pieces carry the extra unit.
    """
    if z <= 0:
        raise ProtocolError(f"cannot split into {z} pieces")
    base, r = divmod(y, z)
    return [base + 1] * r + [base] * (z - r)


def refresh(s: NodeState) -> NodeState:
    """Copy the held mass into the state variables (the trigger's state update)."""
    return replace(s, y_s=s.y, z_s=s.z, q_s=quantized_state(s.y, s.z))


def trigger_update(s: NodeState) -> tuple[NodeState, list[int]]:
    """Run the event-triggered update; returns the refreshed state and the pieces.

    The returned state still reports the pre-emission mass ``(y, z)`` so it
    can be recorded as the round's snapshot; the mass itself leaves the node
    with the pieces and :func:`aggregate` rebuilds ``(y, z)`` from arrivals.
    """
    if not is_triggered(s):
        raise ProtocolError(f"node holds no tokens (z={s.z}); event condition not met")
    return refresh(s), split_mass(s.y, s.z)


def aggregate(s: NodeState, received: Iterable[TokenMessage], node: int) -> NodeState:
    y = z = 0
    for msg in received:
        if msg.dest != node:
            raise ProtocolError(f"message for node {msg.dest} delivered to node {node}")
        y += msg.y_piece
        z += msg.z_piece
    return replace(s, y=y, z=z)
