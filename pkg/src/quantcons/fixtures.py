"""Built-in digraphs and the golden four-node worked example.

Edge texts use the on-disk format: ``<receiver> <sender>`` with 1-based labels.
"""
from __future__ import annotations

from pathlib import Path
from typing import Union

from .graph import Digraph, load_digraph, parse_edges
from .sim import RoundSchedule, parse_schedule

FIG1_EDGES = """\
n 4
2 1
3 1
4 2
1 3
2 3
3 4
"""

FIG2_EDGES = """\
n 7
2 1
5 1
1 2
5 2
1 3
5 3
2 4
5 4
6 5
7 5
3 6
4 7
6 7
"""

FIG1_INIT = (5, 3, 7, 2)
FIG2_INIT = (15, 5, 11, 4, 3, 13, 9)

# Routing that carries the worked example from k=0 to k=4.  Pieces are in
# increment-first order, so node 2's split of 13 into [5, 4, 4] at k=2 sends
# the 5 to itself and both 4s to node 4.
EXAMPLE1_SCHEDULE_TEXT = """\
0: 1->2,2->2,3->1,4->3
1: 1->2,2->2,2->4,3->2
2: 2->2,2->4,2->4,4->3
3: 2->2,3->1,4->3,4->3
"""

# (y, z, y_s, z_s, q_s) per node, rounds k = 0..4.
EXAMPLE1_TABLES: tuple[tuple[tuple[int, int, int, int, int], ...], ...] = (
    ((5, 1, 5, 1, 5), (3, 1, 3, 1, 3), (7, 1, 7, 1, 7), (2, 1, 2, 1, 2)),
    ((7, 1, 7, 1, 7), (8, 2, 8, 2, 4), (2, 1, 2, 1, 2), (0, 0, 2, 1, 2)),
    ((0, 0, 7, 1, 7), (13, 3, 13, 3, 4), (0, 0, 2, 1, 2), (4, 1, 4, 1, 4)),
    ((0, 0, 7, 1, 7), (5, 1, 5, 1, 5), (4, 1, 4, 1, 4), (8, 2, 8, 2, 4)),
    ((4, 1, 4, 1, 4), (5, 1, 5, 1, 5), (8, 2, 8, 2, 4), (0, 0, 8, 2, 4)),
)

GRAPHS = {"fig1": FIG1_EDGES, "fig2": FIG2_EDGES}
INITS = {"fig1": FIG1_INIT, "fig2": FIG2_INIT}


def fig1() -> Digraph:
    return parse_edges(FIG1_EDGES)


def fig2() -> Digraph:
    return parse_edges(FIG2_EDGES)


def two_cycle() -> Digraph:
    return Digraph(2, frozenset({(0, 1), (1, 0)}))


def example1_schedule() -> list[RoundSchedule]:
    return parse_schedule(EXAMPLE1_SCHEDULE_TEXT)


def resolve_graph(ref: Union[str, Path]) -> Digraph:
    """A built-in name (``fig1``, ``fig2``) or a path to an edge-list file."""
    if str(ref) in GRAPHS:
        return parse_edges(GRAPHS[str(ref)])
    return load_digraph(ref)
