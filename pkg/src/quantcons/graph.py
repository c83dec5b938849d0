"""Communication digraphs, transmission probabilities and random generation.

Edges are stored as ``(receiver, sender)`` pairs over dense node indices
``0..n-1``.  Edge-list files use 1-based labels and the same orientation;
translation happens in :func:`parse_edges` / :func:`format_edges`.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Union

Prob = Union[Fraction, float]

FLOAT_TOL = 1e-12


class GraphError(ValueError):
    """Malformed digraph, policy or edge-list file."""


@dataclass(frozen=True)
class Digraph:
    n: int
    edges: frozenset[tuple[int, int]]
    out_neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    in_neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise GraphError(f"a digraph needs at least 2 nodes, got {self.n}")
        edges = frozenset((int(j), int(i)) for j, i in self.edges)
        outs: list[list[int]] = [[] for _ in range(self.n)]
        ins: list[list[int]] = [[] for _ in range(self.n)]
        for j, i in edges:
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise GraphError(f"edge ({j}, {i}) out of range for n={self.n}")
            if j == i:
                raise GraphError(f"self-edge on node {j} is not allowed")
            outs[i].append(j)
            ins[j].append(i)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "out_neighbors", tuple(tuple(sorted(o)) for o in outs))
        object.__setattr__(self, "in_neighbors", tuple(tuple(sorted(i)) for i in ins))

    @classmethod
    def from_arcs(cls, n: int, arcs: Iterable[tuple[int, int]]) -> "Digraph":
        """Build from ``(sender, receiver)`` arcs, i.e. ordinary i -> j notation."""
        return cls(n, frozenset((j, i) for i, j in arcs))

    def out_degree(self, j: int) -> int:
        return len(self.out_neighbors[j])

    def in_degree(self, j: int) -> int:
        return len(self.in_neighbors[j])

    @property
    def max_out_degree(self) -> int:
        return max(len(o) for o in self.out_neighbors)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class TransmissionPolicy:
    """Column-stochastic routing probabilities.

    ``probs[j]`` maps every allowed destination of node ``j`` (its
    out-neighbours plus ``j`` itself) to a positive probability.
    """

    probs: tuple[Mapping[int, Prob], ...]

    def validate(self, g: Digraph) -> None:
        if len(self.probs) != g.n:
            raise GraphError(f"policy has {len(self.probs)} columns, digraph has {g.n} nodes")
        for j, col in enumerate(self.probs):
            allowed = set(g.out_neighbors[j]) | {j}
            if set(col) != allowed:
                raise GraphError(
                    f"node {j}: destinations {sorted(col)} differ from allowed {sorted(allowed)}"
                )
            if any(not (p > 0) for p in col.values()):
                raise GraphError(f"node {j}: probabilities must be positive")
            total = sum(col.values())
            if all(isinstance(p, Fraction) for p in col.values()):
                if total != 1:
                    raise GraphError(f"node {j}: column sums to {total}, not 1")
            elif abs(float(total) - 1.0) > FLOAT_TOL:
                raise GraphError(f"node {j}: column sums to {float(total)!r}, not 1")

    @property
    def is_exact(self) -> bool:
        return all(isinstance(p, Fraction) for col in self.probs for p in col.values())

    def matrix(self) -> list[list[Prob]]:
        """Dense B with ``B[l][j] = b_lj`` (zero where no edge)."""
        n = len(self.probs)
        zero: Prob = Fraction(0) if self.is_exact else 0.0
        b = [[zero] * n for _ in range(n)]
        for j, col in enumerate(self.probs):
            for l, p in col.items():
                b[l][j] = p
        return b


def is_strongly_connected(g: Digraph) -> bool:
    return len(strongly_connected_components(g)) == 1


def strongly_connected_components(g: Digraph) -> list[list[int]]:
    """Tarjan's algorithm, iterative so deep graphs don't hit the recursion limit.

    Components come out in reverse topological order of the condensation.
    """
    index: dict[int, int] = {}
    lowlink: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0

    for root in range(g.n):
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            v, pos = work.pop()
            if pos == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack.add(v)
            succ = g.out_neighbors[v]
            recursed = False
            while pos < len(succ):
                w = succ[pos]
                pos += 1
                if w not in index:
                    work.append((v, pos))
                    work.append((w, 0))
                    recursed = True
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            if recursed:
                continue
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(sorted(comp))
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
    return sccs


def uniform_policy(g: Digraph) -> TransmissionPolicy:
    """Each node picks itself or any out-neighbour with equal probability."""
    cols = []
    for j in range(g.n):
        p = Fraction(1, 1 + g.out_degree(j))
        cols.append({l: p for l in sorted((j, *g.out_neighbors[j]))})
    return TransmissionPolicy(tuple(cols))


def random_strongly_connected(n: int, extra_edge_prob: float, rng_seed: int) -> Digraph:
    """Random Hamiltonian cycle plus independent Bernoulli extra edges.

    The cycle makes the result strongly connected by construction.
    """
    if n < 2:
        raise GraphError(f"n must be >= 2, got {n}")
    if not 0.0 <= extra_edge_prob <= 1.0:
        raise GraphError(f"extra_edge_prob must lie in [0, 1], got {extra_edge_prob}")
    rng = random.Random(rng_seed)
    order = list(range(n))
    rng.shuffle(order)
    arcs = {(order[t], order[(t + 1) % n]) for t in range(n)}
    for i in range(n):
        for j in range(n):
            if i != j and (i, j) not in arcs and rng.random() < extra_edge_prob:
                arcs.add((i, j))
    return Digraph.from_arcs(n, arcs)


# ---- edge-list files -------------------------------------------------------

def parse_edges(text: str) -> Digraph:
    """Parse ``n <count>`` followed by ``<receiver> <sender>`` lines (1-based).

    Blank lines and ``#`` comments are ignored.
    """
    n = None
    edges = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2 or parts[0] != "n":
                raise GraphError(f"line {lineno}: expected 'n <count>', got {raw!r}")
            n = _int(parts[1], lineno)
            continue
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected '<receiver> <sender>', got {raw!r}")
        j, i = _int(parts[0], lineno), _int(parts[1], lineno)
        if not (1 <= j <= n and 1 <= i <= n):
            raise GraphError(f"line {lineno}: label out of range 1..{n}")
        edges.add((j - 1, i - 1))
    if n is None:
        raise GraphError("empty edge list: missing 'n <count>' header")
    return Digraph(n, frozenset(edges))


def _int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise GraphError(f"line {lineno}: {tok!r} is not an integer") from None


def format_edges(g: Digraph) -> str:
    lines = [f"n {g.n}"]
    lines += [f"{j + 1} {i + 1}" for j, i in g.sorted_edges()]
    return "\n".join(lines) + "\n"


def load_digraph(path: Union[str, Path]) -> Digraph:
    return parse_edges(Path(path).read_text())
