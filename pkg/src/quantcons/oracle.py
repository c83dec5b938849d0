"""Exact reference computations, kept independent of the protocol code.

Everything here works on integers and :class:`fractions.Fraction`; bound
checks are decided exactly rather than within a tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Sequence

from .graph import Digraph, TransmissionPolicy

if TYPE_CHECKING:
    from .sim import TraceRecord

RationalMatrix = list[list[Fraction]]


@dataclass(frozen=True)
class ExactAverage:
    sum_S: int
    n: int
    L: int
    R: int
    q_floor: int
    q_ceil: int

    @property
    def q(self) -> Fraction:
        return Fraction(self.sum_S, self.n)

    @property
    def targets(self) -> frozenset[int]:
        return frozenset({self.q_floor, self.q_ceil})


def exact_average(y0: Sequence[int]) -> ExactAverage:
    n = len(y0)
    if n < 2:
        raise ValueError(f"need at least 2 initial values, got {n}")
    s = sum(y0)
    L, R = divmod(s, n)
    return ExactAverage(sum_S=s, n=n, L=L, R=R, q_floor=L, q_ceil=L if R == 0 else L + 1)


def identity(n: int) -> RationalMatrix:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def matmul(a: RationalMatrix, b: RationalMatrix) -> RationalMatrix:
    cols = list(zip(*b))
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in cols] for row in a]


def policy_matrix(policy: TransmissionPolicy) -> RationalMatrix:
    if not policy.is_exact:
        raise TypeError("exact matrix powers need a Fraction-valued policy")
    return policy.matrix()  # type: ignore[return-value]


def markov_power(policy: TransmissionPolicy, steps: int) -> RationalMatrix:
    """Exact ``B**steps``; column ``j`` is the law of a token started at ``j``."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    b = policy_matrix(policy)
    result = identity(len(b))
    base = b
    while steps:
        if steps & 1:
            result = matmul(result, base)
        steps >>= 1
        if steps:
            base = matmul(base, base)
    return result


@dataclass(frozen=True)
class BoundCheck:
    min_entry: Fraction
    bound: Fraction
    holds: bool
    argmin: tuple[int, int]


def check_prop1_bound(policy: TransmissionPolicy, g: Digraph) -> BoundCheck:
    """Compare every entry of ``B**(n-1)`` against ``(1 + max out-degree)**-(n-1)``."""
    p = markov_power(policy, g.n - 1)
    bound = Fraction(1, (1 + g.max_out_degree) ** (g.n - 1))
    min_entry, argmin = min(
        (p[i][j], (i, j)) for i in range(g.n) for j in range(g.n)
    )
    return BoundCheck(min_entry=min_entry, bound=bound, holds=min_entry >= bound, argmin=argmin)


def audit_conservation(trace: Sequence["TraceRecord"], expected_sum: int, n: int) -> bool:
    """Recompute totals from the per-node values rather than trusting the stored fields."""
    if not trace:
        raise ValueError("empty trace")
    for rec in trace:
        ys = sum(s.y for s in rec.states)
        zs = sum(s.z for s in rec.states)
        if len(rec.states) != n:
            return False
        if ys != expected_sum or zs != n:
            return False
        if rec.mass_total != ys or rec.count_total != zs:
            return False
    return True
