"""Synchronous-round simulation engine.

A round snapshot ``k`` holds each node's mass at the start of round ``k``
together with the state variables after that round's trigger check, the
same layout as the worked-example tables.  :func:`step` maps snapshot
``k`` to snapshot ``k + 1``.
"""
from __future__ import annotations

import csv
import io
import random
import re
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Protocol, Sequence, TextIO

import numpy as np

from .graph import Digraph, TransmissionPolicy, is_strongly_connected, uniform_policy
from .oracle import exact_average
from .protocol import NodeState, TokenMessage, aggregate, init_node, refresh, trigger_update

TRACE_COLUMNS = (
    "run_id", "k", "node", "y", "z", "ys", "zs", "qs", "mass_total", "count_total", "converged",
)


class ScheduleError(ValueError):
    """A scripted routing decision that does not fit the current round."""


class NotStronglyConnected(ValueError):
    pass


class Router(Protocol):
    def destinations(self, j: int, count: int) -> list[int]: ...


@dataclass(frozen=True)
class RoundSchedule:
    """Scripted routing for one round: node -> destination per emitted piece."""

    routes: dict[int, tuple[int, ...]]

    def destinations(self, j: int, count: int) -> list[int]:
        dests = self.routes.get(j, ())
        if len(dests) != count:
            raise ScheduleError(
                f"node {j + 1} emits {count} piece(s) but the schedule lists {len(dests)}"
            )
        return list(dests)

    def check_complete(self, states: Sequence[NodeState]) -> None:
        for j in self.routes:
            if not 0 <= j < len(states):
                raise ScheduleError(f"schedule names unknown node {j + 1}")
            if states[j].z == 0 and self.routes[j]:
                raise ScheduleError(f"node {j + 1} holds no tokens but is scheduled to send")


class RandomRouter:
    """Independent per-piece sampling from each node's probability column."""

    def __init__(self, policy: TransmissionPolicy, rng: random.Random) -> None:
        self.rng = rng
        self._dests = []
        self._cum = []
        for col in policy.probs:
            dests = sorted(col)
            acc, cum = 0.0, []
            for d in dests:
                acc += float(col[d])
                cum.append(acc)
            self._dests.append(dests)
            self._cum.append(cum)

    def destinations(self, j: int, count: int) -> list[int]:
        return self.rng.choices(self._dests[j], cum_weights=self._cum[j], k=count)


@dataclass(frozen=True)
class TraceRecord:
    k: int
    states: tuple[NodeState, ...]
    mass_total: int
    count_total: int
    converged: bool
    sent: int = 0
    sent_external: int = 0

    @property
    def q_s(self) -> list[int]:
        return [s.q_s for s in self.states]


def check_converged(states: Sequence[NodeState], q_floor: int, q_ceil: int) -> bool:
    return all(s.q_s == q_floor or s.q_s == q_ceil for s in states)


def make_record(
    k: int,
    states: Sequence[NodeState],
    targets: Optional[tuple[int, int]] = None,
    sent: int = 0,
    sent_external: int = 0,
) -> TraceRecord:
    states = tuple(states)
    conv = check_converged(states, *targets) if targets is not None else False
    return TraceRecord(
        k=k,
        states=states,
        mass_total=sum(s.y for s in states),
        count_total=sum(s.z for s in states),
        converged=conv,
        sent=sent,
        sent_external=sent_external,
    )


@lru_cache(maxsize=256)
def _allowed(g: Digraph) -> tuple[frozenset[int], ...]:
    return tuple(frozenset((j, *g.out_neighbors[j])) for j in range(g.n))


def step(
    g: Digraph,
    states: Sequence[NodeState],
    router: Router,
    *,
    k: int = 0,
    targets: Optional[tuple[int, int]] = None,
) -> tuple[list[NodeState], TraceRecord]:
    """Trigger, transmit and receive once; returns snapshot ``k + 1``.

    Triggered nodes are visited in index order and pieces in list order,
    which fixes how a seeded router's random stream is consumed.
    """
    if len(states) != g.n:
        raise ValueError(f"expected {g.n} node states, got {len(states)}")
    if isinstance(router, RoundSchedule):
        router.check_complete(states)
    allowed = _allowed(g)
    inbox: list[list[TokenMessage]] = [[] for _ in range(g.n)]
    sent = external = 0
    for j, s in enumerate(states):
        if s.z <= 0:
            continue
        _, pieces = trigger_update(s)
        dests = router.destinations(j, len(pieces))
        for piece, d in zip(pieces, dests):
            if d not in allowed[j]:
                raise ScheduleError(f"node {j + 1} cannot transmit to node {d + 1}")
            inbox[d].append(TokenMessage(piece, origin=j, dest=d))
            sent += 1
            external += d != j
    new_states = []
    for j, s in enumerate(states):
        s = aggregate(s, inbox[j], j)
        if s.z > 0:
            s = refresh(s)
        new_states.append(s)
    return new_states, make_record(k + 1, new_states, targets, sent, external)


# ---- whole runs --------------------------------------------------------------

@dataclass
class SimConfig:
    graph: Digraph
    init: Sequence[int]
    seed: int = 0
    max_rounds: int = 100_000
    policy: Optional[TransmissionPolicy] = None
    schedule: Optional[Sequence[RoundSchedule]] = None
    repeat_schedule: bool = False
    confirm_window: Optional[int] = None
    allow_disconnected: bool = False
    run_id: int = 0

    def __post_init__(self) -> None:
        if len(self.init) != self.graph.n:
            raise ValueError(f"{len(self.init)} initial values for {self.graph.n} nodes")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.confirm_window is not None and self.confirm_window < 1:
            raise ValueError("confirm_window must be >= 1")
        if self.schedule is not None and not self.schedule:
            raise ValueError("scripted mode needs at least one round")

    @property
    def window(self) -> int:
        return self.confirm_window if self.confirm_window is not None else self.graph.n

    @property
    def mode(self) -> str:
        return "random" if self.schedule is None else "scripted"


@dataclass
class SimResult:
    trace: list[TraceRecord]
    converged: bool
    k0: Optional[int]
    rounds: int
    messages: int
    messages_external: int
    q_floor: int
    q_ceil: int
    schedule_exhausted: bool = False
    final_q_s: list[int] = field(default_factory=list)


def derive_seed(master: int, *keys: int) -> int:
    """Independent 64-bit stream seed for ``(master, *keys)``."""
    ss = np.random.SeedSequence([int(master), *map(int, keys)])
    return int(ss.generate_state(1, np.uint64)[0])


def run(cfg: SimConfig) -> SimResult:
    """Iterate rounds until convergence holds for ``cfg.window`` consecutive
    snapshots, ``max_rounds`` rounds have run, or a script runs out.

    ``k0`` is the first snapshot of the final all-converged streak.  When a
    non-repeating script ends, a trailing converged streak counts even if it
    is shorter than the window.
    """
    g = cfg.graph
    if not is_strongly_connected(g):
        if not cfg.allow_disconnected:
            raise NotStronglyConnected("digraph is not strongly connected")
        warnings.warn("running on a digraph that is not strongly connected", stacklevel=2)
    avg = exact_average(cfg.init)
    targets = (avg.q_floor, avg.q_ceil)

    if cfg.schedule is None:
        policy = cfg.policy or uniform_policy(g)
        policy.validate(g)
        random_router: Optional[RandomRouter] = RandomRouter(
            policy, random.Random(derive_seed(cfg.seed, cfg.run_id))
        )
    else:
        random_router = None

    states = [init_node(int(v)) for v in cfg.init]
    rec = make_record(0, states, targets)
    trace = [rec]
    streak: Optional[int] = 0 if rec.converged else None
    window = cfg.window
    messages = external = 0
    exhausted = False

    for k in range(cfg.max_rounds):
        if streak is not None and k - streak + 1 >= window:
            break
        if random_router is not None:
            router: Router = random_router
        else:
            assert cfg.schedule is not None
            if k < len(cfg.schedule):
                router = cfg.schedule[k]
            elif cfg.repeat_schedule:
                router = cfg.schedule[k % len(cfg.schedule)]
            else:
                exhausted = True
                break
        states, rec = step(g, states, router, k=k, targets=targets)
        trace.append(rec)
        messages += rec.sent
        external += rec.sent_external
        if rec.converged:
            if streak is None:
                streak = rec.k
        else:
            streak = None

    last = trace[-1].k
    confirmed = streak is not None and (last - streak + 1 >= window or exhausted)
    return SimResult(
        trace=trace,
        converged=confirmed,
        k0=streak if confirmed else None,
        rounds=last,
        messages=messages,
        messages_external=external,
        q_floor=avg.q_floor,
        q_ceil=avg.q_ceil,
        schedule_exhausted=exhausted,
        final_q_s=trace[-1].q_s,
    )


# ---- schedule files ----------------------------------------------------------

_ROUND_RE = re.compile(r"^\s*(\d+)\s*:\s*(.*)$")
_ARROW_RE = re.compile(r"^\s*(\d+)\s*->\s*(\d+)\s*$")


def parse_schedule(text: str) -> list[RoundSchedule]:
    """Parse ``k: j->dest[,j->dest...]`` lines with 1-based node labels.

    A node emitting several pieces appears once per piece, in piece order.
    Rounds must be numbered contiguously from 0.
    """
    rounds: dict[int, dict[int, list[int]]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _ROUND_RE.match(line)
        if not m:
            raise ScheduleError(f"line {lineno}: expected 'k: j->dest,...', got {raw!r}")
        k = int(m.group(1))
        if k in rounds:
            raise ScheduleError(f"line {lineno}: round {k} listed twice")
        routes: dict[int, list[int]] = {}
        body = m.group(2).strip()
        for item in filter(None, (p.strip() for p in body.split(","))):
            a = _ARROW_RE.match(item)
            if not a:
                raise ScheduleError(f"line {lineno}: bad route {item!r}")
            j, d = int(a.group(1)) - 1, int(a.group(2)) - 1
            if j < 0 or d < 0:
                raise ScheduleError(f"line {lineno}: node labels are 1-based")
            routes.setdefault(j, []).append(d)
        rounds[k] = routes
    if sorted(rounds) != list(range(len(rounds))):
        raise ScheduleError(f"rounds must be numbered 0..{len(rounds) - 1}, got {sorted(rounds)}")
    return [
        RoundSchedule({j: tuple(ds) for j, ds in rounds[k].items()}) for k in range(len(rounds))
    ]


def format_schedule(schedule: Iterable[RoundSchedule]) -> str:
    lines = []
    for k, rs in enumerate(schedule):
        items = [f"{j + 1}->{d + 1}" for j in sorted(rs.routes) for d in rs.routes[j]]
        lines.append(f"{k}: " + ",".join(items))
    return "\n".join(lines) + "\n"


# ---- trace CSV -----------------------------------------------------------------

def write_trace_csv(
    fh: TextIO, results: Iterable[tuple[int, Sequence[TraceRecord]]], meta: dict[str, object]
) -> None:
    """Write ``# key=value`` metadata lines, then one row per (round, node)."""
    for key, value in meta.items():
        fh.write(f"# {key}={value}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for run_id, trace in results:
        for rec in trace:
            for j, s in enumerate(rec.states):
                w.writerow((
                    run_id, rec.k, j + 1, s.y, s.z, s.y_s, s.z_s, s.q_s,
                    rec.mass_total, rec.count_total, int(rec.converged),
                ))


def trace_csv_text(trace: Sequence[TraceRecord], meta: dict[str, object], run_id: int = 0) -> str:
    buf = io.StringIO()
    write_trace_csv(buf, [(run_id, trace)], meta)
    return buf.getvalue()


def read_trace_csv(fh: TextIO) -> dict[tuple[int, int], dict[str, int]]:
    """Rows keyed by ``(k, node)`` with 1-based node labels; metadata lines skipped."""
    rows = csv.DictReader(line for line in fh if not line.startswith("#"))
    out = {}
    for row in rows:
        key = (int(row["k"]), int(row["node"]))
        out[key] = {c: int(row[c]) for c in TRACE_COLUMNS if c not in ("k", "node")}
    return out
