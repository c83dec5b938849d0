"""Seeded batch campaigns over generated digraphs, plus token-walk Monte Carlo."""
from __future__ import annotations

import configparser
import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .graph import (
    Digraph,
    TransmissionPolicy,
    is_strongly_connected,
    load_digraph,
    random_strongly_connected,
    uniform_policy,
)
from .fixtures import GRAPHS, resolve_graph
from .oracle import audit_conservation, exact_average
from .sim import SimConfig, SimResult, derive_seed, run

INIT_POLICIES = ("fixed", "uniform", "fixed_sum")

# Stream labels mixed into derive_seed so graph, init and routing draws never share a stream.
_GRAPH_STREAM, _INIT_STREAM, _RUN_STREAM = 1, 2, 3


class CampaignError(RuntimeError):
    pass


@dataclass
class Campaign:
    num_graphs: int = 100
    n: int = 20
    extra_edge_prob: float = 0.1
    init_policy: str = "fixed_sum"
    init_values: Optional[tuple[int, ...]] = None
    lo: int = 0
    hi: int = 65
    total: int = 651
    seed: int = 0
    max_rounds: int = 100_000
    confirm_window: Optional[int] = None
    graph_retries: int = 10
    fixed_graph: Optional[Digraph] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.num_graphs < 1:
            raise ValueError("num_graphs must be >= 1")
        if self.init_policy not in INIT_POLICIES:
            raise ValueError(f"init_policy must be one of {INIT_POLICIES}, got {self.init_policy!r}")
        if self.init_policy == "fixed":
            if self.init_values is None or len(self.init_values) != self.n:
                raise ValueError("fixed init_policy needs init_values of length n")
        if self.lo > self.hi:
            raise ValueError("lo must not exceed hi")
        if self.fixed_graph is not None and self.fixed_graph.n != self.n:
            raise ValueError("fixed_graph size differs from n")

    def describe(self) -> dict[str, object]:
        """Flat parameters for output metadata (the graph model is always recorded)."""
        d = {k: v for k, v in asdict(self).items() if k != "fixed_graph"}
        d["graph_model"] = (
            "fixed" if self.fixed_graph is not None else "hamiltonian_cycle+bernoulli"
        )
        return d


@dataclass
class RunRow:
    index: int
    graph_seed: int
    run_seed: int
    converged: bool
    k0: Optional[int]
    rounds: int
    messages: int
    messages_external: int
    conservation_ok: bool
    edges: int
    q_floor: int
    q_ceil: int
    final_q_s: list[int] = field(default_factory=list)
    q_series: Optional[list[list[int]]] = field(default=None, repr=False)


@dataclass
class CampaignResult:
    rows: list[RunRow]

    @property
    def convergence_rate(self) -> float:
        return sum(r.converged for r in self.rows) / len(self.rows)

    @property
    def k0_values(self) -> list[int]:
        return [r.k0 for r in self.rows if r.k0 is not None]

    def aggregates(self) -> dict[str, object]:
        ks = self.k0_values
        return {
            "runs": len(self.rows),
            "convergence_rate": self.convergence_rate,
            "k0_mean": statistics.fmean(ks) if ks else None,
            "k0_median": statistics.median(ks) if ks else None,
            "k0_max": max(ks) if ks else None,
            "messages_mean": statistics.fmean(r.messages for r in self.rows),
            "messages_external_mean": statistics.fmean(r.messages_external for r in self.rows),
            "all_conserved": all(r.conservation_ok for r in self.rows),
        }


def fixed_sum_values(n: int, total: int, lo: int, hi: int, rng: random.Random) -> list[int]:
    """Uniform draws in ``[lo, hi]`` with the last entry adjusted to hit ``total``.

    The adjusted entry may fall outside ``[lo, hi]``.
    """
    vals = [rng.randint(lo, hi) for _ in range(n - 1)]
    vals.append(total - sum(vals))
    return vals


def initial_values(c: Campaign, index: int) -> list[int]:
    if c.init_policy == "fixed":
        assert c.init_values is not None
        return list(c.init_values)
    rng = random.Random(derive_seed(c.seed, _INIT_STREAM, index))
    if c.init_policy == "uniform":
        return [rng.randint(c.lo, c.hi) for _ in range(c.n)]
    return fixed_sum_values(c.n, c.total, c.lo, c.hi, rng)


def campaign_graph(c: Campaign, index: int) -> tuple[Digraph, int]:
    if c.fixed_graph is not None:
        return c.fixed_graph, 0
    for attempt in range(c.graph_retries):
        gseed = derive_seed(c.seed, _GRAPH_STREAM, index, attempt)
        g = random_strongly_connected(c.n, c.extra_edge_prob, gseed)
        if is_strongly_connected(g):
            return g, gseed
    raise CampaignError(f"run {index}: no strongly connected digraph after {c.graph_retries} tries")


def run_one(c: Campaign, index: int, keep_series: bool = False) -> RunRow:
    g, gseed = campaign_graph(c, index)
    init = initial_values(c, index)
    run_seed = derive_seed(c.seed, _RUN_STREAM, index)
    res = run(SimConfig(
        graph=g, init=init, seed=run_seed, max_rounds=c.max_rounds,
        confirm_window=c.confirm_window, run_id=index,
    ))
    return _row(index, gseed, run_seed, g, init, res, keep_series)


def _row(index: int, gseed: int, run_seed: int, g: Digraph, init: Sequence[int],
         res: SimResult, keep_series: bool) -> RunRow:
    return RunRow(
        index=index,
        graph_seed=gseed,
        run_seed=run_seed,
        converged=res.converged,
        k0=res.k0,
        rounds=res.rounds,
        messages=res.messages,
        messages_external=res.messages_external,
        conservation_ok=audit_conservation(res.trace, exact_average(init).sum_S, g.n),
        edges=len(g.edges),
        q_floor=res.q_floor,
        q_ceil=res.q_ceil,
        final_q_s=res.final_q_s,
        q_series=[rec.q_s for rec in res.trace] if keep_series else None,
    )


def _run_star(args: tuple[Campaign, int, bool]) -> RunRow:
    return run_one(*args)


def run_campaign(c: Campaign, parallel: int = 1, keep_series: bool = False) -> CampaignResult:
    """Generate, check, simulate and audit every run; rows come back in index order."""
    jobs = [(c, i, keep_series) for i in range(c.num_graphs)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(_run_star, jobs, chunksize=max(1, len(jobs) // (4 * parallel))))
    else:
        rows = [_run_star(j) for j in jobs]
    rows.sort(key=lambda r: r.index)
    return CampaignResult(rows)


# ---- config files ------------------------------------------------------------

def load_campaign(path: Union[str, Path]) -> Campaign:
    """Read a ``[campaign]`` INI section.  Keys mirror :class:`Campaign` fields;
    ``init_values`` is a comma-separated integer list and ``graph`` an edge-list
    path (relative to the config file) or built-in name that replaces random generation."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(path)
    if "campaign" not in cp:
        raise ValueError(f"{path}: missing [campaign] section")
    sec = cp["campaign"]
    known = {
        "num_graphs": int, "n": int, "extra_edge_prob": float, "init_policy": str,
        "lo": int, "hi": int, "total": int, "seed": int, "max_rounds": int,
        "confirm_window": int, "graph_retries": int,
    }
    kwargs: dict[str, object] = {}
    for key, value in sec.items():
        if key == "init_values":
            kwargs[key] = tuple(int(v) for v in value.split(","))
        elif key == "graph":
            kwargs["fixed_graph"] = (
                resolve_graph(value) if value in GRAPHS else load_digraph(Path(path).parent / value)
            )
        elif key in known:
            kwargs[key] = known[key](value)
        else:
            raise ValueError(f"{path}: unknown campaign key {key!r}")
    return Campaign(**kwargs)  # type: ignore[arg-type]


# ---- token random walks ------------------------------------------------------

def token_meeting_montecarlo(
    g: Digraph,
    trials: int,
    rng_seed: int,
    start: int = 0,
    steps: Optional[int] = None,
    policy: Optional[TransmissionPolicy] = None,
) -> np.ndarray:
    """Empirical location frequencies of one token after ``steps`` (default n-1) moves."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    policy = policy or uniform_policy(g)
    steps = g.n - 1 if steps is None else steps
    rng = np.random.default_rng(derive_seed(rng_seed, start))
    dests = []
    cums = []
    for col in policy.probs:
        d = sorted(col)
        dests.append(np.array(d))
        cums.append(np.cumsum([float(col[x]) for x in d]))
    pos = np.full(trials, start, dtype=np.int64)
    for _ in range(steps):
        u = rng.random(trials)
        nxt = np.empty_like(pos)
        for j in range(g.n):
            mask = pos == j
            if not mask.any():
                continue
            idx = np.searchsorted(cums[j], u[mask], side="right")
            nxt[mask] = dests[j][np.minimum(idx, len(dests[j]) - 1)]
        pos = nxt
    return np.bincount(pos, minlength=g.n) / trials
