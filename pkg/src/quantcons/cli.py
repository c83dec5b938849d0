"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 validation or I/O error,
3 non-convergence, bound violation or golden-trace mismatch.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, fixtures
from .experiments import Campaign, CampaignResult, load_campaign, run_campaign
from .graph import Digraph, GraphError, format_edges, random_strongly_connected, uniform_policy
from .oracle import check_prop1_bound
from .protocol import ProtocolError
from .sim import (
    NotStronglyConnected,
    ScheduleError,
    SimConfig,
    SimResult,
    TraceRecord,
    parse_schedule,
    read_trace_csv,
    run,
    write_trace_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_FAILED = 0, 1, 2, 3
FIELDS = ("y", "z", "ys", "zs", "qs")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def metadata(command: str, seed: object, config: dict) -> dict[str, object]:
    return {
        "tool": f"quantcons {__version__}",
        "command": command,
        "seed": seed,
        "config_hash": config_hash(config),
        "config": json.dumps(config, sort_keys=True, default=str),
    }


def _parse_init(text: Optional[str], graph_ref: str, n: int) -> list[int]:
    if text is None:
        if graph_ref in fixtures.INITS:
            return list(fixtures.INITS[graph_ref])
        raise UsageError("--init is required for a graph file")
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--init must be comma-separated integers, got {text!r}") from None
    if len(vals) != n:
        raise GraphError(f"--init has {len(vals)} values but the digraph has {n} nodes")
    return vals


def _graph_config(g: Digraph, ref: str) -> dict:
    return {"graph": ref, "n": g.n, "edges": [[j + 1, i + 1] for j, i in g.sorted_edges()]}


def _q_set(res: SimResult) -> str:
    return "{" + ",".join(str(q) for q in sorted({res.q_floor, res.q_ceil})) + "}"


def _summary(res: SimResult) -> str:
    if res.converged:
        return f"converged k0={res.k0} qs in {_q_set(res)} final qs={res.final_q_s}"
    return (
        f"not converged after {res.rounds} rounds (target qs in {_q_set(res)}, "
        f"final qs={res.final_q_s})"
    )


def _write_outputs(out: Optional[str], name: str, trace: Sequence[TraceRecord],
                   meta: dict, run_id: int, emit_plot: bool) -> None:
    if out is None:
        return
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / f"{name}.csv", "w", newline="") as fh:
        write_trace_csv(fh, [(run_id, trace)], meta)
    if emit_plot:
        _write_plot_data(outdir / f"{name}_plot.csv", [(run_id, [r.q_s for r in trace])], meta)


def _write_plot_data(path: Path, series: Sequence[tuple[int, Sequence[Sequence[int]]]],
                     meta: dict) -> None:
    with open(path, "w", newline="") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}={value}\n")
        w = csv.writer(fh, lineterminator="\n")
        n = len(series[0][1][0]) if series and series[0][1] else 0
        w.writerow(["run_id", "k", *[f"q{j + 1}" for j in range(n)]])
        for run_id, rows in series:
            for k, qs in enumerate(rows):
                w.writerow([run_id, k, *qs])


# ---- subcommands --------------------------------------------------------------

def cmd_run(args: argparse.Namespace) -> int:
    g = fixtures.resolve_graph(args.graph)
    init = _parse_init(args.init, args.graph, g.n)
    schedule = parse_schedule(Path(args.schedule).read_text()) if args.schedule else None
    cfg = SimConfig(
        graph=g, init=init, seed=args.seed, max_rounds=args.max_rounds, schedule=schedule,
        repeat_schedule=args.repeat_schedule, confirm_window=args.window,
        allow_disconnected=args.allow_disconnected,
    )
    config = {**_graph_config(g, args.graph), "init": init, "max_rounds": args.max_rounds,
              "mode": cfg.mode, "schedule": args.schedule, "window": cfg.window,
              "repeat_schedule": args.repeat_schedule}
    res = run(cfg)
    _write_outputs(args.out, "trace", res.trace, metadata("run", args.seed, config), 0,
                   args.emit_plot_data)
    print(_summary(res))
    return EXIT_OK if res.converged else EXIT_FAILED


def _golden_from_tables() -> dict[tuple[int, int], dict[str, int]]:
    out = {}
    for k, rows in enumerate(fixtures.EXAMPLE1_TABLES):
        for j, vals in enumerate(rows):
            out[(k, j + 1)] = dict(zip(FIELDS, vals))
    return out


def first_mismatch(trace: Sequence[TraceRecord],
                   golden: dict[tuple[int, int], dict[str, int]]) -> Optional[str]:
    got = {}
    for rec in trace:
        for j, s in enumerate(rec.states):
            got[(rec.k, j + 1)] = dict(zip(FIELDS, s.as_tuple()))
    for key in sorted(set(golden) | set(got)):
        k, node = key
        if key not in got:
            return f"k={k} node={node}: missing from replay"
        if key not in golden:
            return f"k={k} node={node}: not in golden fixture"
        for f in FIELDS:
            if f in golden[key] and golden[key][f] != got[key][f]:
                return f"k={k} node={node} field={f}: expected {golden[key][f]}, got {got[key][f]}"
    return None


def cmd_replay(args: argparse.Namespace) -> int:
    if args.example is not None:
        if args.example != "example1":
            raise UsageError(f"unknown built-in example {args.example!r} (known: example1)")
        graph_ref = args.graph or "fig1"
        schedule_text = (
            Path(args.schedule).read_text() if args.schedule else fixtures.EXAMPLE1_SCHEDULE_TEXT
        )
        init_text = args.init or ",".join(map(str, fixtures.FIG1_INIT))
    else:
        if not (args.schedule and args.graph):
            raise UsageError("replay needs a built-in example or --graph and --schedule")
        graph_ref, schedule_text, init_text = args.graph, Path(args.schedule).read_text(), args.init
    g = fixtures.resolve_graph(graph_ref)
    init = _parse_init(init_text, graph_ref, g.n)
    cfg = SimConfig(
        graph=g, init=init, seed=args.seed, max_rounds=args.max_rounds,
        schedule=parse_schedule(schedule_text), repeat_schedule=args.repeat_schedule,
        confirm_window=args.window,
    )
    config = {**_graph_config(g, graph_ref), "init": init, "schedule": schedule_text,
              "max_rounds": args.max_rounds, "repeat_schedule": args.repeat_schedule}
    res = run(cfg)
    _write_outputs(args.out, "replay", res.trace, metadata("replay", args.seed, config), 0,
                   args.emit_plot_data)

    golden = None
    if args.golden:
        with open(args.golden, newline="") as fh:
            golden = read_trace_csv(fh)
    elif args.example == "example1" and not args.schedule:
        golden = _golden_from_tables()
    if golden is not None:
        diff = first_mismatch(res.trace, golden)
        if diff is not None:
            print(f"FAIL {diff}")
            return EXIT_FAILED
        print(f"PASS final qs={res.final_q_s} q_floor={res.q_floor} q_ceil={res.q_ceil}")
        return EXIT_OK
    print(_summary(res))
    return EXIT_OK if res.converged else EXIT_FAILED


def _campaign_from_args(args: argparse.Namespace) -> Campaign:
    if args.config:
        c = load_campaign(args.config)
    else:
        c = Campaign()
    overrides = {
        "num_graphs": args.num_graphs, "n": args.n, "extra_edge_prob": args.extra_edge_prob,
        "total": args.total, "lo": args.lo, "hi": args.hi, "seed": args.seed,
        "max_rounds": args.max_rounds, "init_policy": args.init_policy,
    }
    params = {k: v for k, v in vars(c).items()}
    params.update({k: v for k, v in overrides.items() if v is not None})
    return Campaign(**params)


def write_campaign_csv(path: Path, result: CampaignResult, meta: dict) -> None:
    with open(path, "w", newline="") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}={value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run_id", "graph_seed", "run_seed", "edges", "converged", "k0", "rounds",
                    "messages", "messages_external", "conservation_ok", "q_floor", "q_ceil",
                    "final_qs"])
        for r in result.rows:
            w.writerow([r.index, r.graph_seed, r.run_seed, r.edges, int(r.converged),
                        "" if r.k0 is None else r.k0, r.rounds, r.messages, r.messages_external,
                        int(r.conservation_ok), r.q_floor, r.q_ceil,
                        " ".join(map(str, r.final_q_s))])


def cmd_campaign(args: argparse.Namespace) -> int:
    c = _campaign_from_args(args)
    result = run_campaign(c, parallel=args.parallel, keep_series=args.emit_plot_data)
    agg = result.aggregates()
    meta = metadata("campaign", c.seed, c.describe())
    if args.out is not None:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        write_campaign_csv(outdir / "campaign.csv", result, meta)
        with open(outdir / "campaign_summary.json", "w") as fh:
            json.dump({"meta": meta, "aggregates": agg}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if args.emit_plot_data:
            _write_plot_data(outdir / "campaign_plot.csv",
                             [(r.index, r.q_series or []) for r in result.rows], meta)
    targets = sorted({q for r in result.rows for q in (r.q_floor, r.q_ceil)})
    converged = sum(r.converged for r in result.rows)
    mean = agg["k0_mean"]
    print(
        f"campaign runs={len(result.rows)} converged={converged}/{len(result.rows)} "
        f"rate={agg['convergence_rate']:.3f} "
        f"k0_mean={'n/a' if mean is None else f'{mean:.2f}'} k0_median={agg['k0_median']} "
        f"k0_max={agg['k0_max']} conserved={agg['all_conserved']} "
        f"targets={{{','.join(map(str, targets))}}}"
    )
    ok = converged == len(result.rows) and agg["all_conserved"]
    return EXIT_OK if ok else EXIT_FAILED


def cmd_bound_check(args: argparse.Namespace) -> int:
    g = fixtures.resolve_graph(args.graph)
    chk = check_prop1_bound(uniform_policy(g), g)
    verdict = "HOLDS" if chk.holds else "VIOLATED"
    i, j = chk.argmin
    print(f"min={chk.min_entry}, bound={chk.bound}, {verdict} (argmin row={i + 1} col={j + 1})")
    if args.out is not None:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        meta = metadata("bound-check", None, _graph_config(g, args.graph))
        with open(outdir / "bound_check.csv", "w", newline="") as fh:
            for key, value in meta.items():
                fh.write(f"# {key}={value}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "max_out_degree", "min_entry", "bound", "holds"])
            w.writerow([g.n, g.max_out_degree, chk.min_entry, chk.bound, int(chk.holds)])
    return EXIT_OK if chk.holds else EXIT_FAILED


def cmd_gen_graph(args: argparse.Namespace) -> int:
    g = random_strongly_connected(args.n, args.extra_edge_prob, args.seed)
    config = {"n": args.n, "extra_edge_prob": args.extra_edge_prob,
              "model": "hamiltonian_cycle+bernoulli"}
    header = "".join(f"# {k}={v}\n" for k, v in metadata("gen-graph", args.seed, config).items())
    text = header + format_edges(g)
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
        print(f"wrote {args.out} n={g.n} edges={len(g.edges)}")
    return EXIT_OK


# ---- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="quantcons", description="Quantized average consensus via mass splitting.")
    p.add_argument("--version", action="version", version=f"quantcons {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def sim_flags(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--init", help="comma-separated initial integers")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--max-rounds", type=int, default=100_000)
        sp.add_argument("--schedule", help="scripted schedule file")
        sp.add_argument("--repeat-schedule", action="store_true",
                        help="cycle the scripted schedule instead of stopping at its end")
        sp.add_argument("--window", type=int, help="confirmation window (default n)")
        sp.add_argument("--out", help="output directory for CSV files")
        sp.add_argument("--emit-plot-data", action="store_true")

    sp = sub.add_parser("run", help="simulate one run")
    sp.add_argument("--graph", required=True, help="edge-list file or fig1/fig2")
    sim_flags(sp)
    sp.add_argument("--allow-disconnected", action="store_true")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("replay", help="scripted replay, optionally checked against a golden trace")
    sp.add_argument("example", nargs="?", help="built-in example id (example1)")
    sp.add_argument("--graph")
    sp.add_argument("--golden", help="golden trace CSV to diff against")
    sim_flags(sp)
    sp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("campaign", help="batch runs over generated digraphs")
    sp.add_argument("--config", help="campaign INI file with a [campaign] section")
    sp.add_argument("--num-graphs", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--extra-edge-prob", type=float)
    sp.add_argument("--init-policy", choices=("uniform", "fixed_sum"))
    sp.add_argument("--total", type=int)
    sp.add_argument("--lo", type=int)
    sp.add_argument("--hi", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--max-rounds", type=int)
    sp.add_argument("--parallel", type=int, default=1)
    sp.add_argument("--out")
    sp.add_argument("--emit-plot-data", action="store_true")
    sp.set_defaults(func=cmd_campaign)

    sp = sub.add_parser("bound-check", help="exact token-probability bound on B^(n-1)")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bound_check)

    sp = sub.add_parser("gen-graph", help="random strongly connected digraph")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--extra-edge-prob", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen_graph)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotStronglyConnected as exc:
        print(f"invalid input: {exc}; the protocol requires a strongly connected digraph "
              "(use --allow-disconnected to override)", file=sys.stderr)
        return EXIT_INVALID
    except (GraphError, ScheduleError, ProtocolError, ValueError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
