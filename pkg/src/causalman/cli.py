"""``causalman`` command line.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io, metrics
from .line import PRESETS, config_to_dict, default_schedule, node_census, preset
from .projection import latent_project
from .sampling import BatchConfig, observe, sample_schedule
from .scm import DomainError, GraphError, HardIntervention, coerce_value
from .serialize import FormatError
from .tasks import TASK_IDS, builtin_task, ground_truth_effect

EXIT_USAGE = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


class IOFailure(Exception):
    pass


def _graph(source):
    try:
        return io.load_graph(source)
    except OSError as exc:
        raise IOFailure(f"cannot read graph {source!r}: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid graph {source!r}: {exc}") from None


def _outdir(path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create output directory {path!r}: {exc}") from None
    return p


def _write_outputs(out: Path, graph, ds, manifest, observable_only: bool):
    if observable_only:
        ds = observe(ds)
    try:
        io.write_csv(ds, out / "data.csv")
        io.write_json(manifest.to_dict(), out / "manifest.json")
        io.write_graph_json(graph, out / "graph.json")
        io.write_edge_list(io.graph_edge_list(graph), out / "graph.txt")
    except OSError as exc:
        raise IOFailure(f"cannot write outputs to {out}: {exc}") from None
    return ds


def cmd_sample(args) -> int:
    graph = _graph(args.graph)
    try:
        batches = io.read_schedule(graph, args.schedule)
    except OSError as exc:
        raise UsageError(f"cannot read schedule {args.schedule!r}: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid schedule: {exc}") from None
    try:
        ds = sample_schedule(graph, batches, args.seed, args.threads)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    manifest = io.make_manifest("sample", graph, args.seed, batches, ds,
                                observable_only=args.observable_only)
    ds = _write_outputs(_outdir(args.out), graph, ds, manifest, args.observable_only)
    print(f"wrote {ds.n_rows} rows x {len(ds.names)} columns to {args.out}")
    return 0


def _parse_do(graph, items) -> list[HardIntervention]:
    out = []
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--do expects NODE=VALUE, got {item!r}")
        try:
            spec = graph.node(name)
        except KeyError:
            raise UsageError(f"unknown node {name!r}") from None
        try:
            coerce_value(spec.domain, value)
        except DomainError as exc:
            raise UsageError(f"--do {item}: {exc}") from None
        out.append(HardIntervention(spec.id, value))
    return out


def cmd_intervene(args) -> int:
    graph = _graph(args.graph)
    ivs = _parse_do(graph, args.do)
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    batches = [BatchConfig(args.batch_id, args.n, interventions=tuple(ivs))]
    ds = sample_schedule(graph, batches, args.seed, args.threads)
    manifest = io.make_manifest("intervene", graph, args.seed, batches, ds,
                                observable_only=args.observable_only)
    ds = _write_outputs(_outdir(args.out), graph, ds, manifest, args.observable_only)
    print(f"wrote {ds.n_rows} interventional rows to {args.out}")
    return 0


def cmd_project(args) -> int:
    graph = _graph(args.graph)
    admg = latent_project(graph)
    try:
        io.write_edge_list(io.admg_edge_list(admg, graph), args.out)
    except OSError as exc:
        raise IOFailure(f"cannot write {args.out!r}: {exc}") from None
    c = node_census(graph)
    print(",".join(c.as_dict()))
    print(",".join(str(v) for v in c.as_dict().values()))
    return 0


def _read_frame(path):
    import pandas as pd
    try:
        frame = pd.read_csv(path, keep_default_na=False)
    except OSError as exc:
        raise IOFailure(f"cannot read {path!r}: {exc}") from None
    return frame.drop(columns=[c for c in ("batch_id",) if c in frame.columns])


def _numeric(frame, cols):
    out = []
    for c in cols:
        if c not in frame.columns:
            raise UsageError(f"column {c!r} not in input")
        s = frame[c]
        if s.dtype == object:
            low = s.astype(str).str.lower()
            if set(low) <= {"true", "false"}:
                s = (low == "true")
            else:
                raise UsageError(f"column {c!r} is not numeric")
        out.append(s.to_numpy(dtype=float))
    return np.column_stack(out)


def _admg(path):
    try:
        return io.read_edge_list(path).to_admg()
    except OSError as exc:
        raise IOFailure(f"cannot read {path!r}: {exc}") from None


def _shared_hist(x, y, bins):
    if any(a.dtype.kind in "bO" for a in (x, y)) or bins is None:
        labels = sorted(set(map(str, x)) | set(map(str, y)))
        px = np.array([np.mean(x.astype(str) == v) for v in labels])
        py = np.array([np.mean(y.astype(str) == v) for v in labels])
        return px, py
    lo, hi = min(x.min(), y.min()), max(x.max(), y.max())
    if hi == lo:
        return np.ones(1), np.ones(1)
    edges = np.linspace(lo, hi, bins + 1)
    hx, _ = np.histogram(x, edges)
    hy, _ = np.histogram(y, edges)
    return hx / hx.sum(), hy / hy.sum()


def cmd_metrics(args) -> int:
    m = args.metric
    if m in ("shd", "pr"):
        pred, truth = _admg(args.pred), _admg(args.truth)
        if set(pred.nodes) != set(truth.nodes):
            raise UsageError("graphs are over different node sets")
        nodes = list(truth.nodes)
        dp, _ = metrics.admg_adjacency(pred, nodes)
        dt, _ = metrics.admg_adjacency(truth, nodes)
        if m == "shd":
            print("shd_directed,shd_with_bidirected")
            print(f"{metrics.shd(dp, dt)},{metrics.shd_admg(pred, truth, True)}")
        else:
            c = metrics.edge_counts(dp, dt)
            print("precision,recall,precision_defined,recall_defined")
            print(f"{c.precision!r},{c.recall!r},{str(c.precision_defined).lower()},"
                  f"{str(c.recall_defined).lower()}")
        return 0
    fx, fy = _read_frame(args.x), _read_frame(args.y)
    if m == "jsd":
        if args.column is None:
            raise UsageError("jsd needs --column")
        for f in (fx, fy):
            if args.column not in f.columns:
                raise UsageError(f"column {args.column!r} not in input")
        p, q = _shared_hist(fx[args.column].to_numpy(), fy[args.column].to_numpy(), args.bins)
        value = metrics.jsd(p, q)
    elif m == "mmd":
        cols = args.columns.split(",") if args.columns else [c for c in fx.columns if c in fy.columns]
        value = metrics.mmd(_numeric(fx, cols), _numeric(fy, cols))
    elif m in ("mse", "ate"):
        if args.column is None:
            raise UsageError(f"{m} needs --column")
        u, v = _numeric(fx, [args.column])[:, 0], _numeric(fy, [args.column])[:, 0]
        value = metrics.mse(u, v) if m == "mse" else metrics.ate(u, v)
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown metric {m}")
    print(m)
    print(repr(float(value)))
    return 0


def cmd_task(args) -> int:
    if args.id not in TASK_IDS:
        raise UsageError(f"unknown task {args.id!r}; known: {', '.join(TASK_IDS)}")
    graph = _graph(args.graph)
    task = builtin_task(args.id)
    try:
        est = ground_truth_effect(graph, task, args.n, args.seed, threads=args.threads)
    except KeyError as exc:
        raise UsageError(f"task node missing from graph: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print("task_id,effect,se,n,seed,treated_mean,control_mean")
    print(f"{task.task_id},{est.effect!r},{est.se!r},{args.n},{args.seed},"
          f"{est.treated_mean!r},{est.control_mean!r}")
    return 0


def cmd_schedule(args) -> int:
    graph = _graph(args.graph)
    batches = default_schedule(args.n_rows, args.batch_size)
    doc = io.schedule_to_dict(graph, batches)
    try:
        io.write_json(doc, args.out)
    except OSError as exc:
        raise IOFailure(f"cannot write {args.out!r}: {exc}") from None
    return 0


def cmd_config(args) -> int:
    try:
        cfg = preset(args.preset)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    json.dump(config_to_dict(cfg), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causalman", description="Press-fit line SCM simulator")
    sub = p.add_subparsers(dest="command", required=True)
    graph_help = f"preset name ({', '.join(PRESETS)}) or graph/line-config JSON file"

    def common(sp, out=True):
        sp.add_argument("--graph", required=True, help=graph_help)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $CAUSALMAN_THREADS or 1)")
        if out:
            sp.add_argument("--out", required=True, help="output directory")
            sp.add_argument("--observable-only", action="store_true")
            sp.add_argument("--format", choices=["csv"], default="csv")

    sp = sub.add_parser("sample", help="sample a batch schedule")
    common(sp)
    sp.add_argument("--schedule", required=True, help="schedule JSON file")
    sp.set_defaults(fn=cmd_sample)

    sp = sub.add_parser("intervene", help="sample one interventional batch")
    common(sp)
    sp.add_argument("--do", action="append", required=True, metavar="NODE=VALUE")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--batch-id", type=int, default=0)
    sp.set_defaults(fn=cmd_intervene)

    sp = sub.add_parser("project", help="latent projection to an ADMG edge list")
    sp.add_argument("--graph", required=True, help=graph_help)
    sp.add_argument("--out", required=True, help="edge-list output file")
    sp.set_defaults(fn=cmd_project)

    sp = sub.add_parser("metrics", help="evaluation metrics")
    sp.add_argument("metric", choices=["shd", "pr", "jsd", "mmd", "mse", "ate"])
    sp.add_argument("--pred", help="predicted edge list (shd, pr)")
    sp.add_argument("--truth", help="true edge list (shd, pr)")
    sp.add_argument("--x", help="first CSV (jsd, mmd, mse) or treated arm (ate)")
    sp.add_argument("--y", help="second CSV (jsd, mmd, mse) or control arm (ate)")
    sp.add_argument("--column", help="column for jsd, mse, ate")
    sp.add_argument("--columns", help="comma-separated columns for mmd (default: shared)")
    sp.add_argument("--bins", type=int, default=20, help="histogram bins for continuous jsd")
    sp.set_defaults(fn=cmd_metrics)

    sp = sub.add_parser("task", help="benchmark tasks")
    tsub = sp.add_subparsers(dest="task_command", required=True)
    tp = tsub.add_parser("run", help="Monte-Carlo ground truth of a built-in task")
    tp.add_argument("--id", required=True)
    common(tp, out=False)
    tp.add_argument("--n", type=int, default=10_000, help="samples per arm")
    tp.set_defaults(fn=cmd_task)

    sp = sub.add_parser("schedule", help="write an observational batch schedule")
    sp.add_argument("--graph", required=True, help=graph_help)
    sp.add_argument("--n-rows", type=int, required=True)
    sp.add_argument("--batch-size", type=int, default=1000)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_schedule)

    sp = sub.add_parser("config", help="print a preset's line configuration as JSON")
    sp.add_argument("preset")
    sp.set_defaults(fn=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "metrics":
        need = ("pred", "truth") if args.metric in ("shd", "pr") else ("x", "y")
        missing = [f"--{n}" for n in need if getattr(args, n) is None]
        if missing:
            parser.error(f"metrics {args.metric} needs {' '.join(missing)}")
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"causalman: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IOFailure as exc:
        print(f"causalman: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (GraphError, DomainError, FormatError) as exc:
        print(f"causalman: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"causalman: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
