"""Command line: run bundled or custom scenarios, validate configs, compare exported runs.

Exit codes: 0 success, 2 usage, 3 configuration error, 4 runtime error,
5 output directory not writable.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import bundled_scenarios, resolve
from .metrics import collect_stream_stats, compare_runs, export, load_run
from .network import Network, check_config

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_RUNTIME = 4
EXIT_OUTPUT = 5

OUT_ENV = "TSNSIM_OUT"
DEFAULT_OUT = "runs"
# keys a scenario file may carry for the command line itself; stripped before the run
CLI_KEYS = ("out_dir", "jobs")


def _err(msg):
    print(f"tsnsim: {msg}", file=sys.stderr)


# ------------------------------------------------------------ run


def plan_jobs(args):
    """(scenario, seed, out_dir, overrides) per requested combination.

    A single run writes straight into ``--out``; a batch writes one
    ``<scenario>_seed<seed>`` directory per combination below it. Without
    ``--out`` the base comes from the scenario's ``out_dir``, then the
    environment, then ``./runs``.
    """
    overrides = list(args.set or [])
    if args.window_ns is not None:
        overrides.append(f"metrics.window_ns={args.window_ns}")
    scenarios = args.scenario or ["S1A1"]
    seeds = args.seed or [None]
    batch = len(scenarios) * len(seeds) > 1
    jobs = []
    for scenario in scenarios:
        cfg = resolve(scenario, overrides)
        for seed in seeds:
            seed = int(cfg["seed"]) if seed is None else seed
            label = f"{cfg['name']}_seed{seed}"
            if args.out:
                out = Path(args.out) / label if batch else Path(args.out)
            else:
                base = cfg.get("out_dir") or os.environ.get(OUT_ENV) or DEFAULT_OUT
                out = Path(base) / label
            jobs.append((scenario, seed, str(out), overrides))
    return jobs


def run_job(job):
    """Run and export one combination; returns (exit code, message). Safe in a worker process."""
    scenario, seed, out, overrides = job
    try:
        cfg = resolve(scenario, list(overrides) + [f"seed={seed}"])
        for key in CLI_KEYS:
            cfg.pop(key, None)
        net = Network(cfg)
    except (ValueError, KeyError, TypeError) as exc:
        problems = getattr(exc, "problems", [str(exc)])
        return EXIT_CONFIG, f"{scenario}: configuration error\n" + "\n".join(f"  - {p}" for p in problems)
    try:
        Path(out).mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"{out} is not writable")
    except OSError as exc:
        return EXIT_OUTPUT, f"{scenario}: cannot write output: {exc}"
    try:
        record = net.run()
    except Exception as exc:  # noqa: BLE001 - any failure during simulation is a runtime error
        return EXIT_RUNTIME, f"{scenario} seed {seed}: runtime error: {type(exc).__name__}: {exc}"
    try:
        export(record, out)
    except OSError as exc:
        return EXIT_OUTPUT, f"{scenario}: {exc}"
    return EXIT_OK, run_line(record, out)


def run_line(record, out):
    stats = collect_stream_stats(record)
    line = f"{record.name} seed {record.seed}: {record.wall_clock_s:.2f} s wall -> {out}"
    sid = record.focus_stream
    if sid in stats:
        st = stats[sid]
        lat = st.latency.median / 1000 if st.latency else float("nan")
        rec = "-" if st.recovery_time is None else f"{st.recovery_time / 1e6:.3f} ms"
        line += (f"\n  {sid}: sent {st.sent} received {st.received} lost {st.lost} "
                 f"({st.loss_rate:.2%}) median {lat:.2f} us recovery {rec}")
    return line


def cmd_run(args):
    try:
        jobs = plan_jobs(args)
    except (ValueError, KeyError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    n = args.jobs
    if n is None:
        first = resolve(args.scenario[0]) if args.scenario else {}
        n = int(first.get("jobs", 1))
    if n > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(run_job, jobs))
    else:
        results = [run_job(job) for job in jobs]
    worst = EXIT_OK
    for code, msg in results:
        if code == EXIT_OK:
            print(msg)
        else:
            _err(msg)
            worst = max(worst, code)
    return worst


# ------------------------------------------------------------ list / validate


def cmd_list(args):
    entries = [{"name": name, "description": doc.get("description", ""),
                "runtime_ns": doc.get("runtime_ns"), "focus_stream": doc.get("focus_stream")}
               for name, doc in bundled_scenarios().items()]
    if args.json:
        print(json.dumps(entries, indent=1))
    else:
        width = max(len(e["name"]) for e in entries)
        for e in entries:
            print(f"{e['name']:<{width}}  {e['description']}")
    return EXIT_OK


def cmd_validate(args):
    targets = args.configs or list(bundled_scenarios())
    bad = 0
    for target in targets:
        try:
            problems = check_config(resolve(target))
        except (ValueError, KeyError, TypeError) as exc:
            problems = getattr(exc, "problems", [str(exc)])
        if problems:
            bad += 1
            print(f"{target}: {len(problems)} violation(s)")
            for p in problems:
                print(f"  - {p}")
        else:
            print(f"{target}: ok")
    return EXIT_CONFIG if bad else EXIT_OK


# ------------------------------------------------------------ compare


def _cell(value, fmt):
    return "-" if value is None else format(value, fmt)


def cmd_compare(args):
    try:
        a, b = load_run(args.run_a), load_run(args.run_b)
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    cmp = compare_runs(a, b)
    for w in cmp.warnings:
        print(f"warning: {w}")
    print(f"a = {a.manifest['scenario']} seed {a.manifest['seed']} ({a.path})")
    print(f"b = {b.manifest['scenario']} seed {b.manifest['seed']} ({b.path})")
    print()
    w = max([len("stream")] + [len(sid) for sid in cmp.streams]) + 2
    print(f"{'stream':<{w}}{'loss a':>9}{'loss b':>9}{'d loss':>9}"
          f"{'med a us':>10}{'med b us':>10}{'d med us':>10}"
          f"{'jit a us':>10}{'jit b us':>10}{'rec a ms':>11}{'rec b ms':>11}")
    for sid, row in cmp.streams.items():
        la, lb, dl = row["loss_rate"]
        ma, mb, dm = row["latency_median_ns"]
        ja, jb, _ = row["jitter_std_ns"]
        ra, rb, _ = row["recovery_ns"]
        us = lambda v: None if v is None else v / 1e3  # noqa: E731
        ms = lambda v: None if v is None else v / 1e6  # noqa: E731
        print(f"{sid:<{w}}{_cell(la, '.2%'):>9}{_cell(lb, '.2%'):>9}{_cell(dl, '+.2%'):>9}"
              f"{_cell(us(ma), '.2f'):>10}{_cell(us(mb), '.2f'):>10}{_cell(us(dm), '+.2f'):>10}"
              f"{_cell(us(ja), '.2f'):>10}{_cell(us(jb), '.2f'):>10}"
              f"{_cell(ms(ra), '.3f'):>11}{_cell(ms(rb), '.3f'):>11}")
    print()
    print(f"{'link':<34}{'mean util a':>12}{'mean util b':>12}{'b/a':>8}")
    for link, (ua, ub, ratio) in cmp.links.items():
        if ua == 0 and ub == 0 and not args.all_links:
            continue
        print(f"{link:<34}{ua:>12.4%}{ub:>12.4%}{_cell(ratio, '.2f'):>8}")
    if cmp.replicated:
        print()
        print("replicated section, stream bits before the fault:")
        for sid, (ba, bb, ratio) in cmp.replicated.items():
            print(f"  {sid}: a {ba} bits, b {bb} bits, b/a {_cell(ratio, '.2f')}")
    return EXIT_OK


# ------------------------------------------------------------ entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="tsnsim", description="Discrete-event TSN network simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run scenarios and export CSV/JSON results")
    run.add_argument("--scenario", action="append",
                     help="bundled name or path to a scenario file (repeatable; default S1A1)")
    run.add_argument("--seed", action="append", type=int, help="RNG seed (repeatable)")
    run.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    run.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="dotted-path config override, e.g. runtime_ns=2000000000")
    run.add_argument("--jobs", type=int, help="worker processes for a batch of runs")
    run.add_argument("--window-ns", type=int, help="utilization window in nanoseconds")
    run.set_defaults(func=cmd_run)

    ls = sub.add_parser("list-scenarios", help="list bundled scenarios")
    ls.add_argument("--json", action="store_true", help="machine-readable output")
    ls.set_defaults(func=cmd_list)

    val = sub.add_parser("validate", help="check scenario configs without running them")
    val.add_argument("configs", nargs="*", help="bundled names or paths (default: all bundled)")
    val.set_defaults(func=cmd_validate)

    cmp = sub.add_parser("compare", help="compare two export directories")
    cmp.add_argument("run_a")
    cmp.add_argument("run_b")
    cmp.add_argument("--all-links", action="store_true", help="also list idle links")
    cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
