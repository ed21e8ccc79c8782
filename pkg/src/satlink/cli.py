"""Command-line entry point: ``satlink {run,sweep,trace,oracle,table}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import metrics
from .config import AccessMethod, ConfigError, Scenario, load_scenario
from .engine import run_scenario
from .phy import estimate_plr_curve
from .rng import Rng

log = logging.getLogger("satlink")

DEFAULT_ACCESS = "dedicated,crdsa3,musca3"
DEFAULT_SESSIONS = "100,200,300,400"


def _int_list(text: str) -> list[int]:
    """``"1,5,10"`` or ``"1..100"`` (inclusive) or a mix of both."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _str_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _threshold(text: str) -> float:
    return float("inf") if text.lower() in ("inf", "infinity") else float(text)


def _add_scenario_flags(p: argparse.ArgumentParser, sessions_list: bool, access_list: bool) -> None:
    p.add_argument("--scenario", type=Path, help="scenario file (key = value lines)")
    p.add_argument("--seed", type=int)
    p.add_argument("--duration-s", type=float)
    p.add_argument("--output-dir", type=Path, default=Path("."))
    if access_list:
        p.add_argument("--access", type=_str_list, default=None,
                       help=f"comma-separated access methods (default {DEFAULT_ACCESS})")
    else:
        p.add_argument("--access", help="dedicated, crdsa3 or musca3")
    if sessions_list:
        p.add_argument("--sessions", type=_int_list, default=None,
                       help=f"comma-separated session counts (default {DEFAULT_SESSIONS})")
    else:
        p.add_argument("--sessions", type=int)
    p.add_argument("--loss-model", choices=["sic", "table"])
    p.add_argument("--plr-table", type=Path)
    p.add_argument("--policy", choices=["dedicated", "random", "hybrid"])
    p.add_argument("--seq-threshold", type=_threshold)
    p.add_argument("--ra-block-budget", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="satlink", description="DVB-RCS2 return-link simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one scenario -> summary, sessions, frames and trace CSVs")
    _add_scenario_flags(p, sessions_list=False, access_list=False)
    p.add_argument("--dump-btp", action="store_true", help="also write the burst time plans")

    p = sub.add_parser("trace", help="per-flow reception trace and mean time to n datagrams")
    _add_scenario_flags(p, sessions_list=False, access_list=False)

    for name, text in (("sweep", "throughput and loss versus session count"),
                       ("table", "min/med/max datagrams per session")):
        p = sub.add_parser(name, help=text)
        _add_scenario_flags(p, sessions_list=True, access_list=True)
        p.add_argument("--replications", type=int, default=1)
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("oracle", help="Monte Carlo PLR curve of one random access method")
    p.add_argument("--method", required=True, help="crdsa3 or musca3")
    p.add_argument("--loads", type=_int_list, default=_int_list("1..100"))
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--slots", type=int, default=100, help="slots per RA block")
    p.add_argument("--output-dir", type=Path, default=Path("."))
    return parser


def _seed(args, scenario_seed: int) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("SATLINK_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError([f"SATLINK_SEED={env!r} is not an integer"]) from None
    return scenario_seed


def scenario_from_args(args) -> Scenario:
    scenario = load_scenario(args.scenario) if args.scenario else Scenario()
    changes = {"seed": _seed(args, scenario.seed)}
    if args.duration_s is not None:
        changes["duration_s"] = args.duration_s
    if isinstance(args.access, str):
        changes["access_method"] = AccessMethod.parse(args.access)
    if isinstance(args.sessions, int):
        changes["num_sessions"] = args.sessions
    if args.loss_model:
        changes["loss_model"] = args.loss_model
    if args.plr_table:
        changes["plr_table"] = str(args.plr_table)
    if args.policy:
        changes["policy"] = args.policy
    if args.seq_threshold is not None:
        changes["seq_threshold"] = args.seq_threshold
    if args.ra_block_budget is not None:
        changes["ra_block_budget"] = args.ra_block_budget
    return scenario.replace(**changes)


def _grid(args, base: Scenario) -> list[Scenario]:
    methods = [AccessMethod.parse(a) for a in (args.access or _str_list(DEFAULT_ACCESS))]
    sessions = args.sessions or _int_list(DEFAULT_SESSIONS)
    if args.replications < 1:
        raise ConfigError(["--replications must be at least 1"])
    grid = []
    for m in methods:
        for n in sessions:
            for r in range(args.replications):
                s = base.replace(access_method=m, num_sessions=n, seed=base.seed + r)
                if s.policy in ("random", "hybrid") and not m.is_random:
                    s = s.replace(policy=None)
                grid.append(s.check())
    return grid


def _summarize(scenario: Scenario):
    r = run_scenario(scenario)
    return (scenario.access_method.name, scenario.num_sessions, scenario.seed,
            metrics.throughput(r), r.loss_ratio, metrics.session_stats(r))


def _run_grid(grid, jobs: int):
    if jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_summarize, grid))
    return [_summarize(s) for s in grid]


def cmd_run(args) -> int:
    scenario = scenario_from_args(args).check()
    result = run_scenario(scenario, dump_btp=args.dump_btp)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    (args.output_dir / "scenario.cfg").write_text(scenario.dumps())
    metrics.write_run(args.output_dir, result)
    s = metrics.session_stats(result)
    print(f"{scenario.access_method.name} sessions={scenario.num_sessions} seed={scenario.seed} "
          f"throughput={metrics.throughput(result) / 1e6:.3f} Mbit/s loss={result.loss_ratio:.4f} "
          f"min/med/max={s.min}/{s.med}/{s.max}")
    return 0


def cmd_trace(args) -> int:
    scenario = scenario_from_args(args).check()
    result = run_scenario(scenario)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    metrics.write_trace(args.output_dir / "trace.csv", result.trace)
    rows = [(n, f"{t:.6f}") for n, t in metrics.reception_curve(result)]
    metrics.write_rows(args.output_dir / "reception.csv", ["n", "mean_time_s"], rows)
    print(f"wrote {len(result.trace)} deliveries to {args.output_dir / 'trace.csv'}")
    return 0


def cmd_sweep(args) -> int:
    grid = _grid(args, scenario_from_args(args))
    out = _run_grid(grid, args.jobs)
    merged = {}
    for access, n, seed, tp, lr, _ in out:
        merged.setdefault((access, n), []).append((tp, lr))
    rows = [(a, n, sum(v[0] for v in vals) / len(vals), sum(v[1] for v in vals) / len(vals))
            for (a, n), vals in merged.items()]
    args.output_dir.mkdir(parents=True, exist_ok=True)
    metrics.write_sweep(args.output_dir / "sweep.csv", rows)
    if args.replications > 1:
        metrics.write_rows(args.output_dir / "sweep_replications.csv",
                       ["access", "num_sessions", "seed", "throughput_bps", "loss_ratio"],
                       [(a, n, seed, repr(tp), repr(lr)) for a, n, seed, tp, lr, _ in out])
    for a, n, tp, lr in rows:
        print(f"{a:9s} {n:4d}  {tp / 1e6:8.3f} Mbit/s  loss {lr:.4f}")
    return 0


def cmd_table(args) -> int:
    grid = _grid(args, scenario_from_args(args))
    out = _run_grid(grid, args.jobs)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    first = {}
    for access, n, seed, _, _, stats in out:
        first.setdefault((access, n), stats)
    metrics.write_table(args.output_dir / "table.csv", [(a, n, s) for (a, n), s in first.items()])
    if args.replications > 1:
        metrics.write_rows(args.output_dir / "table_replications.csv",
                       ["access", "num_sessions", "seed", "min", "med", "max"],
                       [(a, n, seed, s.min, s.med, s.max) for a, n, seed, _, _, s in out])
    for (a, n), s in first.items():
        print(f"{a:9s} {n:4d}  {s.min:5d} {s.med:5d} {s.max:5d}")
    return 0


def cmd_oracle(args) -> int:
    method = AccessMethod.parse(args.method)
    if not method.is_random:
        raise ConfigError([f"oracle needs a random access method, got {method.name}"])
    seed = _seed(args, 1)
    curve = estimate_plr_curve(method, args.loads, args.trials, Rng(seed),
                               slot_count=args.slots)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    path = args.output_dir / f"oracle_{method.name}.csv"
    curve.save(path)
    print(f"wrote {len(curve.loads)} points to {path}")
    return 0


COMMANDS = {"run": cmd_run, "trace": cmd_trace, "sweep": cmd_sweep, "table": cmd_table,
            "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print("error: invalid scenario", file=sys.stderr)
        for e in exc.errors:
            print(f"  - {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
