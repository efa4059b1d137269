"""Command line: ``quadarm run|audit|plot``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ._ini import ConfigError
from .config import parse_config
from .harness import (ScenarioError, ScenarioLog, audit_log, limits_path_for, read_limits,
                      run_scenario, write_limits)

EXIT_OK, EXIT_AUDIT, EXIT_ERROR = 0, 1, 2


def _report(violations, stream=None) -> int:
    stream = stream or sys.stdout
    if not violations:
        print("audit: all constraints satisfied", file=stream)
        return EXIT_OK
    for v in violations:
        print(f"audit: {v}", file=stream)
    print(f"audit: {len(violations)} violation(s)", file=stream)
    return EXIT_AUDIT


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    out = Path(args.out or Path(args.config).stem)
    out.mkdir(parents=True, exist_ok=True)
    log = run_scenario(cfg, seed=args.seed)
    log_path = out / "log.csv"
    log.write_csv(log_path)
    write_limits(limits_path_for(log_path), cfg)
    print(f"wrote {log_path} ({len(log)} samples)")
    flagged = {j: n for j, n in log.infeasible.items() if n}
    if flagged:
        print(f"filter fallback used: {flagged}")
    if len(log) and not args.no_plots:
        from .plotting import emit_plots
        paths = emit_plots(log, out)
        print(f"wrote {len(paths)} plots to {out}")
    return _report(audit_log(log, cfg.limits, {j: g.F for j, g in cfg.gains.items()}))


def cmd_audit(args) -> int:
    lim_path = Path(args.limits) if args.limits else limits_path_for(args.log)
    if not lim_path.exists():
        print(f"error: limits file {lim_path} not found (written next to the log by 'run')",
              file=sys.stderr)
        return EXIT_ERROR
    limits, torque, T = read_limits(lim_path)
    log = ScenarioLog.read_csv(args.log, T=T)
    missing = [j for j in log.joints if j not in limits]
    if missing:
        print(f"error: no limits for joints {missing}", file=sys.stderr)
        return EXIT_ERROR
    return _report(audit_log(log, limits, torque))


def cmd_plot(args) -> int:
    from .plotting import emit_plots
    log = ScenarioLog.read_csv(args.log)
    if len(log) == 0:
        print("error: log has no samples", file=sys.stderr)
        return EXIT_ERROR
    out = Path(args.out or Path(args.log).parent)
    paths = emit_plots(log, out)
    print(f"wrote {len(paths)} plots to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quadarm", description="Quad-arm robot scenario runner")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate a scenario file")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: config file stem)")
    r.add_argument("--seed", type=int, default=0, help="seed for sensor noise")
    r.add_argument("--no-plots", action="store_true")
    r.set_defaults(func=cmd_run)
    a = sub.add_parser("audit", help="check a log against its joint limits")
    a.add_argument("log")
    a.add_argument("--limits", help="limits CSV (default: <log>_limits.csv)")
    a.set_defaults(func=cmd_audit)
    q = sub.add_parser("plot", help="render SVG figures for a log")
    q.add_argument("log")
    q.add_argument("--out")
    q.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
