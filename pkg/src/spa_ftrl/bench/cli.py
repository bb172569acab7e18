"""spa-bench: run experiments, re-certify trace directories, list game fixtures.

Exit codes: 0 every enabled certificate passed, 1 a certificate failed,
2 configuration or trace-format error.
"""
from __future__ import annotations

import argparse
import json
import shutil
import sys
import time
from pathlib import Path

from .config import ConfigError, load_config, parse_config
from .report import families_table, ratio_table, write_summary
from .runner import records_from_dir, run_episodes, summarize
from .traceio import TraceFormatError

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, seeds_override=args.seeds, parallel_override=args.parallel,
                          out_override=args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out or Path("runs") / cfg.name)
    if (out / "traces").exists():
        shutil.rmtree(out / "traces")
    out.mkdir(parents=True, exist_ok=True)
    # the resolved config (explicit seed list) lets certify re-derive everything
    resolved = dict(cfg.raw, seeds=list(cfg.seeds))
    resolved.pop("master_seed", None)
    (out / "config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    cfg = parse_config(resolved, parallel_override=cfg.parallel, out_override=str(out))
    t0 = time.perf_counter()
    records = run_episodes(cfg, out)
    report = summarize(cfg, records, wall_clock=time.perf_counter() - t0)
    write_summary(out, report, records, figures=not args.no_figures)
    print(ratio_table(report))
    print()
    print(families_table(report))
    print(f"\n{'PASS' if report['pass'] else 'FAIL'}: {cfg.name} -> {out}")
    return EXIT_PASS if report["pass"] else EXIT_FAIL


def certify_dir(trace_dir: str | Path) -> tuple[dict, list[dict]]:
    """Recompute every certificate from the trace files in trace_dir (written by run)."""
    trace_dir = Path(trace_dir)
    cfg_path = trace_dir / "config.json"
    if not cfg_path.is_file():
        raise TraceFormatError(f"{trace_dir} has no config.json")
    cfg = load_config(cfg_path)
    records = records_from_dir(trace_dir, cfg.raw)
    report = summarize(cfg, records)
    bad = [f"T={r['T']} seed={r['seed']}: {', '.join(r['mismatches'])}" for r in records if r["mismatches"]]
    report["families"]["logged_values"] = {"violations": len(bad), "pass": not bad, "details": bad}
    report["pass"] = all(f["pass"] for f in report["families"].values())
    report["records"] = len(records)
    return report, records


def cmd_certify(args) -> int:
    try:
        report, records = certify_dir(args.trace_dir)
    except (ConfigError, TraceFormatError) as exc:
        print(f"cannot certify: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_summary(args.trace_dir, report, records, figures=False, stem="certify")
    print(ratio_table(report))
    print()
    print(families_table(report))
    for fam in report["families"].values():
        for line in fam.get("details", []):
            print(f"  {line}")
    print(f"\n{'PASS' if report['pass'] else 'FAIL'}: re-certified {report['records']} traces")
    return EXIT_PASS if report["pass"] else EXIT_FAIL


def cmd_list(args) -> int:
    from ..pm.game import fixture_names, load_fixture
    for name in fixture_names():
        g = load_fixture(name)
        print(f"{name}: k={g.k} d={g.d} symbols={len(g.symbols)} m={g.m}")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spa-bench", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a configuration")
    run.add_argument("config")
    run.add_argument("--seeds", type=int, default=None, help="number of seeds (overrides the config)")
    run.add_argument("--parallel", type=int, default=None, help="worker processes")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    run.set_defaults(func=cmd_run)
    cert = sub.add_parser("certify", help="re-verify a directory written by run")
    cert.add_argument("trace_dir")
    cert.set_defaults(func=cmd_certify)
    lst = sub.add_parser("list-fixtures", help="list shipped game fixtures")
    lst.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
