"""Command line entry point: ``chaoscon {check,run,report,oracle,selftest}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from chaoscon.harness import config as cfgmod
from chaoscon.harness.experiments import overall_verdict, run_experiment
from chaoscon.harness.output import read_report, write_outputs
from chaoscon.harness.suites import SELFTEST_CONFIGS, oracle_suite
from chaoscon.reports import SCHEMA_VERSION, to_jsonable

EXIT = {"pass": 0, "fail": 2, "inconclusive": 3, "report": 3}
EXIT_USAGE = 1


class _Parser(argparse.ArgumentParser):
    # exit status 2 means "a check failed", so usage errors get their own code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chaoscon", description="Concentration and chaos bound experiments")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="validate a config or manifest and print the resolved form")
    p.add_argument("--config", required=True, type=Path)

    p = sub.add_parser("run", help="run a config or manifest and write report, table and figure")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--exact", action="store_true", help="force enumeration paths")
    p.add_argument("--samples", type=int, help="Monte Carlo sample count (overrides the config)")
    p.add_argument("--timing", action="store_true", help="record wall-clock time in the report")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("report", help="re-render table and figure from a report JSON file")
    p.add_argument("report", type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("oracle", help="run the brute-force cross-check suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.add_argument("--forms", type=int, default=10, help="random forms in the optimizer cross-check")

    p = sub.add_parser("selftest", help="run the built-in experiment battery")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", type=Path, default=Path("selftest_out"))
    p.add_argument("--timing", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    return parser


def _load_configs(path: Path) -> list[dict]:
    data = cfgmod.load(path)
    if isinstance(data, dict) and "configs" in data:
        return cfgmod.load_manifest(data, path.parent)
    return [data]


def _print_errors(errors: list[str], source) -> None:
    print(f"invalid config {source}:", file=sys.stderr)
    for e in errors:
        print(f"  - {e}", file=sys.stderr)


def cmd_check(args) -> int:
    try:
        configs = _load_configs(args.config)
    except cfgmod.ConfigError as exc:
        _print_errors(exc.errors, args.config)
        return EXIT_USAGE
    status = 0
    for j, cfg in enumerate(configs):
        try:
            print(cfgmod.dumps(cfgmod.resolve(cfg)))
        except cfgmod.ConfigError as exc:
            _print_errors(exc.errors, f"{args.config}[{j}]")
            status = EXIT_USAGE
    return status


def _run_one(cfg: dict, out: Path | None, timing: bool, figures: bool) -> str:
    report = run_experiment(cfg, timing=timing)
    out_dir = out if out is not None else Path(cfg["output"]["dir"])
    paths = write_outputs(report, out_dir, cfg["output"]["stem"], figures and cfg["output"]["figures"])
    print(f"{cfg['name']}: {report['verdict']} -> {', '.join(str(p) for p in paths)}")
    for res in report["results"]:
        for f in res["failures"]:
            print(f"  failure: {json.dumps(to_jsonable(f))}")
    return report["verdict"]


def cmd_run(args) -> int:
    try:
        raw = _load_configs(args.config)
        configs = [cfgmod.resolve(c, seed=args.seed, samples=args.samples, exact=args.exact) for c in raw]
    except cfgmod.ConfigError as exc:
        _print_errors(exc.errors, args.config)
        return EXIT_USAGE
    verdicts = [_run_one(c, args.out, args.timing, not args.no_figures) for c in configs]
    return EXIT[overall_verdict(verdicts)]


def cmd_report(args) -> int:
    try:
        report = read_report(args.report)
    except (OSError, ValueError) as exc:
        print(f"cannot read report: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = args.out or args.report.parent
    stem = args.report.stem
    paths = write_outputs(report, out, stem)
    # write_outputs rewrites the JSON too; content is unchanged apart from formatting
    print(f"{stem}: {report['verdict']} -> {', '.join(str(p) for p in paths)}")
    return EXIT.get(report["verdict"], 3)


def cmd_oracle(args) -> int:
    results = oracle_suite(args.seed, args.forms)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    verdict = "pass" if all(ok for _, ok, _ in results) else "fail"
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        doc = {"version": SCHEMA_VERSION, "config": {"kind": "oracle", "seed": args.seed, "forms": args.forms},
               "results": [{"name": n, "passed": ok, "detail": d} for n, ok, d in results],
               "verdict": verdict, "timing": {"enabled": False}}
        (args.out / "oracle.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT[verdict]


def cmd_selftest(args) -> int:
    verdicts = []
    summary = []
    for cfg in SELFTEST_CONFIGS:
        resolved = cfgmod.resolve(cfg, seed=args.seed)
        v = _run_one(resolved, args.out, args.timing, not args.no_figures)
        verdicts.append(v)
        summary.append({"name": resolved["name"], "kind": resolved["kind"], "verdict": v})
    failing = [s for s in summary if s["verdict"] in ("fail", "inconclusive")]
    verdict = "fail" if failing else "pass"
    doc = {"version": SCHEMA_VERSION, "config": {"kind": "selftest", "seed": args.seed},
           "results": summary, "verdict": verdict, "timing": {"enabled": False}}
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "selftest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"selftest: {verdict} ({len(summary) - len(failing)}/{len(summary)} experiments without failure)")
    return EXIT[verdict]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"check": cmd_check, "run": cmd_run, "report": cmd_report, "oracle": cmd_oracle,
               "selftest": cmd_selftest}[args.verb]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
