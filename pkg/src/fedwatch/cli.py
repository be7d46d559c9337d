"""Command line interface: run, grid, search, report."""
import argparse
import sys

from . import harness
from .config import ConfigError, parse_config


def _collect_overrides(pairs):
    overrides = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError([f"--set expects key=value, got {pair!r}"])
        key, _, value = pair.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def _add_config_args(parser, multi=False):
    if multi:
        parser.add_argument(
            "--config", action="append", default=[], metavar="FILE",
            help="config file; repeat for several use cases",
        )
    else:
        parser.add_argument("--config", metavar="FILE", help="config file")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )


def _parse_deltas(text):
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise ConfigError([f"--deltas expects comma-separated integers, got {text!r}"])


def cmd_run(args):
    overrides = _collect_overrides(args.set)
    if args.out:
        overrides["out"] = args.out
    config = parse_config(args.config, overrides)
    result = harness.run_experiment(config)
    s = result.summary
    print(f"wrote {result.csv_path}")
    print(
        f"status={s['status']} rounds={s['rounds_run']} "
        f"accuracy@{s['readout_effective']}={s['readout_accuracy']:.4f} "
        f"final={s['final_accuracy']:.4f} mean_post_delta_f2="
        f"{s['mean_post_delta_f2']:.4f}"
    )
    return 0


def cmd_grid(args):
    overrides = _collect_overrides(args.set)
    deltas = _parse_deltas(args.deltas)
    config_files = args.config or [None]
    all_cells = []
    for i, path in enumerate(config_files):
        base = parse_config(path, overrides)
        prefix = f"uc{i}_" if len(config_files) > 1 else ""
        all_cells.extend(
            harness.grid_manifest(base, deltas, out_dir=args.out_dir, prefix=prefix)
        )
    harness.write_manifest_csv(args.out_dir, all_cells)
    print(f"manifest: {len(all_cells)} runs -> {args.out_dir}/grid_manifest.csv")
    if args.manifest_only:
        return 0
    results, errors = harness.run_grid(all_cells, jobs=args.jobs)
    harness.write_grid_summary(args.out_dir, all_cells, results, errors)
    for run_id, _ in all_cells:
        if run_id in results:
            s = results[run_id]
            print(
                f"{run_id}: accuracy@{s['readout_effective']}="
                f"{s['readout_accuracy']:.4f} mean_post_delta_f2="
                f"{s['mean_post_delta_f2']:.4f} [{s['status']}]"
            )
        else:
            print(f"{run_id}: FAILED {errors[run_id]}")
    return 1 if errors else 0


def cmd_search(args):
    overrides = _collect_overrides(args.set)
    config = parse_config(args.config, overrides)
    deltas = _parse_deltas(args.deltas)
    rec = harness.delta_search(config, deltas, args.seeds, out_dir=args.out_dir)
    print("delta  mean_f2   mean_final_accuracy")
    for d, f2, acc in rec.table:
        marker = " <- recommended" if d == rec.delta else ""
        print(f"{d:5d}  {f2:.6f}  {acc:.6f}{marker}")
    print(f"recommended delta: {rec.delta} (seeds {list(rec.seeds)})")
    return 0


def cmd_report(args):
    labels, table, summaries = harness.report(
        args.csvs, out_dir=args.out_dir, charts=args.charts
    )
    print("run, status, readout accuracy, mean_post_delta_f2")
    for label in labels:
        s = summaries[label]
        print(
            f"{label}, {s.get('status', '?')}, {s.get('readout_accuracy', '?')}, "
            f"{s.get('mean_post_delta_f2', '?')}"
        )
    if args.out_dir:
        print(f"comparison table -> {args.out_dir}/comparison.csv")
        if args.charts:
            print(f"charts -> {args.out_dir}/accuracy.svg, {args.out_dir}/f2.svg")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fedwatch",
        description=(
            "Simulate federated learning under model-poisoning attacks with a "
            "monitored attestation defense."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single experiment")
    _add_config_args(p_run)
    p_run.add_argument("--out", help="output CSV path (overrides config)")
    p_run.set_defaults(func=cmd_run)

    p_grid = sub.add_parser("grid", help="run the one-at-a-time grid")
    _add_config_args(p_grid, multi=True)
    p_grid.add_argument("--deltas", default="0,10,40",
                        help="monitoring periods, comma separated")
    p_grid.add_argument("--out-dir", default="grid", help="output directory")
    p_grid.add_argument("--jobs", type=int, default=1,
                        help="parallel worker processes")
    p_grid.add_argument("--manifest-only", action="store_true",
                        help="write the manifest without executing runs")
    p_grid.set_defaults(func=cmd_grid)

    p_search = sub.add_parser("search", help="recommend a monitoring period")
    _add_config_args(p_search)
    p_search.add_argument("--deltas", default="0,10,40",
                          help="candidate monitoring periods")
    p_search.add_argument("--seeds", type=int, default=5,
                          help="seeds per candidate")
    p_search.add_argument("--out-dir", default=None,
                          help="keep per-run CSVs in this directory")
    p_search.set_defaults(func=cmd_search)

    p_report = sub.add_parser("report", help="compare finished run CSVs")
    p_report.add_argument("csvs", nargs="+", help="run CSV files")
    p_report.add_argument("--out-dir", default=None, help="output directory")
    p_report.add_argument("--charts", action="store_true",
                          help="emit accuracy/F2 SVG charts")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except (OSError, harness.HarnessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
