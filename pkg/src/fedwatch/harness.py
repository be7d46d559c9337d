"""Experiment harness: CSV runs, the OAT grid, the delta search, reporting.

Every run writes one self-describing CSV: a comment header with the fully
resolved configuration, one row per round, and a trailing summary block.
Identical config + seed reproduces the file byte for byte, also when grid
cells execute in a process pool.
"""
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import ExperimentConfig, derive
from .protocol import run_training

CSV_COLUMNS = (
    "round,global_accuracy,n_excluded_total,newly_excluded_ids,"
    "tp,fp,fn,tn,precision,recall,f2"
)

GRID_ATTACKS = ("static", "pretence", "randomized")
DEFAULT_DELTAS = (0, 10, 40)


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunResult:
    run_id: str
    csv_path: str
    summary: dict


@dataclass(frozen=True)
class DeltaRecommendation:
    delta: int
    table: tuple  # one row per candidate: (delta, mean_f2, mean_final_accuracy)
    seeds: tuple


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def summarize(log, config) -> dict:
    """Readout-round accuracy plus mean F2 over the verdict-active rounds."""
    rows = log.records
    gate = config.defense.delta if config.defense_enabled else 0
    post = [r.f2 for r in rows if r.round >= gate]
    if rows:
        readout = min(config.readout_round, rows[-1].round)
        readout_acc = next(r.global_accuracy for r in rows if r.round == readout)
        final_acc = rows[-1].global_accuracy
    else:
        readout = -1
        readout_acc = log.initial_accuracy
        final_acc = log.initial_accuracy
    return {
        "status": log.status,
        "rounds_run": len(rows),
        "readout_round": config.readout_round,
        "readout_effective": readout,
        "readout_accuracy": readout_acc,
        "final_accuracy": final_acc,
        "mean_post_delta_f2": sum(post) / len(post) if post else 0.0,
    }


def write_run_csv(path, log, config, run_id=""):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    summary = summarize(log, config)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if run_id:
            fh.write(f"# run_id = {run_id}\n")
        for key, value in log.config_items:
            fh.write(f"# {key} = {value}\n")
        fh.write(f"# initial_accuracy = {_fmt(log.initial_accuracy)}\n")
        fh.write(CSV_COLUMNS + "\n")
        for r in log.records:
            ids = ";".join(str(w) for w in r.newly_excluded)
            fh.write(
                f"{r.round},{_fmt(r.global_accuracy)},{r.n_excluded_total},{ids},"
                f"{r.tp},{r.fp},{r.fn},{r.tn},"
                f"{_fmt(r.precision)},{_fmt(r.recall)},{_fmt(r.f2)}\n"
            )
        fh.write(f"# summary.status = {summary['status']}\n")
        fh.write(f"# summary.rounds_run = {summary['rounds_run']}\n")
        fh.write(f"# summary.readout_round = {summary['readout_round']}\n")
        fh.write(f"# summary.readout_effective = {summary['readout_effective']}\n")
        fh.write(f"# summary.readout_accuracy = {_fmt(summary['readout_accuracy'])}\n")
        fh.write(f"# summary.final_accuracy = {_fmt(summary['final_accuracy'])}\n")
        fh.write(
            f"# summary.mean_post_delta_f2 = {_fmt(summary['mean_post_delta_f2'])}\n"
        )
    return summary


def run_experiment(config: ExperimentConfig, run_id: str = "") -> RunResult:
    """Run one experiment and write its CSV to ``config.out``."""
    log = run_training(config)
    summary = write_run_csv(config.out, log, config, run_id=run_id)
    return RunResult(run_id=run_id, csv_path=config.out, summary=summary)


def parse_run_csv(path):
    """Read back a run CSV: (header dict, row dicts, summary dict)."""
    header, rows, summary = {}, [], {}
    columns = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                key, value = key.strip(), value.strip()
                if key.startswith("summary."):
                    summary[key[len("summary."):]] = value
                else:
                    header[key] = value
                continue
            if columns is None:
                columns = line.split(",")
                if line != CSV_COLUMNS:
                    raise HarnessError(f"{path}: unexpected CSV schema {line!r}")
                continue
            parts = line.split(",")
            row = dict(zip(columns, parts))
            for key in ("round", "n_excluded_total", "tp", "fp", "fn", "tn"):
                row[key] = int(row[key])
            for key in ("global_accuracy", "precision", "recall", "f2"):
                row[key] = float(row[key])
            row["newly_excluded_ids"] = tuple(
                int(tok) for tok in row["newly_excluded_ids"].split(";") if tok
            )
            rows.append(row)
    if columns is None:
        raise HarnessError(f"{path}: no CSV section found")
    return header, rows, summary


def grid_manifest(base: ExperimentConfig, deltas=DEFAULT_DELTAS, out_dir="grid",
                  prefix=""):
    """One-at-a-time cells: baseline, attacks undefended, attacks x deltas."""
    if not deltas:
        raise HarnessError("delta set must be non-empty")
    cells = []

    def cell(run_id, **changes):
        changes["out"] = os.path.join(out_dir, f"{run_id}.csv")
        cells.append((run_id, derive(base, **changes)))

    cell(f"{prefix}baseline", attack__pattern="none", defense__enabled="false")
    for attack in GRID_ATTACKS:
        cell(f"{prefix}{attack}_nodef", attack__pattern=attack,
             defense__enabled="false")
    for attack in GRID_ATTACKS:
        for d in deltas:
            cell(f"{prefix}{attack}_delta{d}", attack__pattern=attack,
                 defense__enabled="true", defense__delta=str(d))
    return cells


def _execute_cell(item):
    run_id, config = item
    try:
        result = run_experiment(config, run_id=run_id)
        return run_id, result.summary, None
    except Exception as exc:  # a failed cell must not sink the grid
        return run_id, None, f"{type(exc).__name__}: {exc}"


def write_manifest_csv(out_dir, cells):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "grid_manifest.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("run_id,out,attack.pattern,defense.enabled,defense.delta\n")
        for run_id, config in cells:
            items = dict(config.to_items())
            fh.write(
                f"{run_id},{items['out']},{items['attack.pattern']},"
                f"{items['defense.enabled']},{items['defense.delta']}\n"
            )
    return path


def run_grid(cells, jobs: int = 1):
    """Execute manifest cells (optionally in a process pool); collect summaries."""
    results, errors = {}, {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_execute_cell, cells))
    else:
        outcomes = [_execute_cell(item) for item in cells]
    for run_id, summary, error in outcomes:
        if error is None:
            results[run_id] = summary
        else:
            errors[run_id] = error
    return results, errors


def write_grid_summary(out_dir, cells, results, errors):
    path = os.path.join(out_dir, "grid_summary.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            "run_id,status,readout_accuracy,final_accuracy,mean_post_delta_f2\n"
        )
        for run_id, _ in cells:
            if run_id in results:
                s = results[run_id]
                fh.write(
                    f"{run_id},{s['status']},{_fmt(s['readout_accuracy'])},"
                    f"{_fmt(s['final_accuracy'])},{_fmt(s['mean_post_delta_f2'])}\n"
                )
            else:
                fh.write(f"{run_id},error: {errors[run_id]},,,\n")
    return path


def oat_grid(base, deltas=DEFAULT_DELTAS, out_dir="grid", jobs=1,
             manifest_only=False, prefix=""):
    """Build (and unless manifest_only, execute) the one-factor-at-a-time grid."""
    cells = grid_manifest(base, deltas, out_dir=out_dir, prefix=prefix)
    write_manifest_csv(out_dir, cells)
    if manifest_only:
        return cells, {}, {}
    results, errors = run_grid(cells, jobs=jobs)
    write_grid_summary(out_dir, cells, results, errors)
    return cells, results, errors


def score_candidates(per_run):
    """Aggregate per-run scores into the recommendation table.

    ``per_run``: list of (delta, mean_post_delta_f2, final_accuracy) triples.
    Winner: highest mean F2, then highest mean final accuracy, then the
    smaller delta.
    """
    deltas = sorted({d for d, _, _ in per_run})
    table = []
    for d in deltas:
        f2s = [f for dd, f, _ in per_run if dd == d]
        accs = [a for dd, _, a in per_run if dd == d]
        table.append((d, sum(f2s) / len(f2s), sum(accs) / len(accs)))
    best = max(table, key=lambda row: (row[1], row[2], -row[0]))
    return best[0], tuple(table)


def delta_search(config, candidates, n_seeds: int, out_dir=None) -> DeltaRecommendation:
    """Score each candidate monitoring period across seeds; recommend one.

    Each candidate runs ``n_seeds`` times with seeds seed, seed+1, ...; the
    per-run score is the mean F2 over verdict-active rounds (round >= delta).
    """
    if not candidates:
        raise HarnessError("candidate set must be non-empty")
    if n_seeds < 1:
        raise HarnessError("need at least one seed")
    seeds = tuple(config.seed + i for i in range(n_seeds))
    per_run = []
    for d in candidates:
        for seed in seeds:
            changes = {
                "defense.enabled": "true",
                "defense.delta": str(d),
                "seed": str(seed),
            }
            if out_dir:
                changes["out"] = os.path.join(out_dir, f"search_d{d}_s{seed}.csv")
            cfg = derive(config, **changes)
            if out_dir:
                summary = run_experiment(cfg, run_id=f"d{d}_s{seed}").summary
            else:
                summary = summarize(run_training(cfg), cfg)
            per_run.append(
                (d, summary["mean_post_delta_f2"], summary["final_accuracy"])
            )
    best, table = score_candidates(per_run)
    return DeltaRecommendation(delta=best, table=table, seeds=seeds)


def rescore_from_csvs(paths) -> DeltaRecommendation:
    """Rebuild a recommendation from saved search CSVs (same score table)."""
    per_run = []
    seeds = set()
    for path in paths:
        header, rows, _ = parse_run_csv(path)
        if header.get("defense.enabled") != "true":
            raise HarnessError(f"{path}: not a defended run")
        d = int(header["defense.delta"])
        seeds.add(int(header["seed"]))
        post = [r["f2"] for r in rows if r["round"] >= d]
        f2 = sum(post) / len(post) if post else 0.0
        final = rows[-1]["global_accuracy"] if rows else float(
            header["initial_accuracy"]
        )
        per_run.append((d, f2, final))
    best, table = score_candidates(per_run)
    return DeltaRecommendation(delta=best, table=table, seeds=tuple(sorted(seeds)))


def report(paths, out_dir=None, charts=False):
    """Aligned per-round accuracy table across runs, plus optional SVG charts.

    The first CSV is the reference; every other run gets a difference column
    against it. Returns (labels, table rows, summaries).
    """
    parsed = []
    for path in paths:
        header, rows, summary = parse_run_csv(path)
        label = header.get("run_id") or os.path.splitext(os.path.basename(path))[0]
        parsed.append((label, header, rows, summary))
    labels = [p[0] for p in parsed]
    if len(set(labels)) != len(labels):
        labels = [f"{i}_{lab}" for i, lab in enumerate(labels)]

    by_round = [
        {r["round"]: r for r in rows} for _, _, rows, _ in parsed
    ]
    all_rounds = sorted(set().union(*[set(b) for b in by_round])) if by_round else []
    table = []
    for t in all_rounds:
        accs = [b[t]["global_accuracy"] if t in b else None for b in by_round]
        diffs = [
            None if (a is None or accs[0] is None) else a - accs[0]
            for a in accs[1:]
        ]
        table.append((t, accs, diffs))

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        out_path = os.path.join(out_dir, "comparison.csv")
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            head = ["round"] + [f"acc_{lab}" for lab in labels]
            head += [f"diff_{lab}" for lab in labels[1:]]
            fh.write(",".join(head) + "\n")
            for t, accs, diffs in table:
                cells = [str(t)]
                cells += ["" if a is None else _fmt(a) for a in accs]
                cells += ["" if d is None else _fmt(d) for d in diffs]
                fh.write(",".join(cells) + "\n")
        if charts:
            acc_series = [
                (lab, [(r["round"], r["global_accuracy"]) for r in rows])
                for lab, _, rows, _ in parsed
            ]
            f2_series = [
                (lab, [(r["round"], r["f2"]) for r in rows])
                for lab, _, rows, _ in parsed
            ]
            write_line_chart(
                os.path.join(out_dir, "accuracy.svg"), acc_series,
                "Global model accuracy by round", "accuracy",
            )
            write_line_chart(
                os.path.join(out_dir, "f2.svg"), f2_series,
                "Detection F2 by round", "F2",
            )
    summaries = {lab: summ for lab, _, _, summ in parsed}
    return labels, table, summaries


_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def write_line_chart(path, series, title, ylabel):
    """Standalone SVG line chart; y is fixed to [0, 1] (rates)."""
    width, height = 760, 420
    ml, mr, mt, mb = 55, 170, 45, 45
    pw, ph = width - ml - mr, height - mt - mb
    xmax = max((pt[0] for _, pts in series for pt in pts), default=1) or 1

    def sx(x):
        return ml + pw * x / xmax

    def sy(y):
        return mt + ph * (1.0 - min(max(y, 0.0), 1.0))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{ml}" y="25" font-family="sans-serif" font-size="15">{title}</text>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt+ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt+ph}" x2="{ml+pw}" y2="{mt+ph}" stroke="black"/>',
    ]
    for i in range(5):
        yv = i / 4
        parts.append(
            f'<line x1="{ml-4}" y1="{sy(yv):.1f}" x2="{ml}" y2="{sy(yv):.1f}" '
            'stroke="black"/>'
        )
        parts.append(
            f'<text x="{ml-8}" y="{sy(yv)+4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{yv:.2f}</text>'
        )
    xticks = max(1, xmax // 8)
    for xv in range(0, xmax + 1, xticks):
        parts.append(
            f'<line x1="{sx(xv):.1f}" y1="{mt+ph}" x2="{sx(xv):.1f}" '
            f'y2="{mt+ph+4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{sx(xv):.1f}" y="{mt+ph+18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{xv}</text>'
        )
    parts.append(
        f'<text x="{ml+pw//2}" y="{height-8}" text-anchor="middle" '
        'font-family="sans-serif" font-size="12">round</text>'
    )
    parts.append(
        f'<text x="18" y="{mt+ph//2}" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 18 {mt+ph//2})" text-anchor="middle">{ylabel}</text>'
    )
    for i, (label, pts) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        if pts:
            coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" '
                'stroke-width="1.5"/>'
            )
        ly = mt + 16 * i
        parts.append(
            f'<line x1="{ml+pw+10}" y1="{ly}" x2="{ml+pw+30}" y2="{ly}" '
            f'stroke="{color}" stroke-width="3"/>'
        )
        parts.append(
            f'<text x="{ml+pw+35}" y="{ly+4}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
    return path
