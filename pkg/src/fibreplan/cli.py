"""Command-line entry point.

    fibreplan design   --map MAP [--rules RULES] --out DIR [--seed N] [--runs N] ...
    fibreplan validate --map MAP [--rules RULES] --solution SOLUTION
    fibreplan bench    --spec SPEC [--rules RULES] --out DIR
    fibreplan synth    --out MAP [--preset map1|tiny] [--seed N]

Exit codes: 0 success / feasible, 1 infeasible result, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Sequence

from . import bench
from .bom import build_bill
from .errors import FibrePlanError
from .export import load_solution, to_geojson, to_svg, write_json, write_solution
from .fitness import Caches, evaluate
from .ga import GAConfig
from .model import BusinessRules, load_map, load_rules, preprocess, save_map
from .validator import DesignSolution, validate

RULES_ENV = "FIBREPLAN_RULES"
FORMATS = ("geojson", "svg", "csv")

logger = logging.getLogger("fibreplan")


class UsageError(Exception):
    pass


def _rules(path: str | None) -> tuple[BusinessRules, dict[str, str]]:
    path = path or os.environ.get(RULES_ENV) or None
    return load_rules(path)


def _ga_config(ga_section: dict[str, str], args: argparse.Namespace) -> GAConfig:
    return GAConfig.from_mapping(
        ga_section,
        generations=getattr(args, "generations", None),
        population_size=getattr(args, "population", None),
        rng_seed=getattr(args, "seed", None),
    )


def cmd_design(args: argparse.Namespace) -> int:
    net = preprocess(load_map(args.map))
    rules, ga_section = _rules(args.rules)
    config = _ga_config(ga_section, args)
    formats = set(args.format or FORMATS)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    caches = Caches(net, rules)
    t0 = time.perf_counter()
    summary = bench.run_stats(net, rules, config, n_runs=args.runs, caches=caches)
    elapsed = time.perf_counter() - t0
    best = summary.best_individual
    solution = DesignSolution.from_genotype(best.genotype, net)
    report = validate(solution, net, rules, caches)
    bill = build_bill(solution, net, rules, caches)

    write_solution(solution, out / "solution.json", cost=best.cost.as_dict())
    write_json(report.to_dict(), out / "report.json")
    write_json(bill.to_dict(), out / "bill.json")
    if "csv" in formats:
        bench.write_records_csv(summary.records, out / "metrics.csv")
        bench.write_summary_csv(summary.table(), out / "summary.csv")
        bench.write_traces_csv(summary.traces, out / "trace.csv")
    if "geojson" in formats:
        write_json(to_geojson(solution, net, caches), out / "design.geojson")
    if "svg" in formats:
        (out / "design.svg").write_text(to_svg(solution, net, caches), encoding="utf-8")
    write_json({"runs": args.runs, "total_s": elapsed, "per_run_s": summary.runtimes_s}, out / "timing.json")

    cost = best.cost
    print(f"best fitness {cost.fitness:.1f}: {cost.n_pdo} PDOs, drop {cost.drop_m / 1000:.2f} km, "
          f"distribution {cost.dist_m / 1000:.2f} km, {cost.h_missing} client(s) missing")
    print(f"feasible: {report.feasible} ({len(report.findings)} finding(s)); {elapsed:.1f} s; artifacts in {out}")
    if not report.feasible and not args.allow_infeasible:
        return 1
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    net = preprocess(load_map(args.map))
    rules, _ = _rules(args.rules)
    solution = load_solution(args.solution)
    caches = Caches(net, rules)
    genotype = solution.to_genotype(net)
    ind = evaluate(genotype, net, rules, caches)
    report = validate(solution, net, rules, caches)
    cost = ind.cost
    print(f"PDOs {cost.n_pdo}  drop {cost.drop_m:.1f} m  distribution {cost.dist_m:.1f} m")
    print(f"C_mat {cost.c_mat:.2f}  missing {cost.h_missing}  fitness {cost.fitness:.2f}")
    for f in report.findings:
        print(f"[{'FAIL' if f.hard else 'warn'}] {f.check}: {f.detail}")
    print("feasible" if report.feasible else "infeasible")
    if args.out:
        write_json({"cost": cost.as_dict(), "report": report.to_dict()}, Path(args.out))
    return 0 if report.feasible else 1


def _bench_specs(path: str) -> list[tuple[str, bench.InstanceSpec]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    items = doc.get("instances", []) if isinstance(doc, dict) else doc
    if not items:
        raise UsageError(f"{path}: no instances listed")
    specs = []
    for k, item in enumerate(items):
        item = dict(item)
        name = item.pop("name", f"inst{k}")
        count = int(item.pop("count", 1))
        base_seed = int(item.pop("seed", 0))
        for j in range(count):
            specs.append((f"{name}-{j}", bench.InstanceSpec.from_dict({**item, "seed": base_seed + j})))
    return specs


def cmd_bench(args: argparse.Namespace) -> int:
    specs = _bench_specs(args.spec)
    rules, ga_section = _rules(args.rules)
    config = _ga_config(ga_section, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, spec in specs:
        net = preprocess(bench.synth_instance(spec))
        caches = Caches(net, rules)
        summary = bench.run_stats(net, rules, config, n_runs=args.runs, caches=caches)
        greedy = bench.greedy_baseline(net, rules, caches)
        try:
            oracle = bench.brute_force_oracle(net, rules, caches).fitness
        except FibrePlanError:
            oracle = None
        table = summary.table()
        _write_comparison(out / f"table_{name}.csv", table, greedy)
        rows.append({
            "instance": name,
            "n_candidates": len(net.candidates),
            "n_clients": len(net.clients),
            "ga_best": table["fitness"]["best"],
            "ga_mean": table["fitness"]["mean"],
            "ga_std": table["fitness"]["std"],
            "greedy": greedy.fitness,
            "oracle": "" if oracle is None else oracle,
            "ga_mean_le_greedy": table["fitness"]["mean"] <= greedy.fitness,
        })
        print(f"{name}: GA best {rows[-1]['ga_best']:.1f} mean {rows[-1]['ga_mean']:.1f}, "
              f"greedy {greedy.fitness:.1f}, oracle {'-' if oracle is None else f'{oracle:.1f}'}")
    with (out / "comparison.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: f"{v:.6f}" if isinstance(v, float) else v for k, v in row.items()})
    return 0


def _write_comparison(path: Path, table: dict, greedy) -> None:
    greedy_values = {
        "n_pdo": greedy.cost.n_pdo, "drop_km": greedy.cost.drop_m / 1000,
        "dist_km": greedy.cost.dist_m / 1000, "fitness": greedy.fitness,
    }
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "greedy", "ga_best", "ga_worst", "ga_median", "ga_mean", "ga_std"])
        for m, row in table.items():
            writer.writerow([m, f"{float(greedy_values[m]):.6f}"] + [f"{row[k]:.6f}" for k in ("best", "worst", "median", "mean", "std")])


def cmd_synth(args: argparse.Namespace) -> int:
    spec = bench.map1_like(args.seed) if args.preset == "map1" else bench.tiny_spec(args.seed)
    save_map(bench.synth_instance(spec), Path(args.out))
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fibreplan", description="GA-based FTTH/GPON access network design")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def ga_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--rules", help=f"rules document (default: ${RULES_ENV} or built-in defaults)")
        p.add_argument("--seed", type=int, help="first run seed")
        p.add_argument("--runs", type=int, default=1)
        p.add_argument("--generations", type=int)
        p.add_argument("--population", type=int)

    p = sub.add_parser("design", help="design a network for a map")
    p.add_argument("--map", required=True)
    ga_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--allow-infeasible", action="store_true")
    p.add_argument("--format", action="append", choices=FORMATS, help="artifacts to write (repeatable; default all)")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("validate", help="check and cost an external design")
    p.add_argument("--map", required=True)
    p.add_argument("--rules")
    p.add_argument("--solution", required=True)
    p.add_argument("--out", help="write cost and findings as JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="GA vs greedy vs oracle on synthetic instances")
    p.add_argument("--spec", required=True)
    ga_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a synthetic map document")
    p.add_argument("--preset", choices=("map1", "tiny"), default="map1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "runs", 1) is not None and getattr(args, "runs", 1) < 1:
        parser.error("--runs must be >= 1")
    try:
        return args.func(args)
    except (FibrePlanError, UsageError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
