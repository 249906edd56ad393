"""``sim`` command line: generate scenarios, run batches, print frontiers."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import NegotiationError
from .sim import GeneratorSpec, Scenario, generate_scenarios, pareto_frontier, run_batch


def _load_scenario(path: str) -> Scenario:
    return Scenario.from_dict(json.loads(Path(path).read_text()))


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_run(args: argparse.Namespace) -> None:
    report = run_batch(_load_scenario(args.scenario), args.grid)
    _write(args.out, report.to_json())


def cmd_gen(args: argparse.Namespace) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = GeneratorSpec(count=args.count, seed=args.seed, replications=args.replications)
    for scenario in generate_scenarios(spec):
        (out / f"{scenario.name}.json").write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")


def cmd_pareto(args: argparse.Namespace) -> None:
    s = _load_scenario(args.scenario)
    frontier = pareto_frontier(s.buyer_profile, s.seller_profile, args.grid)
    doc = {
        "scenario": s.name,
        "grid_points_per_issue": args.grid,
        "frontier": [{"buyer_utility": b, "seller_utility": u} for b, u in frontier],
    }
    _write(args.out, json.dumps(doc, indent=2) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sim", description="Batch negotiation simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario's replications and write a metrics report")
    run.add_argument("--scenario", required=True)
    run.add_argument("--out", default="-")
    run.add_argument("--grid", type=int, default=11, help="frontier grid points per issue")
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen", help="generate random scenario files")
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--replications", type=int, default=2)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_gen)

    pareto = sub.add_parser("pareto", help="print the brute-force Pareto frontier of a scenario")
    pareto.add_argument("--scenario", required=True)
    pareto.add_argument("--grid", type=int, default=11)
    pareto.add_argument("--out", default="-")
    pareto.set_defaults(func=cmd_pareto)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (NegotiationError, ValueError, OSError) as exc:
        print(f"sim: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
