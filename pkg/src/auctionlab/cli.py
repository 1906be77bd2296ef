"""Command-line interface.

Subcommands: repro (lower-bound reproductions), learn (no-regret play),
smooth (smoothness suites), approx (pointwise-approximation sweeps),
classify (valuation structure report), gen (instance files).  Exit code
0 when every assertion passes, 2 on an assertion failure, 1 on errors.
Set AUCTIONLAB_THREADS to run seeds concurrently.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import AuctionLabError
from .harness import (
    REPROS,
    ExperimentConfig,
    config_from_dict,
    parse_config,
    run_experiment,
    write_results,
)
from .hierarchy import classify
from .instances import GENERATORS, make_instance
from .valuations import load_valuation


def _parse_params(pairs: list[str]) -> dict:
    out: dict = {}
    for pair in pairs:
        if "=" not in pair:
            raise SystemExit(f"bad parameter {pair!r}; expected name=value")
        key, raw = pair.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _finish(records, args) -> int:
    if args.out:
        path = write_results(records, args.out, args.format)
        print(f"wrote {path}")
        if args.format == "csv" and not args.no_plot:
            from .plots import plot_records

            png = plot_records(records, Path(path).with_suffix(".png"))
            print(f"wrote {png}")
    for r in records:
        status = "pass" if r.passed else "FAIL"
        ratio = "" if r.ratio is None else f" ratio={r.ratio:.6g}"
        bound = "" if r.bound is None else f" bound={r.bound:.6g}"
        print(f"[{status}] {r.experiment} seed={r.seed}{ratio}{bound}")
    return 0 if all(r.passed for r in records) else 2


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, nargs="*", default=[0], help="seeds, one record each")
    p.add_argument("--out", help="output stem for csv/json (+ png figure)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p.add_argument("--config", help="JSON experiment config (overrides flags)")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="auctionlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_repro = sub.add_parser("repro", help="reproduce a named lower-bound instance")
    p_repro.add_argument("instance", choices=sorted(REPROS))
    p_repro.add_argument("--param", action="append", default=[], help="name=value")
    _add_common(p_repro)

    p_learn = sub.add_parser("learn", help="no-regret dynamics and welfare ratios")
    p_learn.add_argument("--instance", choices=sorted(GENERATORS), default="star")
    p_learn.add_argument("--param", action="append", default=[], help="name=value")
    p_learn.add_argument("--file", help="agents JSON file instead of a generator")
    p_learn.add_argument("--mechanism", choices=("single-bid", "grand-bundle"), default="single-bid")
    p_learn.add_argument("--rounds", type=int, default=10_000)
    p_learn.add_argument(
        "--history-out",
        help="stem for the first seed's per-round CSV, summary JSON, and curves figure",
    )
    _add_common(p_learn)

    p_smooth = sub.add_parser("smooth", help="hybrid smoothness suite")
    p_smooth.add_argument("--instance", choices=sorted(GENERATORS), default="star")
    p_smooth.add_argument("--param", action="append", default=[], help="name=value")
    p_smooth.add_argument("--trials", type=int, default=200)
    p_smooth.add_argument("--p", type=float, default=0.5)
    _add_common(p_smooth)

    p_approx = sub.add_parser("approx", help="pointwise-approximation sweep")
    p_approx.add_argument("--m", type=int, default=10)
    p_approx.add_argument("--d", type=int, default=2)
    p_approx.add_argument("--count", type=int, default=50)
    _add_common(p_approx)

    p_classify = sub.add_parser("classify", help="structure report for a valuation file")
    p_classify.add_argument("valuation", help="valuation JSON path")

    p_gen = sub.add_parser("gen", help="write an instance file plus metadata sidecar")
    p_gen.add_argument("instance", choices=sorted(GENERATORS))
    p_gen.add_argument("--param", action="append", default=[], help="name=value")
    p_gen.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except AuctionLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _write_history_artifacts(config, args) -> None:
    from .harness import _resolve_agents
    from .learning import export_history_csv, export_history_summary, make_grid, no_regret_run

    seed = args.seed[0]
    vals, bundle = _resolve_agents(config, seed)
    critical = bundle.meta.critical_bids if bundle else ()
    grids = [make_grid(v, critical=critical) for v in vals]
    mech = config.mechanism if config.mechanism != "hybrid" else "single-bid"
    history = no_regret_run(vals, mech, grids, config.rounds, seed=seed)
    stem = Path(args.history_out)
    export_history_csv(history, stem.with_suffix(".csv"))
    export_history_summary(history, stem.with_suffix(".json"))
    print(f"wrote {stem.with_suffix('.csv')} and {stem.with_suffix('.json')}")
    if not args.no_plot:
        from .optimizer import optimal_allocation
        from .plots import plot_learning

        opt = optimal_allocation(vals)[1] if vals[0].m <= 16 else None
        png = plot_learning(history, stem.with_suffix(".png"), opt=opt)
        print(f"wrote {png}")


def _dispatch(args) -> int:
    if args.command == "classify":
        data = json.loads(Path(args.valuation).read_text())
        if "agents" in data:
            from .valuations import valuation_from_dict

            labels = [classify(valuation_from_dict(v)).to_dict() for v in data["agents"]]
            print(json.dumps(labels, indent=2))
        else:
            print(json.dumps(classify(load_valuation(args.valuation)).to_dict(), indent=2))
        return 0

    if args.command == "gen":
        bundle = make_instance(args.instance, _parse_params(args.param))
        bundle.save(args.out)
        print(f"wrote {args.out} and {args.out}.meta.json")
        return 0

    if getattr(args, "config", None):
        config = parse_config(args.config)
        return _finish(run_experiment(config), args)

    if args.command == "repro":
        config = config_from_dict(
            {
                "experiment": "instance-repro",
                "instance": {"generator": args.instance, "params": _parse_params(args.param)},
                "seeds": args.seed,
            }
        )
        return _finish(run_experiment(config), args)

    if args.command == "learn":
        instance = {"file": args.file} if args.file else {
            "generator": args.instance,
            "params": _parse_params(args.param),
        }
        config = config_from_dict(
            {
                "experiment": "poa",
                "instance": instance,
                "mechanism": args.mechanism,
                "rounds": args.rounds,
                "seeds": args.seed,
            }
        )
        if args.history_out:
            _write_history_artifacts(config, args)
        return _finish(run_experiment(config), args)

    if args.command == "smooth":
        config = config_from_dict(
            {
                "experiment": "smoothness",
                "instance": {"generator": args.instance, "params": _parse_params(args.param)},
                "trials": args.trials,
                "p": args.p,
                "seeds": args.seed,
            }
        )
        return _finish(run_experiment(config), args)

    if args.command == "approx":
        config = config_from_dict(
            {
                "experiment": "approx",
                "instance": {"random": {"m": args.m, "d": args.d}},
                "trials": args.count,
                "seeds": args.seed,
            }
        )
        return _finish(run_experiment(config), args)

    raise SystemExit(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
