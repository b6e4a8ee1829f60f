"""Command-line entry points.

Every subcommand reads a ``key = value`` configuration file and applies
``--set key=value`` overrides on top, so scripted runs can tweak one
knob without editing files.  Exit codes: 0 success, 2 configuration
problems, 3 data problems, 4 estimation failures.
"""

from __future__ import annotations

import argparse
import sys

from .dataio import config_hash, parse_kv_file, write_manifest
from .errors import ConfigError, DataError, EstimationError
from .pipeline import PipelineConfig, build_panel, estimate_panel, load_corpus, run_pipeline
from .simulate import SimConfig, export_economy, generate


def _mapping_from_args(args) -> dict[str, str]:
    mapping = parse_kv_file(args.config) if args.config else {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def _cmd_simulate(args) -> int:
    mapping = _mapping_from_args(args)
    config = SimConfig.from_mapping(mapping)
    economy = generate(config)
    files = export_economy(economy, args.out)
    write_manifest(args.out, config_hash(config.to_mapping()), config.seed, files)
    print(f"wrote {len(files)} tables and manifest.txt to {args.out}")
    return 0


def _cmd_ingest(args) -> int:
    config = PipelineConfig.from_mapping(_mapping_from_args(args))
    corpus = load_corpus(config)
    for key, val in corpus.validate().items():
        print(f"{key} = {val}")
    return 0


def _cmd_measure(args) -> int:
    from .dataio import fmt_float, write_table
    from .pipeline import corpus_values, period_data
    from .measures import build_vocab

    config = PipelineConfig.from_mapping(_mapping_from_args(args))
    corpus = load_corpus(config)
    values = corpus_values(corpus, config)
    vocab = build_vocab([p.subgroup for p in corpus.patents], config.category_level)
    data = period_data(corpus, args.period, values, vocab, config.category_level)
    meas = data.measures
    rows = [
        [
            inv,
            str(int(meas.n_collab[i])),
            fmt_float(meas.ybar[i]),
            fmt_float(meas.y[i]),
            fmt_float(meas.y_count[i]),
            fmt_float(meas.y_quality[i]),
            fmt_float(meas.kd[i]),
        ]
        for i, inv in enumerate(meas.node_ids)
    ]
    write_table(args.out, ["inventor", "n_collab", "ybar", "y", "y_count", "y_quality", "kd"], rows)
    print(f"wrote measures for period {args.period} ({len(rows)} inventors) to {args.out}")
    return 0


def _cmd_estimate(args) -> int:
    config = PipelineConfig.from_mapping(_mapping_from_args(args))
    corpus = load_corpus(config)
    panel, _ = build_panel(corpus, config)
    est = estimate_panel(panel, config)
    for label, fit in est.fits.items():
        print(f"== {label} ==")
        print(fit.summary())
    d = est.decomposition
    print(
        f"margins: total {d.beta:.4f}, count {d.beta_count:.4f}, quality {d.beta_quality:.4f},"
        f" quality share {d.ratio:.3f} [{d.ratio_ci[0]:.3f}, {d.ratio_ci[1]:.3f}]"
    )
    return 0


def _cmd_pipeline(args) -> int:
    config = PipelineConfig.from_mapping(_mapping_from_args(args))
    summary = run_pipeline(config)
    print(f"panel inventors: {summary['panel_inventors']}, clusters: {summary['clusters']}")
    for rule, count in summary["exclusions"].items():
        if count:
            print(f"excluded ({rule}): {count}")
    print(f"reports written to {config.out_dir}")
    return 0


def _cmd_counterfactual(args) -> int:
    mapping = _mapping_from_args(args)
    mapping["counterfactual"] = "on"
    config = PipelineConfig.from_mapping(mapping)
    summary = run_pipeline(config)
    result = summary["counterfactual"]
    print(
        f"rewired mean beta {result.mean_beta:.4f}, baseline {result.baseline_beta:.4f},"
        f" ratio {result.ratio:.3f} ({result.n_draws} draws,"
        f" {result.dropped_infeasible} infeasible inventor-draws)"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knowex",
        description="Collaboration-network knowledge measures and panel IV estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")

    p = sub.add_parser("simulate", help="generate a synthetic economy corpus")
    common(p)
    p.add_argument("--out", required=True, help="output directory for the corpus tables")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("ingest", help="read and validate the corpus, print counts")
    common(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("measure", help="write the measure table for one period")
    common(p)
    p.add_argument("--period", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_measure)

    p = sub.add_parser("estimate", help="build the panel and print estimates")
    common(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("pipeline", help="run every stage and write reports")
    common(p)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("counterfactual", help="run the pipeline with the rewiring ensemble on")
    common(p)
    p.set_defaults(func=_cmd_counterfactual)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except EstimationError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
