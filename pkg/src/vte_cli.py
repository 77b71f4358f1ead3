"""Command line entry point: simulate, estimate, benchmark and report."""

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from logger import attach_console_handler, get_logger
from vte_benchmark import ESTIMANDS, METHODS, MethodRunner, RunConfig, parse_condition, run_benchmark
from vte_errors import VteError, VteInputError
from vte_file_reader import VteFileReader, normalize_outcomes
from vte_report import FORMATS, emit_report, emit_reports, load_result
from vte_simdata import SynthConfig, gen_synthetic

logger = get_logger(__name__)

USAGE_ERROR = 2

# Flags that map one-to-one onto RunConfig fields.
RUN_FLAGS = ("methods", "sizes", "reps", "seed", "estimand", "condition", "subset_tolerance", "k",
             "d", "rho", "noise_sd", "coupling", "cme_selection_rows", "workers", "out", "formats")


# Estimate-only flags recorded next to the estimate.
ESTIMATE_FLAGS = ("data", "n", "method", "treatment", "outcome", "conditioning", "categorical", "normalize",
                  "conditioning_source")

def _csv_list(text):
    return [part.strip() for part in text.split(",") if part.strip()]


def _add_run_flags(parser):
    parser.add_argument("--config", help="JSON file of RunConfig fields; explicit flags override it")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--d", type=int, help="covariate dimension of synthetic data")
    parser.add_argument("--rho", type=float)
    parser.add_argument("--noise-sd", dest="noise_sd", type=float)
    parser.add_argument("--coupling", choices=("independent", "shared"))
    parser.add_argument("--estimand", choices=ESTIMANDS)
    parser.add_argument("--condition", help='conditioning query such as "x2=0"')
    parser.add_argument("--subset-tolerance", dest="subset_tolerance", type=float)
    parser.add_argument("--k", type=int, help="neighbours per unit for matching")
    parser.add_argument("--cme-selection-rows", dest="cme_selection_rows", type=int)
    parser.add_argument("--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="vte", description="Variance of treatment effect estimation and benchmarks.")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="write a synthetic dataset as CSV")
    simulate.add_argument("--n", type=int, required=True)
    simulate.add_argument("--d", type=int, default=100)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--rho", type=float, default=0.5)
    simulate.add_argument("--noise-sd", dest="noise_sd", type=float, default=1.0)
    simulate.add_argument("--coupling", choices=("independent", "shared"), default="independent")
    simulate.add_argument("--effect-scale", dest="effect_scale", type=float, default=1.0)
    simulate.add_argument("--external-v", dest="external_v", action="store_true",
                          help="append an independent conditioning column v1")
    simulate.add_argument("--out", required=True, help="CSV file to write")
    simulate.add_argument("--verbose", action="store_true")

    estimate = commands.add_parser("estimate", help="run one method on one dataset")
    _add_run_flags(estimate)
    estimate.add_argument("--data", help="CSV dataset; synthetic data from --n/--d/--seed when omitted")
    estimate.add_argument("--n", type=int, default=1000)
    estimate.add_argument("--method", choices=METHODS, default="proposed")
    estimate.add_argument("--treatment", default="a")
    estimate.add_argument("--outcome", default="y")
    estimate.add_argument("--conditioning", type=_csv_list, default=[], help="comma-separated conditioning columns")
    estimate.add_argument("--categorical", type=_csv_list, default=[], help="comma-separated categorical columns")
    estimate.add_argument("--normalize", action="store_true", help="rescale outcomes to unit variance first")
    estimate.add_argument("--conditioning-source", dest="conditioning_source", choices=("covariate", "external"),
                          default="covariate")
    estimate.add_argument("--out", help="JSON file for the estimate")

    benchmark = commands.add_parser("benchmark", help="run the full method by size grid")
    _add_run_flags(benchmark)
    benchmark.add_argument("--reps", type=int)
    benchmark.add_argument("--sizes", type=lambda text: [int(size) for size in _csv_list(text)])
    benchmark.add_argument("--methods", type=_csv_list)
    benchmark.add_argument("--workers", type=int)
    benchmark.add_argument("--formats", type=_csv_list)
    benchmark.add_argument("--out", help="output directory")

    report = commands.add_parser("report", help="reformat a JSON result file")
    report.add_argument("--input", required=True, help="results.json written by benchmark")
    report.add_argument("--format", choices=FORMATS, default="csv")
    report.add_argument("--out", required=True)
    report.add_argument("--verbose", action="store_true")

    return parser


def resolve_config(args):
    """RunConfig from defaults, then the --config file, then explicit flags."""
    values = {}

    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as file:
            try:
                values = json.load(file)
            except json.JSONDecodeError as exc:
                raise VteInputError(f"Config file {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(values, dict):
            raise VteInputError(f"Config file {args.config} must hold a JSON object")

    for name in RUN_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value

    return RunConfig.from_dict(values)


def config_path(out):
    """Where the resolved config of a single-file output goes: results.csv -> results.config.json."""
    out = Path(out)
    return out.with_name(f"{out.stem}.config.json")


def write_config(values, path):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as file:
        json.dump(values, file, indent=2)
    logger.info(f"Wrote resolved config to {path}")

    return path


def _simulate(args):
    cfg = SynthConfig(n=args.n, d=args.d, rho=args.rho, noise_sd=args.noise_sd, seed=args.seed, coupling=args.coupling,
                      effect_scale=args.effect_scale, conditioning="independent" if args.external_v else "none")
    data, _ = gen_synthetic(cfg)
    VteFileReader().write_dataset(data, args.out)
    write_config(asdict(cfg), config_path(args.out))

    return 0


def _load_estimate_data(args, cfg):
    if args.data is None:
        synth = SynthConfig(n=args.n, d=cfg.d, rho=cfg.rho, noise_sd=cfg.noise_sd, seed=cfg.seed, coupling=cfg.coupling,
                            conditioning="independent" if args.conditioning_source == "external" else "none")
        data, _ = gen_synthetic(synth)
        return data, None

    reader = VteFileReader()
    schema = reader.default_schema(reader.read_columns(args.data), args.treatment, args.outcome,
                                   args.conditioning, args.categorical)
    data = reader.read_dataset(args.data, schema)

    if args.normalize:
        data, scale = normalize_outcomes(data)
        return data, scale

    return data, None


def _estimate_config(args, cfg):
    values = cfg.to_dict()
    values.update({name: getattr(args, name) for name in ESTIMATE_FLAGS})

    return values


def _estimate(args):
    cfg = resolve_config(args)
    condition = parse_condition(cfg.condition) if cfg.condition is not None else None

    if (cfg.estimand == "cvte") != (condition is not None):
        raise VteInputError("A condition is required for cvte and only allowed for cvte")
    if condition is not None:
        expected = "v" if args.conditioning_source == "external" else "x"
        if condition.source != expected:
            raise VteInputError(f"Condition {cfg.condition} does not match conditioning source {args.conditioning_source}")

    data, scale = _load_estimate_data(args, cfg)
    runner = MethodRunner(data, cfg.estimand, condition, cfg)

    output = {"method": args.method, "estimand": cfg.estimand, "condition": cfg.condition, "outcome_scale": scale}
    if args.method == "proposed":
        report = runner.proposed_report()
        output.update(asdict(report))
        output["bandwidths"] = list(report.bandwidths)
    else:
        output["estimate"] = runner.run(args.method)

    text = json.dumps(output, indent=2)
    print(text)

    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        logger.info(f"Wrote estimate to {args.out}")
        write_config(_estimate_config(args, cfg), config_path(args.out))

    return 0


def _benchmark(args):
    cfg = resolve_config(args)
    result = run_benchmark(cfg)

    out = Path(cfg.out)
    emit_reports(result, out, cfg.formats)
    write_config(cfg.to_dict(), out / "config.json")

    return 0


def _report(args):
    emit_report(load_result(args.input), args.format, args.out)

    return 0


COMMANDS = {"simulate": _simulate, "estimate": _estimate, "benchmark": _benchmark, "report": _report}


def main(argv=None):
    """Runs one subcommand and returns the process exit status."""
    args = build_parser().parse_args(argv)
    attach_console_handler(args.verbose)

    try:
        return COMMANDS[args.command](args)
    except (VteError, OSError) as exc:
        logger.error(f"{args.command} failed: {exc}")
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
