"""Command-line entry point: ``noisygp {gen-data,run,analyze,report}``.

Exit codes: 0 success, 2 bad configuration or arguments, 3 analysis input
problems, 4 filesystem errors, 1 anything else.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .datasets import BENCHMARKS, NOISE_GRID, get_spec, save_dataset
from .experiment import (
    PRESETS,
    SEED_ENV,
    MissingBaselineError,
    PlanError,
    RobustnessReport,
    analyze,
    cell_datasets,
    emit_plot_data,
    execute,
    noise_seed,
    plan_experiment,
)
from .records import read_records

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_ANALYSIS, EXIT_IO = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, category, code, message):
        super().__init__(message)
        self.category = category
        self.code = code


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _base_seed(cli_value):
    if os.environ.get(SEED_ENV):
        try:
            return int(os.environ[SEED_ENV])
        except ValueError:
            raise CliError("config", EXIT_CONFIG, f"{SEED_ENV} must be an integer") from None
    return cli_value if cli_value is not None else PRESETS["full"].base_seed


def cmd_gen_data(args):
    names = list(BENCHMARKS) if args.dataset in (None, ["all"]) else args.dataset
    for name in names:
        if name not in BENCHMARKS:
            raise CliError("config", EXIT_CONFIG, f"unknown dataset {name!r}")
    levels = args.noise if args.noise is not None else list(NOISE_GRID)
    for lvl in levels:
        if not 0.0 <= lvl <= 1.0:
            raise CliError("config", EXIT_CONFIG, f"noise level {lvl} outside [0, 1]")
    from dataclasses import replace

    plan = replace(PRESETS["full"], base_seed=_base_seed(args.seed), datasets=tuple(names), noise_levels=tuple(levels))
    out = Path(args.out)
    count = 0
    for name in names:
        samples = [s for s, _ in plan.samples(name)]
        if args.sample is not None:
            if args.sample not in samples:
                raise CliError("config", EXIT_CONFIG, f"{name} has samples {samples}, not {args.sample}")
            samples = [args.sample]
        for sample in samples:
            folder = out / name / f"sample{sample}"
            for lvl in levels:
                train, test = cell_datasets(plan, name, lvl, sample)
                seed = noise_seed(plan.base_seed, name, lvl, sample)
                save_dataset(train, folder / f"train_noise{round(lvl * 100):02d}.csv", seed=seed)
                count += 1
            save_dataset(test, folder / "test.csv", seed=plan.base_seed if get_spec(name).uniform else None)
            count += 1
    print(f"wrote {count} files under {out}")


def cmd_run(args):
    plan = plan_experiment(args.plan) if args.plan else plan_experiment(f"[plan]\npreset = {args.preset}\n")
    out = Path(args.out)
    if (out / "records.csv").exists() and not args.resume:
        raise CliError("config", EXIT_CONFIG, f"{out}/records.csv exists; pass --resume to continue it")
    records = execute(plan, out, parallelism=args.parallelism, resume=True)
    expected = len(plan.cells())
    print(f"{len(records)}/{expected} runs recorded in {out / 'records.csv'}")
    if len(records) < expected:
        raise CliError("run", EXIT_FAILURE, f"{expected - len(records)} runs failed; see {out / 'failures.log'}")


def cmd_analyze(args):
    records = read_records(args.records)
    if not records:
        raise CliError("analysis", EXIT_ANALYSIS, f"no records found in {args.records}")
    report = analyze(records, aggregate=args.aggregate)
    report.save(args.out)
    emit_plot_data(report, Path(args.out) / "plots")
    print(report.render())


def cmd_report(args):
    print(RobustnessReport.load(args.analysis).render())


def build_parser():
    p = argparse.ArgumentParser(prog="noisygp", description="GP vs GSGP noise-robustness experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="materialise benchmark datasets and noisy variants")
    g.add_argument("--dataset", action="append", help="benchmark name (repeatable; default all)")
    g.add_argument("--noise", type=_float_list, help="comma-separated noise fractions (default full grid)")
    g.add_argument("--sample", type=int, help="only this sample id")
    g.add_argument("--seed", type=int, help=f"base seed (overridden by ${SEED_ENV})")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    r = sub.add_parser("run", help="execute an experiment plan")
    r.add_argument("--plan", help="INI plan file")
    r.add_argument("--preset", choices=sorted(PRESETS), default="desk", help="used when --plan is absent")
    r.add_argument("--parallelism", type=int, default=1)
    r.add_argument("--resume", action="store_true", help="continue an existing records file")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="summaries, robustness measures, tests and plot data")
    a.add_argument("--records", required=True, help="run directory or records CSV")
    a.add_argument("--out", required=True)
    a.add_argument("--aggregate", choices=["metric_of_medians", "median_of_metrics"], default="metric_of_medians")
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("report", help="print the significance table of an analysis directory")
    t.add_argument("--analysis", required=True)
    t.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except CliError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.code
    except PlanError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingBaselineError, KeyError) as exc:
        print(f"error[analysis]: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:
        print(f"error[internal]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
