#!/usr/bin/env python3
"""
Command-line front-end for the school influenza pipeline.

Usage:
    school-flu [--seed N] [--threads N] [--out PATH] <command> [options]

Commands:
    fit               survey -> degree-parameter JSON (optionally ERGM coefficients)
    synth-friendship  roster + ERGM coefficients -> friendship edge list
    synth-contacts    one school-day contact network
    simulate          single outbreak -> trajectory CSV
    experiment        scenario JSON -> results CSV/JSON
    bootstrap         survey resample diagnostics
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from epidemics.interventions import InterventionConfig, InterventionKind
from networks.season_plan import Variant
from settings import LOG_FORMAT, LOG_LEVEL, SEED, THREADS

logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)
logger = logging.getLogger(__name__)


def _path(value: str) -> Path:
    return Path(value)


def _add_population_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--roster", type=_path, help="roster CSV; a synthetic roster is drawn when omitted")
    parser.add_argument("--friendship", type=_path, help="observed friendship edge list")
    parser.add_argument("--coefficients", type=_path, help="ERGM coefficient JSON")
    parser.add_argument("--params", type=_path, help="degree-parameter JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="school-flu", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--seed", type=int, default=None, help=f"master seed (default {SEED})")
    parser.add_argument("--threads", type=int, default=THREADS, help="worker processes for experiments")
    parser.add_argument("--out", type=_path, default=None, help="output file")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit the contact-degree models to a survey")
    fit.add_argument("survey", type=_path)
    fit.add_argument("--cutoff", type=int, default=30, help="lunch censoring cutoff")
    fit.add_argument("--class-friend-fraction", type=float, default=0.5)
    fit.add_argument("--roster", type=_path, help="roster CSV for the ERGM fit")
    fit.add_argument("--friendship", type=_path, help="observed friendship edge list for the ERGM fit")
    fit.add_argument("--ergm-out", type=_path, help="where to write fitted ERGM coefficients")

    friendship = sub.add_parser("synth-friendship", help="draw a friendship network")
    friendship.add_argument("--roster", type=_path)
    friendship.add_argument("--coefficients", type=_path)

    contacts = sub.add_parser("synth-contacts", help="compose one school-day contact network")
    _add_population_options(contacts)
    contacts.add_argument("--variant", type=Variant, choices=list(Variant), default=Variant.static)
    contacts.add_argument("--day", type=int, default=1)

    simulate = sub.add_parser("simulate", help="simulate one outbreak")
    _add_population_options(simulate)
    simulate.add_argument("--curves", type=_path, help="viral-load curve file")
    simulate.add_argument("--variant", type=Variant, choices=list(Variant), default=Variant.static)
    simulate.add_argument("--p-bar", type=float, default=0.004, help="mean per-unit transmission probability")
    simulate.add_argument(
        "--intervention", type=InterventionKind, choices=list(InterventionKind), default=InterventionKind.none
    )
    simulate.add_argument("--reporting-fraction", type=float, default=1.0)
    simulate.add_argument("--closure-days", type=int, default=None, help="reopen closed grades after this many days")
    simulate.add_argument("--season-length", type=int, default=365)
    simulate.add_argument("--index-cases", type=int, default=1)

    experiment = sub.add_parser("experiment", help="run scenario experiments")
    experiment.add_argument("scenarios", type=_path)
    _add_population_options(experiment)
    experiment.add_argument("--survey", type=_path, help="survey CSV; enables bootstrap refits")
    experiment.add_argument("--curves", type=_path)
    experiment.add_argument("--format", choices=["csv", "json"], default="csv")

    bootstrap = sub.add_parser("bootstrap", help="refit degree models on survey resamples")
    bootstrap.add_argument("survey", type=_path)
    bootstrap.add_argument("--replicates", type=int, default=20)
    bootstrap.add_argument("--cutoff", type=int, default=30)
    return parser


def dispatch(args: argparse.Namespace) -> None:
    # Stage modules configure logging on import, so they load only when used
    seed = args.seed if args.seed is not None else SEED
    if args.command == "fit":
        from fit import run_fit

        run_fit(
            survey_path=args.survey,
            out_path=args.out,
            cutoff=args.cutoff,
            class_friend_fraction=args.class_friend_fraction,
            roster_path=args.roster,
            friendship_path=args.friendship,
            ergm_out_path=args.ergm_out,
        )
    elif args.command == "synth-friendship":
        from synthesize import run_synth_friendship

        run_synth_friendship(args.roster, args.coefficients, args.out, seed=seed)
    elif args.command == "synth-contacts":
        from synthesize import run_synth_contacts

        run_synth_contacts(
            roster_path=args.roster,
            friendship_path=args.friendship,
            coefficients_path=args.coefficients,
            params_path=args.params,
            variant=args.variant,
            day=args.day,
            out_path=args.out,
            seed=seed,
        )
    elif args.command == "simulate":
        from simulate import run_simulate

        run_simulate(
            roster_path=args.roster,
            friendship_path=args.friendship,
            coefficients_path=args.coefficients,
            params_path=args.params,
            curves_path=args.curves,
            variant=args.variant,
            intervention=InterventionConfig(
                kind=args.intervention,
                reporting_fraction=args.reporting_fraction,
                closure_days=args.closure_days,
            ),
            p_bar=args.p_bar,
            season_length=args.season_length,
            n_index_cases=args.index_cases,
            out_path=args.out,
            seed=seed,
        )
    elif args.command == "experiment":
        from experiment import run_experiment_stage

        run_experiment_stage(
            scenarios_path=args.scenarios,
            roster_path=args.roster,
            survey_path=args.survey,
            params_path=args.params,
            coefficients_path=args.coefficients,
            friendship_path=args.friendship,
            curves_path=args.curves,
            out_path=args.out,
            fmt=args.format,
            threads=args.threads,
            seed=args.seed,
        )
    elif args.command == "bootstrap":
        from resample import run_bootstrap

        run_bootstrap(
            survey_path=args.survey,
            replicates=args.replicates,
            cutoff=args.cutoff,
            out_path=args.out,
            seed=seed,
        )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the command-line interface."""
    args = build_parser().parse_args(argv)
    logger.info(f"Running {args.command}...")
    try:
        dispatch(args)
    except Exception as e:
        logger.exception(f"Error during {args.command}: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
