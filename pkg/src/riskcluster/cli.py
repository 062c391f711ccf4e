"""Command line entry point: ``riskcluster generate | run | agegroups``.

Exit codes: 0 success, 1 data error, 2 configuration or I/O error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import config_digest, generator_config, load_config, pipeline_settings, with_pipeline_overrides
from .errors import ConfigError, IoFailure, RiskClusterError
from .pipeline import file_digest, run_age_group_experiment, run_cluster_experiment, write_reports
from .schema import parse_cohort_csv, write_cohort_csv
from .synth import generate_cohort

log = logging.getLogger("riskcluster")


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors (exit 2), which argparse already uses

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="riskcluster", description="Cluster-stratified LASSO risk models for child protection notifications.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic cohort CSV")
    g.add_argument("--config", required=True, help="YAML file with a 'generator' section")
    g.add_argument("--out", required=True, help="output CSV path")
    g.add_argument("--n", type=int, help="override the number of records")
    g.add_argument("--seed", type=int, help="override the generator seed")

    for name, text in (("run", "cluster experiment: whole cohort plus one model per cluster"),
                       ("agegroups", "one model per child age band")):
        r = sub.add_parser(name, help=text)
        r.add_argument("--input", required=True, help="cohort CSV")
        r.add_argument("--config", required=True, help="YAML file with a 'pipeline' section")
        r.add_argument("--seed", type=int, required=True, help="master seed")
        r.add_argument("--out-dir", required=True, help="directory for reports and figures")
        r.add_argument("--k", type=int, help="fix the number of clusters instead of the elbow choice")
        r.add_argument("--kmax", type=int, help="largest K in the elbow scan")
        r.add_argument("--components", type=int, help="fix the number of principal components")
        r.add_argument("--threshold", help="classification threshold in [0, 1] or 'youden'")
        r.add_argument("--lambda-rule", choices=("min", "1se"))
        r.add_argument("--stratify", action="store_true", default=None, help="stratify the train/test split by outcome")
        r.add_argument("--force", action="store_true", help="overwrite a previous run in --out-dir")
    return p


def _threshold(text: str | None):
    if text is None or text == "youden":
        return text
    try:
        t = float(text)
    except ValueError:
        raise ConfigError(f"--threshold must be a number or 'youden', got {text!r}") from None
    if not 0.0 <= t <= 1.0:
        raise ConfigError(f"--threshold {t} outside [0, 1]")
    return t


def cmd_generate(args) -> None:
    cfg = load_config(args.config)
    gen = generator_config(cfg, n=args.n, seed=args.seed)
    cohort = generate_cohort(gen)
    try:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_cohort_csv(cohort, args.out)
    except OSError as err:
        raise IoFailure(f"cannot write {args.out}: {err}") from None
    log.info("wrote %d records to %s", len(cohort), args.out)


def cmd_experiment(args) -> None:
    cfg = load_config(args.config)
    cfg = with_pipeline_overrides(
        cfg,
        k=args.k,
        kmax=args.kmax,
        components=args.components,
        threshold=_threshold(args.threshold),
        lambda_rule=args.lambda_rule,
        stratify=args.stratify,
    )
    settings = pipeline_settings(cfg)
    out_dir = Path(args.out_dir)
    if out_dir.is_dir() and any(out_dir.iterdir()) and not args.force:
        # fail before the expensive part
        raise IoFailure(f"{out_dir} already holds a previous run; pass --force to overwrite")
    try:
        cohort = parse_cohort_csv(args.input)
    except OSError as err:
        raise IoFailure(f"cannot read {args.input}: {err}") from None
    run = run_cluster_experiment if args.command == "run" else run_age_group_experiment
    report = run(cohort, settings, args.seed)
    extra = {
        "command": args.command,
        "config_digest": config_digest(cfg),
        "input_digest": file_digest(args.input),
        "settings": settings.as_dict(),
        "version": __version__,
    }
    write_reports(report, out_dir, extra, force=args.force)
    for r in report.rows:
        if r.status == "ok":
            log.info("%-12s auc=%.3f tpr=%.3f tnr=%.3f", r.model_id, r.auc, r.tpr, r.tnr)
        else:
            log.info("%-12s absent (%s)", r.model_id, r.note)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            cmd_generate(args)
        else:
            cmd_experiment(args)
    except RiskClusterError as err:
        print(f"riskcluster: {type(err).__name__}: {err}", file=sys.stderr)
        return err.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
