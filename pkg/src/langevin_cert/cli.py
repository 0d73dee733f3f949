"""Command line entry point: ``langevin-cert <task> --config run.ini --out dir``.

Exit codes: 0 when every check passes, 1 when any check fails or a
numerical routine gives up, 2 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import TASKS, ConfigError, RunConfig
from .errors import (CapabilityError, CertificateError, DomainError, NumericsError,
                     SetupError, StatisticsError)
from .harness import aggregate, dumps_report

OUTPUT_NAMES = {"certify": "certificate.json", "check-potential": "check_potential.json",
                "gamma-verify": "gamma_verify.json", "lyapunov-verify": "lyapunov_verify.json",
                "poincare": "poincare.json", "simulate": "simulate.json",
                "rate": "rate.json", "report": "report.json"}


def _global_flags(parser, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=default(None),
                        help="override the simulation and sampler seeds")
    parser.add_argument("--config", default=default(None), help="INI run configuration")
    parser.add_argument("--out", default=default("."), help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="langevin-cert", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="task", required=True)
    helps = {
        "certify": "build the convergence-rate certificate",
        "check-potential": "sweep the growth and singular-potential bounds",
        "gamma-verify": "iterated carre du champ identity and inequality suite",
        "lyapunov-verify": "drift condition and the hypotheses linking W, V and mu",
        "poincare": "grid estimate of the local Poincare constant",
        "simulate": "stationary-start ensemble written as CSV",
        "rate": "autocovariance decay fit compared with sigma / 2",
        "report": "aggregate the JSON outputs in --out",
        "run": "run the [run] tasks list of the configuration, then report",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def _load(args):
    if args.config is None:
        raise ConfigError("--config is required for this task")
    cfg = RunConfig.from_file(args.config)
    return cfg if args.seed is None else cfg.with_seed(args.seed)


def _write(out_dir, task, result):
    path = out_dir / OUTPUT_NAMES[task]
    path.write_text(dumps_report(result) + "\n")
    return path


def _report(out_dir):
    sections = {}
    for task, name in OUTPUT_NAMES.items():
        path = out_dir / name
        if task != "report" and path.is_file():
            sections[task] = json.loads(path.read_text())
    if not sections:
        raise ConfigError(f"no task outputs found in {out_dir}")
    return aggregate(sections)


def run_task(task, cfg, out_dir):
    if task == "certify":
        return pipeline.run_certify(cfg)
    if task == "check-potential":
        return pipeline.run_check_potential(cfg)
    if task == "gamma-verify":
        return pipeline.run_gamma_verify(cfg)
    if task == "lyapunov-verify":
        return pipeline.run_lyapunov_verify(cfg)
    if task == "poincare":
        return pipeline.run_poincare(cfg)
    if task == "simulate":
        return pipeline.run_simulate(cfg, out_dir)
    if task == "rate":
        cert_path = out_dir / OUTPUT_NAMES["certify"]
        cert = json.loads(cert_path.read_text()) if cert_path.is_file() else None
        return pipeline.run_rate(cfg, out_dir, cert)
    if task == "report":
        return _report(out_dir)
    raise ConfigError(f"unknown task {task!r}")


def _summary(task, result):
    status = "PASS" if result.get("passed") else "FAIL"
    extra = ""
    if task == "certify":
        extra = f" sigma={result['sigma']:.9g} route={result['route']}"
    elif task == "rate":
        c = result["comparison"]
        extra = f" rate={c['rate']:.4g}+-{c['stderr']:.2g} threshold={c['threshold']:.6g}"
    elif task == "poincare":
        extra = f" rho_K={result['rho_K']:.6g}"
    return f"{task}: {status}{extra}"


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.task == "report":
            tasks, cfg = ["report"], None
        else:
            cfg = _load(args)
            tasks = list(cfg.tasks) + ["report"] if args.task == "run" else [args.task]
        ok = True
        for task in tasks:
            result = run_task(task, cfg, out_dir)
            path = _write(out_dir, task, result)
            print(_summary(task, result) + f" -> {path}")
            ok = ok and bool(result.get("passed"))
        return 0 if ok else 1
    except (ConfigError, pipeline.UsageError, CapabilityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StatisticsError, NumericsError, CertificateError, SetupError, DomainError) as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
