"""Command-line front end.

Commands: ``fit``, ``compare``, ``loocv-check``, ``simulate``. Settings come
from an optional YAML ``--config`` file; command-line flags override it.
Exit codes: 0 success, 1 usage/config/data error, 2 convergence failure,
3 numerical singularity.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .criteria import (
    assess,
    loocv_subfits,
    magnitude_label,
    omega_vs_kappa_diagnostic,
    risk_difference,
)
from .estimation import ConvergenceError, DataModelMismatch, Dataset, fit
from .io import DatasetError, load_yaml, read_dataset, write_report
from .models import ASSESSMENTS, MODEL_NAMES, aic_d, make_model, ridge
from .numopt import OptimizerSettings, SingularMatrixError
from .simulation import (
    RNG_NAME,
    DesignError,
    SimulationDesign,
    SimulationFailure,
    large_design,
    run_replications,
    small_design,
)

log = logging.getLogger("uacv")

EXIT_OK, EXIT_USAGE, EXIT_CONVERGENCE, EXIT_SINGULAR = 0, 1, 2, 3
LOOCV_MAX_N = 20000
DESIGN_KEYS = ("levels", "beta0", "beta1", "beta2", "sigma2", "n", "replications", "seed",
               "mc_size", "cutoff_basis")


class ConfigError(ValueError):
    pass


@dataclass
class ModelSpec:
    name: str
    assessment: Optional[str] = None
    coarsen_level: Optional[int] = None
    ridge: Optional[float] = None
    penalty_scale: str = "map"

    def label(self):
        out = self.name
        if self.assessment:
            out += f"[{self.assessment}" + (f":{self.coarsen_level}" if self.coarsen_level is not None else "") + "]"
        if self.ridge:
            out += f"+ridge({self.ridge:g},{self.penalty_scale})"
        return out

    def build(self, data: Dataset):
        penalty = ridge(self.ridge) if self.ridge else None
        return make_model(self.name, data.covariate_dimension, levels=data.ordinal_levels,
                          assessment=self.assessment, coarsen_level=self.coarsen_level,
                          penalty=penalty, penalty_scale=self.penalty_scale)


@dataclass
class RunConfig:
    command: str
    dataset_path: Optional[str] = None
    models: list = field(default_factory=list)
    design_path: Optional[str] = None
    design: Optional[dict] = None
    output_path: str = "-"
    alpha: float = 0.05
    seed: Optional[int] = None
    levels: Optional[int] = None
    reps: Optional[int] = None
    mc_size: Optional[int] = None
    threads: int = 1
    max_n: int = LOOCV_MAX_N

    def validate(self):
        if self.command in ("fit", "compare", "loocv-check") and not self.dataset_path:
            raise ConfigError(f"{self.command}: a dataset path is required")
        if self.command in ("fit", "loocv-check") and len(self.models) != 1:
            raise ConfigError(f"{self.command}: exactly one model is required, got {len(self.models)}")
        if self.command == "compare" and len(self.models) != 2:
            raise ConfigError(f"compare: exactly two models are required, got {len(self.models)}")
        if self.command == "simulate" and not (self.design_path or self.design):
            raise ConfigError("simulate: a design (--design or config 'design') is required")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        for m in self.models:
            if m.name not in MODEL_NAMES:
                raise ConfigError(f"unknown model {m.name!r}; choose from {MODEL_NAMES}")
            if m.assessment is not None and m.assessment not in ASSESSMENTS:
                raise ConfigError(f"unknown assessment {m.assessment!r}; choose from {ASSESSMENTS}")


def _parse_assessment(text):
    name, _, level = str(text).partition(":")
    return name, (int(level) if level else None)


def _spec_from_mapping(m) -> ModelSpec:
    if isinstance(m, str):
        return ModelSpec(m)
    assessment, level = _parse_assessment(m["assessment"]) if m.get("assessment") else (None, None)
    pen = m.get("penalty") or {}
    return ModelSpec(m["name"], assessment, m.get("coarsen_level", level),
                     pen.get("ridge"), pen.get("scale", m.get("penalty_scale", "map")))


def build_config(args) -> RunConfig:
    raw = load_yaml(args.config) if args.config else {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    cfg = RunConfig(command=args.command)
    cfg.dataset_path = raw.get("dataset")
    cfg.models = [_spec_from_mapping(m) for m in raw.get("models", [])]
    design = raw.get("design")
    if isinstance(design, dict):
        cfg.design = design
    elif design is not None:
        cfg.design_path = str(design)
    cfg.output_path = raw.get("out", cfg.output_path)
    cfg.alpha = float(raw.get("alpha", cfg.alpha))
    cfg.seed = raw.get("seed")
    cfg.levels = raw.get("levels")
    cfg.reps = raw.get("reps")
    cfg.mc_size = raw.get("mc_size")
    cfg.threads = int(raw.get("threads", cfg.threads))
    cfg.max_n = int(raw.get("max_n", cfg.max_n))

    # flags win over the config file
    if getattr(args, "dataset", None):
        cfg.dataset_path = args.dataset
    if args.model:
        assessments = args.assessment or []
        if len(assessments) not in (0, 1, len(args.model)):
            raise ConfigError("give one --assessment, or one per --model")
        if len(assessments) == 1:
            assessments = assessments * len(args.model)
        cfg.models = []
        for i, name in enumerate(args.model):
            a, lvl = _parse_assessment(assessments[i]) if assessments else (None, None)
            if name == "threshold" and a == "discretized":
                a = None
            cfg.models.append(ModelSpec(name, a, lvl))
    elif args.assessment:
        for m, a in zip(cfg.models, args.assessment * len(cfg.models)):
            m.assessment, m.coarsen_level = _parse_assessment(a)
    if args.penalty:
        kind, _, lam = args.penalty.partition(":")
        if kind != "ridge" or not lam:
            raise ConfigError("--penalty must look like ridge:LAMBDA")
        for m in cfg.models:
            m.ridge = float(lam)
    if args.penalty_scale:
        for m in cfg.models:
            m.penalty_scale = args.penalty_scale
    if getattr(args, "design", None):
        cfg.design_path, cfg.design = args.design, None
    for name in ("alpha", "seed", "levels", "reps", "mc_size", "threads", "max_n"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if args.out:
        cfg.output_path = args.out
    cfg.validate()
    return cfg


def _settings():
    return OptimizerSettings()


def _load(cfg: RunConfig) -> Dataset:
    return read_dataset(cfg.dataset_path, levels=cfg.levels)


def _fit_rows(prefix, spec, lp, data, fr, report):
    rows = [
        (prefix, "model", spec.label()),
        (prefix, "n", data.n),
        (prefix, "p", fr.p),
    ]
    rows += [(f"{prefix}.theta", lab, v) for lab, v in zip(lp.labels, fr.theta_hat)]
    rows += [
        (prefix, "converged", fr.converged),
        (prefix, "iterations", fr.iterations),
        (prefix, "gradient_norm", fr.gradient_norm),
        (prefix, "clamped", fr.clamped),
        (prefix, "psi_bar", report.psi_bar),
        (prefix, "correction", report.correction),
        (prefix, "uacv", report.uacv),
        (prefix, "kappa_hat", report.kappa_hat),
    ]
    if lp.estimating_is_nll:
        # naive AIC: the estimating likelihood taken as is
        rows.append((prefix, "aic", fr.phi_bar + fr.p / data.n))
    if lp.assessment_is_discrete_logscore:
        rows.append((prefix, "aic_d", aic_d(report.psi_bar, fr.p, data.n)))
    return rows


def _fit_one(spec, data):
    lp = spec.build(data)
    fr = fit(lp, data, settings=_settings())
    return lp, fr, assess(lp, data, fr)


def cmd_fit(cfg: RunConfig) -> int:
    data = _load(cfg)
    spec = cfg.models[0]
    lp, fr, report = _fit_one(spec, data)
    write_report(cfg.output_path, _fit_rows("model", spec, lp, data, fr, report))
    return EXIT_OK


def cmd_compare(cfg: RunConfig) -> int:
    data = _load(cfg)
    rows, reports = [], []
    for i, spec in enumerate(cfg.models, start=1):
        lp, fr, report = _fit_one(spec, data)
        rows += _fit_rows(f"model{i}", spec, lp, data, fr, report)
        reports.append(report)
    rd = risk_difference(reports[0], reports[1], cfg.alpha)
    omega, kg, kh = omega_vs_kappa_diagnostic(*reports)
    better = "model1" if rd.d_uacv < 0 else "model2" if rd.d_uacv > 0 else "tie"
    rows += [
        ("comparison", "d_uacv", rd.d_uacv),
        ("comparison", "omega_hat", omega),
        ("comparison", "kappa_model1", kg),
        ("comparison", "kappa_model2", kh),
        ("comparison", "alpha", rd.alpha),
        ("comparison", "lower", rd.lower),
        ("comparison", "upper", rd.upper),
        ("comparison", "magnitude", magnitude_label(rd.d_uacv)),
        ("comparison", "better", better),
    ]
    write_report(cfg.output_path, rows)
    return EXIT_OK


def cmd_loocv_check(cfg: RunConfig) -> int:
    data = _load(cfg)
    if data.n > cfg.max_n:
        raise ConfigError(f"loocv-check: n={data.n} exceeds the refit guard {cfg.max_n} "
                          "(raise it with --max-n)")
    spec = cfg.models[0]
    lp, fr, report = _fit_one(spec, data)
    loo = loocv_subfits(lp, data, fr, _settings(), threads=cfg.threads)
    rows = _fit_rows("model", spec, lp, data, fr, report) + [
        ("loocv", "exact_cv", loo.cv),
        ("loocv", "uacv", report.uacv),
        ("loocv", "gap", loo.cv - report.uacv),
        ("loocv", "cold_restarts", loo.cold_restarts),
        ("loocv", "max_iterations", int(loo.iterations.max())),
        ("loocv", "worst_index", loo.worst_index),
        ("loocv", "worst_gradient_norm", float(loo.gradient_norms.max())),
    ]
    write_report(cfg.output_path, rows)
    return EXIT_OK


def load_design(cfg: RunConfig) -> SimulationDesign:
    if cfg.design is not None:
        raw, base = dict(cfg.design), None
    elif cfg.design_path in ("small", "large"):
        raw, base = {}, cfg.design_path
    else:
        raw, base = load_yaml(cfg.design_path), None
    unknown = set(raw) - set(DESIGN_KEYS) - {"preset"}
    if unknown:
        raise DesignError(f"unknown design keys: {sorted(unknown)}")
    base = raw.pop("preset", base)
    if cfg.seed is not None:
        raw["seed"] = cfg.seed
    if cfg.reps is not None:
        raw["replications"] = cfg.reps
    if cfg.mc_size is not None:
        raw["mc_size"] = cfg.mc_size
    try:
        if base == "small":
            return small_design(**raw)
        if base == "large":
            return large_design(**raw)
        missing = [k for k in ("levels", "beta0", "beta1", "beta2", "sigma2") if k not in raw]
        if missing:
            raise DesignError(f"design is missing keys: {missing}")
        return SimulationDesign(**raw)
    except TypeError as exc:
        raise DesignError(str(exc)) from None


def simulation_rows(table):
    return [tuple(r) for r in table.rows()]


def simulation_metadata(design, table):
    return [
        f"uacv {__version__} simulate",
        f"rng={RNG_NAME}",
        f"seed={design.seed}",
        f"levels={design.levels} beta0={design.beta0:g} beta1={design.beta1:g} "
        f"beta2={design.beta2:g} sigma2={design.sigma2:g}",
        f"n={design.n} replications={design.replications} mc_size={design.mc_size}",
        f"cutoffs={' '.join(f'{c:.6g}' for c in design.cutoffs)}",
        design.describe_cutoffs(),
        f"completed={table.completed} failures={table.failures}",
        "criteria target the risk of the estimator fitted on n observations",
    ]


SIM_HEADER = ("model", "ECE", "UACV", "AIC_d", "AIC", "bias_UACV", "bias_AIC_d", "bias_AIC")


def cmd_simulate(cfg: RunConfig) -> int:
    design = load_design(cfg)
    try:
        table = run_replications(design, workers=cfg.threads)
        code = EXIT_OK
    except SimulationFailure as exc:
        log.error("%s", exc)
        table, code = exc.table, EXIT_CONVERGENCE
    write_report(cfg.output_path, simulation_rows(table), header=SIM_HEADER,
                 comments=simulation_metadata(design, table))
    return code


COMMANDS = {"fit": cmd_fit, "compare": cmd_compare, "loocv-check": cmd_loocv_check,
            "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--out", metavar="PATH", help="report path ('-' for stdout)")
    common.add_argument("--seed", type=int, metavar="N")
    common.add_argument("--alpha", type=float, metavar="F", help="tracking-interval level")
    common.add_argument("--model", action="append", metavar="NAME",
                        help=f"model name ({', '.join(MODEL_NAMES)}); repeat for compare")
    common.add_argument("--assessment", action="append", metavar="NAME",
                        help=f"assessment loss ({', '.join(ASSESSMENTS)}; coarsened:LEVEL)")
    common.add_argument("--penalty", metavar="ridge:LAMBDA")
    common.add_argument("--penalty-scale", choices=("map", "fixed"))
    common.add_argument("--levels", type=int, metavar="L", help="top ordinal level")
    common.add_argument("--reps", type=int, metavar="N")
    common.add_argument("--mc-size", type=int, metavar="N")
    common.add_argument("--threads", type=int, metavar="N")

    parser = argparse.ArgumentParser(prog="uacv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"uacv {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("fit", "fit one model and report its criteria"),
                        ("compare", "compare two models with a tracking interval"),
                        ("loocv-check", "exact leave-one-out CV against UACV")]:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("dataset", nargs="?", help="CSV with columns y, x1..xk")
        if name == "loocv-check":
            p.add_argument("--max-n", type=int, metavar="N", help=f"refit guard (default {LOOCV_MAX_N})")
    p = sub.add_parser("simulate", parents=[common], help="run the ordinal simulation study")
    p.add_argument("--design", metavar="PATH", help="design YAML, or 'small' / 'large'")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="uacv: %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[cfg.command](cfg)
    except ConvergenceError as exc:
        log.error("convergence failure: %s", exc)
        return EXIT_CONVERGENCE
    except SingularMatrixError as exc:
        log.error("%s; a penalized estimator may restore a usable criterion", exc)
        return EXIT_SINGULAR
    except (ConfigError, DatasetError, DesignError, DataModelMismatch, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
