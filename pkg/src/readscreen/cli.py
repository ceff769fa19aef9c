"""Command-line front end: ``readscreen {synth,validate,features,select,evaluate,noise}``.

Every subcommand resolves a :class:`RunConfig` from (lowest to highest
precedence) defaults, ``--config FILE``, the ``READSCREEN_OUTDIR`` environment
variable (outdir only) and command-line flags, writes its artifacts under
``<outdir>/<subcommand>/`` and echoes the resolved config there as
``config.txt``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .features import (FEATURE_NAMES, MovementThresholds, ecdf, extract_cohort_features,
                       write_ecdf, write_feature_matrix)
from .ingest import (CohortError, ReaderParams, SynthSpec, generate_synthetic_cohort, parse_cohort,
                     read_keyvalue, validate_cohort, write_cohort, write_keyvalue, write_synth_spec)
from .selection import cv_lasso, fit_standardizer, write_cv_report

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_CONFIG = 4
EXIT_DATA = 5

OUTDIR_ENV = "READSCREEN_OUTDIR"
SUBCOMMANDS = ("synth", "validate", "features", "select", "evaluate", "noise")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


_SYNTH_DEFAULT = SynthSpec()


@dataclass(frozen=True)
class RunConfig:
    sessions: str = ""
    layout: str = ""
    outdir: str = "out"
    threads: int = 1
    # pipeline
    battery: bool = True
    classifier: str = "svm"
    selection: str = "one_se"
    k: int = 2
    c_param: float = 1.0
    fold_seed: int = 0
    kmeans_seed: int = 0
    nested: bool = False
    # movement thresholds; change_line_dy_min <= 0 means half the line height
    short_max: float = 100.0
    long_min: float = 400.0
    change_line_dx_min: float = 400.0
    change_line_dy_min: float = 0.0
    # noise
    sigma_grid: str = "10,20,30,40,50,60,70,80,90,100"
    replicates: int = 10
    noise_seed: int = 0
    mode: str = "train_on_noisy"
    complete_cases: bool = True
    # synthetic cohort
    n_control: int = _SYNTH_DEFAULT.n_control
    n_dyslexic: int = _SYNTH_DEFAULT.n_dyslexic
    seed: int = _SYNTH_DEFAULT.seed
    subject_spread: float = _SYNTH_DEFAULT.subject_spread
    severity_min: float = _SYNTH_DEFAULT.severity_min
    roi_dropout: float = _SYNTH_DEFAULT.roi_dropout
    n_words: int = _SYNTH_DEFAULT.n_words
    line_length: float = _SYNTH_DEFAULT.line_length
    line_height: float = _SYNTH_DEFAULT.line_height
    char_width: float = _SYNTH_DEFAULT.char_width
    screen_width: float = _SYNTH_DEFAULT.screen_width
    screen_height: float = _SYNTH_DEFAULT.screen_height
    text_id: str = _SYNTH_DEFAULT.text_id

    # per-class reader parameters are stored as control_<field> / dyslexic_<field>
    control_fixation_duration_mean: float = _SYNTH_DEFAULT.control.fixation_duration_mean
    control_fixation_duration_sd: float = _SYNTH_DEFAULT.control.fixation_duration_sd
    control_saccade_length_mean: float = _SYNTH_DEFAULT.control.saccade_length_mean
    control_saccade_length_sd: float = _SYNTH_DEFAULT.control.saccade_length_sd
    control_regression_prob: float = _SYNTH_DEFAULT.control.regression_prob
    control_skip_prob: float = _SYNTH_DEFAULT.control.skip_prob
    control_refixation_prob: float = _SYNTH_DEFAULT.control.refixation_prob
    control_regression_span: float = _SYNTH_DEFAULT.control.regression_span
    control_correction_prob: float = _SYNTH_DEFAULT.control.correction_prob
    dyslexic_fixation_duration_mean: float = _SYNTH_DEFAULT.dyslexic.fixation_duration_mean
    dyslexic_fixation_duration_sd: float = _SYNTH_DEFAULT.dyslexic.fixation_duration_sd
    dyslexic_saccade_length_mean: float = _SYNTH_DEFAULT.dyslexic.saccade_length_mean
    dyslexic_saccade_length_sd: float = _SYNTH_DEFAULT.dyslexic.saccade_length_sd
    dyslexic_regression_prob: float = _SYNTH_DEFAULT.dyslexic.regression_prob
    dyslexic_skip_prob: float = _SYNTH_DEFAULT.dyslexic.skip_prob
    dyslexic_refixation_prob: float = _SYNTH_DEFAULT.dyslexic.refixation_prob
    dyslexic_regression_span: float = _SYNTH_DEFAULT.dyslexic.regression_span
    dyslexic_correction_prob: float = _SYNTH_DEFAULT.dyslexic.correction_prob

    # -- conversions -------------------------------------------------------

    def to_flat(self) -> dict[str, object]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_flat(cls, d: dict[str, str], base: "RunConfig | None" = None) -> "RunConfig":
        base = base or cls()
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in d.items():
            key = key.replace("-", "_")
            if key not in types:
                raise CliError(f"unknown config key {key!r}", EXIT_USAGE)
            kw[key] = _convert(key, types[key], raw)
        return replace(base, **kw)

    def save(self, path) -> None:
        write_keyvalue({k: _render(v) for k, v in self.to_flat().items()}, path)

    # -- derived objects ---------------------------------------------------

    def synth_spec(self) -> SynthSpec:
        def reader(prefix):
            return ReaderParams(**{f.name: getattr(self, f"{prefix}_{f.name}") for f in fields(ReaderParams)})

        try:
            return SynthSpec(
                n_control=self.n_control, n_dyslexic=self.n_dyslexic, seed=self.seed,
                control=reader("control"), dyslexic=reader("dyslexic"),
                subject_spread=self.subject_spread, severity_min=self.severity_min, roi_dropout=self.roi_dropout, n_words=self.n_words,
                line_length=self.line_length, line_height=self.line_height, char_width=self.char_width,
                screen_width=self.screen_width, screen_height=self.screen_height, text_id=self.text_id,
            )
        except CohortError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from exc

    def pipeline_specs(self) -> list[ev.PipelineSpec]:
        try:
            if self.battery:
                return ev.default_battery(self.c_param, self.fold_seed, self.kmeans_seed, self.nested)
            return [ev.PipelineSpec(self.classifier, self.selection, self.k, self.c_param,
                                    self.fold_seed, self.kmeans_seed, self.nested)]
        except ev.EvaluationError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from exc

    def single_pipeline(self) -> ev.PipelineSpec:
        try:
            return ev.PipelineSpec(self.classifier, self.selection, self.k, self.c_param,
                                   self.fold_seed, self.kmeans_seed, self.nested)
        except ev.EvaluationError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from exc

    def noise_spec(self) -> ev.NoiseSpec:
        try:
            sigmas = tuple(float(s) for s in self.sigma_grid.split(",") if s.strip())
            return ev.NoiseSpec(sigmas, self.replicates, self.noise_seed, self.mode, self.complete_cases)
        except (ValueError, ev.EvaluationError) as exc:
            raise CliError(f"invalid noise settings: {exc}", EXIT_CONFIG) from exc

    def thresholds(self, layout) -> MovementThresholds:
        try:
            dy = self.change_line_dy_min if self.change_line_dy_min > 0 else 0.5 * layout.line_height
            return MovementThresholds(self.short_max, self.long_min, self.change_line_dx_min, dy)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from exc


def _convert(key, typ, raw):
    if not isinstance(raw, str):
        return raw
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
    except ValueError:
        raise CliError(f"config key {key!r}: cannot parse {raw!r} as {typ}", EXIT_CONFIG) from None
    if key in ("mode", "classifier", "selection"):
        return raw.strip().replace("-", "_")
    return raw


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---------------------------------------------------------------------------
# subcommands


def _load_cohorts(cfg: RunConfig):
    sessions = [s.strip() for s in cfg.sessions.split(",") if s.strip()]
    layouts = [s.strip() for s in cfg.layout.split(",") if s.strip()]
    if not sessions or not layouts:
        raise CliError("sessions and layout paths are required", EXIT_USAGE)
    if len(sessions) != len(layouts):
        raise CliError("sessions and layout lists must have the same length", EXIT_CONFIG)
    for p in sessions + layouts:
        if not Path(p).is_file():
            raise CliError(f"missing input file: {p}", EXIT_MISSING_INPUT)
    try:
        return [parse_cohort(s, lay) for s, lay in zip(sessions, layouts)]
    except CohortError as exc:
        raise CliError(str(exc), EXIT_DATA) from exc


def cmd_synth(cfg: RunConfig, out: Path) -> dict:
    spec = cfg.synth_spec()
    try:
        cohort = generate_synthetic_cohort(spec)
    except CohortError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    write_cohort(cohort, out / "sessions.csv", out / "layout.json")
    write_synth_spec(spec, out / "synth_spec.txt")
    return {"sessions": str(out / "sessions.csv"), "layout": str(out / "layout.json"),
            "label_counts": cohort.label_counts()}


def cmd_validate(cfg: RunConfig, out: Path) -> dict:
    reports = {}
    for cohort in _load_cohorts(cfg):
        rep = validate_cohort(cohort)
        reports[cohort.text_id] = rep.to_dict()
    (out / "validation.json").write_text(json.dumps(reports, indent=1) + "\n", encoding="utf-8")
    return {t: {"issues": len(r["issues"]), "summary": r["summary"]} for t, r in reports.items()}


def cmd_features(cfg: RunConfig, out: Path) -> dict:
    result = {}
    for cohort in _load_cohorts(cfg):
        fm = extract_cohort_features(cohort, cfg.thresholds(cohort.layout))
        path = out / f"features_{cohort.text_id}.csv"
        write_feature_matrix(fm, path)
        edir = out / f"ecdf_{cohort.text_id}"
        edir.mkdir(exist_ok=True)
        labels = sorted(set(fm.labels))
        for j, name in enumerate(FEATURE_NAMES):
            for lab in labels:
                vals = fm.X[np.array(fm.labels) == lab, j]
                vals = vals[~np.isnan(vals)]
                if vals.size:
                    write_ecdf(ecdf(vals), edir / f"{name}__{lab}.csv")
        result[cohort.text_id] = {"features": str(path), "n_subjects": len(fm)}
    return result


def cmd_select(cfg: RunConfig, out: Path) -> dict:
    result = {}
    for cohort in _load_cohorts(cfg):
        fm = extract_cohort_features(cohort, cfg.thresholds(cohort.layout))
        try:
            filled, _, _ = ev.impute_median(fm.X)
            Z = fit_standardizer(filled).transform(filled)
            res = cv_lasso(Z, fm.y, n_folds=5, fold_seed=cfg.fold_seed)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_DATA) from exc
        path = out / f"cv_report_{cohort.text_id}.json"
        write_cv_report(res, path, fm.names)
        result[cohort.text_id] = {
            "lambda_min_mse": res.lambda_min_mse, "lambda_1se": res.lambda_1se,
            "selected_features_min": [fm.names[i] for i in res.selected_features_min],
            "selected_features_1se": [fm.names[i] for i in res.selected_features_1se],
        }
    return result


def cmd_evaluate(cfg: RunConfig, out: Path) -> dict:
    cohorts = _load_cohorts(cfg)
    pipelines = cfg.pipeline_specs()
    try:
        thresholds = cfg.thresholds(cohorts[0].layout) if len(cohorts) == 1 else None
        report = ev.run_battery(cohorts, pipelines, thresholds, threads=cfg.threads)
    except ev.EvaluationError as exc:
        raise CliError(str(exc), EXIT_DATA) from exc
    ev.emit_report(report, out / "table.csv", "table_csv")
    ev.emit_report(report, out / "report.json", "json")
    return {"table": str(out / "table.csv"), "report": str(out / "report.json")}


def cmd_noise(cfg: RunConfig, out: Path) -> dict:
    cohorts = _load_cohorts(cfg)
    if len(cohorts) != 1:
        raise CliError("noise runs take exactly one cohort", EXIT_CONFIG)
    cohort = cohorts[0]
    spec = cfg.single_pipeline()
    noise = cfg.noise_spec()
    try:
        nr = ev.noise_sweep(cohort, spec, noise, cfg.thresholds(cohort.layout), threads=cfg.threads)
    except ev.EvaluationError as exc:
        raise CliError(str(exc), EXIT_DATA) from exc
    ev.write_noise_csv([nr], out / "noise.csv")
    (out / "noise.json").write_text(json.dumps(nr.to_dict(), indent=1) + "\n", encoding="utf-8")
    return {"noise": str(out / "noise.csv"), "clean_accuracy": nr.clean_accuracy,
            "n_datasets": nr.n_datasets}


COMMANDS = {
    "synth": cmd_synth,
    "validate": cmd_validate,
    "features": cmd_features,
    "select": cmd_select,
    "evaluate": cmd_evaluate,
    "noise": cmd_noise,
}


# ---------------------------------------------------------------------------
# argument handling


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message, EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="readscreen", description="Reading-fixation screening pipeline.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        for f in fields(RunConfig):
            p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None, metavar="VALUE")
    return parser


def resolve_config(args: argparse.Namespace, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    cfg = RunConfig()
    if args.config:
        if not Path(args.config).is_file():
            raise CliError(f"missing input file: {args.config}", EXIT_MISSING_INPUT)
        try:
            cfg = RunConfig.from_flat(read_keyvalue(args.config), cfg)
        except CohortError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from exc
    if environ.get(OUTDIR_ENV):
        cfg = replace(cfg, outdir=environ[OUTDIR_ENV])
    flags = {f.name: getattr(args, f.name) for f in fields(RunConfig) if getattr(args, f.name) is not None}
    cfg = RunConfig.from_flat(flags, cfg)
    if cfg.threads < 1:
        raise CliError("threads must be >= 1", EXIT_CONFIG)
    return cfg


def run_command(argv=None, environ=None) -> int:
    """Run one subcommand; returns the process exit status."""
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise CliError(f"a subcommand is required: one of {', '.join(SUBCOMMANDS)}", EXIT_USAGE)
        cfg = resolve_config(args, environ)
        out = Path(cfg.outdir) / args.command
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](cfg, out)
        cfg.save(out / "config.txt")
        print(json.dumps({"command": args.command, "config": {k: _render(v) for k, v in cfg.to_flat().items()},
                          "result": result}, indent=1))
        return EXIT_OK
    except CliError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": exc.code}), file=sys.stderr)
        return exc.code
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": EXIT_INTERNAL}),
              file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
