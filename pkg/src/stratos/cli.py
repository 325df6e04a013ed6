"""``stratos`` command line: staged pipeline over a working directory.

Stages read and write files under ``--out`` (default ``stratos-out``):

    corpus/        simgen output (publications, authors)
    clean/         ingest output plus ``cleaning_report.json``
    panel.csv      author x period micro-panel
    classified.csv panel with top-class labels
    models/        coefficient tables, fit documents and fit state
    report/        table and figure data, ``manifest.json``

Every stage prints the working directory on stdout, and reads it from stdin
when ``--out`` is omitted and stdin is a pipe, so stages compose with ``|``.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import classify, diagnostics, ingest, panel, report, simgen
from .glm import (
    COEF_HEADER,
    ConvergenceError,
    DesignSpec,
    RankDeficiencyError,
    SeparationError,
    build_design,
    coefficient_table,
    fit_gee,
    fit_glmm,
    fit_logistic,
)
from .glm.logistic import bernoulli_loglik
from .panel import RESPONSES
from .vocab import VocabularyError

logger = logging.getLogger("stratos")

EXIT_OK, EXIT_INPUT, EXIT_CONVERGENCE, EXIT_DEGENERATE = 0, 2, 3, 4
DEFAULT_OUT = "stratos-out"
MODELS = ("glm", "glmm", "gee", "glmm-spline")
COEF_SCHEMA = "stratos.coefficients/1"
FIT_SCHEMA = "stratos.fit/1"


class StageDependencyError(RuntimeError):
    """A stage was run before the stage producing its input."""


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.exc = exc


# -- configuration ----------------------------------------------------------


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        return simgen.load_config_file(path)
    except (OSError, ValueError) as exc:
        raise StageDependencyError(f"cannot read config {path}: {exc}") from exc


def _workdir(args) -> Path:
    if args.out is not None:
        return Path(args.out)
    if not sys.stdin.isatty():
        piped = sys.stdin.read().strip().splitlines()
        if piped:
            return Path(piped[-1].strip())
    return Path(DEFAULT_OUT)


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise StageDependencyError(f"missing {path}; run `stratos {producer}` first")
    return path


def _json_dump(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- stages -----------------------------------------------------------------


def stage_simgen(args, cfg, work: Path):
    settings = dict(cfg.get("simgen", {}))
    if args.seed is not None:
        settings["seed"] = args.seed
    if getattr(args, "n_authors", None) is not None:
        settings["n_authors"] = args.n_authors
    if getattr(args, "prestige_gradient", None) is not None:
        settings["prestige_gradient"] = args.prestige_gradient
    sim = simgen.SimConfig.from_dict(settings)
    pubs, authors = simgen.generate(sim, threads=args.threads)
    corpus = work / "corpus"
    corpus.mkdir(parents=True, exist_ok=True)
    ingest.write_corpus(pubs, authors, corpus, args.format)
    _json_dump(sim.to_dict(), corpus / "simgen_config.json")
    logger.info("simgen: %d authors, %d publications -> %s", len(authors), len(pubs), corpus)


def _corpus_format(directory: Path, preferred: str) -> str:
    for fmt in (preferred, "csv", "jsonl"):
        pubs_name, auth_name = ingest.corpus_filenames(fmt)
        if (directory / pubs_name).exists() and (directory / auth_name).exists():
            return fmt
    raise StageDependencyError(f"no corpus files in {directory}; run `stratos simgen` or pass --in")


def _cleaning_config(cfg) -> ingest.CleaningConfig:
    return ingest.CleaningConfig(**cfg.get("cleaning", {}))


def stage_ingest(args, cfg, work: Path):
    src = Path(args.input) if getattr(args, "input", None) else work / "corpus"
    fmt = _corpus_format(_require(src, "simgen"), args.format)
    pubs_name, auth_name = ingest.corpus_filenames(fmt)
    pubs, authors = ingest.load_corpus(src / pubs_name, src / auth_name, fmt)
    (pubs, authors), rep = ingest.clean(pubs, authors, _cleaning_config(cfg))
    dest = work / "clean"
    dest.mkdir(parents=True, exist_ok=True)
    ingest.write_corpus(pubs, authors, dest, args.format)
    _json_dump(rep.to_dict(), dest / "cleaning_report.json")
    logger.info("ingest: kept %d authors, %d publications", rep.retained_authors, rep.retained_publications)


def stage_panel(args, cfg, work: Path):
    clean_dir = work / "clean"
    if not clean_dir.exists():
        # a raw corpus straight from simgen is cleaned on the way in
        stage_ingest(args, cfg, work)
    fmt = _corpus_format(clean_dir, args.format)
    pubs_name, auth_name = ingest.corpus_filenames(fmt)
    corpus = ingest.load_corpus(clean_dir / pubs_name, clean_dir / auth_name, fmt)
    rows = panel.build_panel(corpus, on_missing=cfg.get("panel", {}).get("on_missing", "raise"))
    panel.write_panel(rows, work / "panel.csv")
    logger.info("panel: %d rows", len(rows))


def stage_classify(args, cfg, work: Path):
    rows = panel.read_panel(_require(work / "panel.csv", "panel"))
    rows, degenerate = classify.classify_panel(rows)
    panel.write_panel(rows, work / "classified.csv")
    _json_dump({"degenerate_cells": [str(c) for c in degenerate]}, work / "classify_report.json")
    logger.info("classify: %d rows, %d degenerate cell(s)", len(rows), len(degenerate))


def _classified(work: Path):
    return panel.read_panel(_require(work / "classified.csv", "classify"))


def stage_compare(args, cfg, work: Path):
    rows = _classified(work)
    out = work / "report"
    out.mkdir(parents=True, exist_ok=True)
    for name in ("table3", "fig1", "fig2", "fig3"):
        cols, body = report.FIGURES[name](rows, args.response)
        report.write_table(out / f"{name}.csv", name, cols, body)


def _spec(model: str, response: str) -> DesignSpec:
    if model == "glmm-spline":
        return DesignSpec.spline(response)
    return DesignSpec.quadratic(response)


def _model_stem(model: str, response: str) -> str:
    return f"{model}_{response}"


def _method(args, cfg) -> str:
    agq = args.agq if args.agq is not None else cfg.get("fit", {}).get("agq")
    return f"agq({int(agq)})" if agq else cfg.get("fit", {}).get("method", "laplace")


def run_fit(model: str, design, method="laplace", working="independence"):
    if model == "glm":
        return fit_logistic(design.X, design.y, design.columns)
    if model in ("glmm", "glmm-spline"):
        return fit_glmm(design.X, design.y, design.clusters, method=method, columns=design.columns)
    if model == "gee":
        return fit_gee(design.X, design.y, design.clusters, working=working, columns=design.columns)
    raise ValueError(f"unknown model {model!r}")


def _fit_document(fit, model, response, method, working) -> dict:
    doc = {
        "schema": FIT_SCHEMA,
        "model": model,
        "response": response,
        "n_obs": int(fit.n_obs),
        "coefficients": coefficient_table(fit),
        "converged": bool(fit.converged),
    }
    if model in ("glmm", "glmm-spline"):
        doc.update(method=fit.method, sigma2_author=float(fit.sigma2), loglik=float(fit.loglik),
                   n_clusters=int(fit.n_clusters), boundary=bool(fit.boundary),
                   at_upper_bound=bool(fit.at_upper_bound), aic=float(fit.aic), bic=float(fit.bic))
    elif model == "gee":
        doc.update(working_correlation=fit.working_correlation, alpha=float(fit.alpha),
                   n_clusters=int(fit.n_clusters))
    else:
        doc.update(loglik=float(fit.loglik))
    return doc


def stage_fit(args, cfg, work: Path):
    rows = _classified(work)
    centered = panel.center_covariates(rows)
    design = build_design(centered, _spec(args.model, args.response))
    method = _method(args, cfg)
    fit = run_fit(args.model, design, method, args.working)
    out = work / "models"
    out.mkdir(parents=True, exist_ok=True)
    stem = _model_stem(args.model, args.response)
    table = coefficient_table(fit)
    report.write_table(out / f"{stem}.csv", "coefficients", COEF_HEADER, [[r[k] for k in COEF_HEADER] for r in table])
    _json_dump(_fit_document(fit, args.model, args.response, method, args.working), out / f"{stem}.json")
    loglik = getattr(fit, "loglik", None)
    if loglik is None:
        loglik = bernoulli_loglik(design.y, fit.eta)
    np.savez(
        out / f"{stem}_state.npz",
        y=design.y,
        fitted=fit.fitted,
        fixed_predictor=fit.fixed_predictor,
        linear_predictor=fit.linear_predictor,
        sigma2=float(getattr(fit, "sigma2", 0.0)),
        loglik=float(loglik),
        n_params=fit.n_params,
        n_variance_params=fit.n_variance_params,
        n_clusters=int(getattr(fit, "n_clusters", len(np.unique(design.clusters)))),
        columns=np.array(design.columns),
    )
    logger.info("fit: %s %s, %d terms", args.model, args.response, len(table))


def _load_state(path: Path):
    z = np.load(path)
    y = z["y"]
    return SimpleNamespace(
        y=y,
        fitted=z["fitted"],
        fixed_predictor=z["fixed_predictor"],
        linear_predictor=z["linear_predictor"],
        sigma2=float(z["sigma2"]),
        loglik=float(z["loglik"]),
        n_params=int(z["n_params"]),
        n_variance_params=int(z["n_variance_params"]),
        n_clusters=int(z["n_clusters"]),
        n_obs=int(y.size),
        columns=[str(c) for c in z["columns"]],
    )


def stage_diagnose(args, cfg, work: Path):
    stem = _model_stem(args.model, args.response)
    state = _load_state(_require(work / "models" / f"{stem}_state.npz", "fit"))
    design = build_design(panel.center_covariates(_classified(work)), _spec(args.model, args.response))
    rep = diagnostics.diagnose(state, design.X, design.term_columns, design.columns)
    out = work / "models"
    (out / f"{stem}_diagnostics.csv").write_text(diagnostics.to_csv(rep), encoding="utf-8")
    (out / f"{stem}_diagnostics.json").write_text(diagnostics.to_json(rep) + "\n", encoding="utf-8")


def stage_report(args, cfg, work: Path):
    rows = _classified(work)
    out = work / "report"
    report.write_bundle(rows, out, args.response)
    models = work / "models"
    extra = sorted(p for p in models.glob("*") if p.suffix in (".csv", ".json")) if models.exists() else []
    if extra:
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        manifest["models"] = {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in extra}
        _json_dump(manifest, out / "manifest.json")


STAGES = {
    "simgen": stage_simgen,
    "ingest": stage_ingest,
    "panel": stage_panel,
    "classify": stage_classify,
    "compare": stage_compare,
    "fit": stage_fit,
    "diagnose": stage_diagnose,
    "report": stage_report,
}


# -- argument parsing -------------------------------------------------------


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _common(suppress: bool) -> argparse.ArgumentParser:
    # flags accepted before and after the subcommand; the copy attached to
    # subcommands suppresses defaults so it cannot clobber earlier values
    common = argparse.ArgumentParser(add_help=False)

    def d(value):
        return argparse.SUPPRESS if suppress else value

    common.add_argument("--config", default=d(None), help="JSON or TOML settings file")
    common.add_argument("--seed", type=_u64, default=d(None), help="generator seed")
    common.add_argument("--threads", type=int, default=d(1), help="worker cap")
    common.add_argument("--format", choices=("csv", "jsonl"), default=d("csv"), help="corpus file format")
    common.add_argument("--out", default=d(None), help=f"working directory (default {DEFAULT_OUT}, or read from stdin)")
    common.add_argument("--response", choices=RESPONSES, default=d("top10"))
    common.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common(suppress=True)
    parser = argparse.ArgumentParser(prog="stratos", description=__doc__.splitlines()[0], parents=[_common(False)])
    sub = parser.add_subparsers(dest="stage", required=True)
    p = sub.add_parser("simgen", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--n-authors", type=int)
    p.add_argument("--prestige-gradient", type=float)
    p = sub.add_parser("ingest", parents=[common], help="load and clean a corpus")
    p.add_argument("--in", dest="input", help="directory holding publications/authors files")
    p = sub.add_parser("panel", parents=[common], help="build the author x period panel")
    p.add_argument("--in", dest="input", help="raw corpus directory (cleaned on the way in)")
    sub.add_parser("classify", parents=[common], help="label top classes within cells")
    sub.add_parser("compare", parents=[common], help="class comparison tables")
    for name, text in (("fit", "fit a logit model"), ("diagnose", "model diagnostics")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--model", choices=MODELS, default="glmm")
        p.add_argument("--working", choices=("independence", "exchangeable"), default="independence")
        p.add_argument("--agq", type=int, help="adaptive quadrature nodes (default: Laplace)")
    sub.add_parser("report", parents=[common], help="write the full figure/table bundle")
    return parser


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.exc
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(exc, (RankDeficiencyError, SeparationError, classify.DegenerateCellError,
                        panel.MissingDataError, panel.InconsistentDataError, diagnostics.CollinearityError)):
        return EXIT_DEGENERATE
    if isinstance(exc, (StageDependencyError, ingest.ParseError, ingest.DuplicateKeyError, VocabularyError,
                        simgen.SimConfigError, OSError, ValueError, KeyError, TypeError)):
        return EXIT_INPUT
    raise exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="stratos %(levelname)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        print("stratos: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    for attr, default in (("model", "glmm"), ("working", "independence"), ("agq", None), ("input", None)):
        if not hasattr(args, attr):
            setattr(args, attr, default)
    try:
        cfg = load_config(args.config)
        if args.seed is None and "seed" in cfg:
            args.seed = _u64(cfg["seed"])
        work = _workdir(args)
        work.mkdir(parents=True, exist_ok=True)
        try:
            STAGES[args.stage](args, cfg, work)
        except Exception as exc:  # add stage context, keep the original for exit codes
            raise StageError(args.stage, exc) from exc
    except Exception as exc:
        code = exit_code(exc)
        print(f"stratos: {exc}", file=sys.stderr)
        return code
    print(os.fspath(work))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
