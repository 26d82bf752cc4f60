"""Command-line entry point (``metabrank``).

Verbs
-----
synth       write a synthetic panel CSV (and its planted column indices)
features    write a feature matrix CSV for one feature set
correlate   count feature pairs whose |correlation| exceeds thresholds
train       fit one learner on one bipartite problem; writes a model JSON
evaluate    score a panel with a trained model; writes scores and ROC CSVs
grid        run the nested-CV experiment grid; writes the report files
importance  rank features by L1 Ranking Forest importance

Every verb accepts ``--seed``, ``--config`` (``key = value`` file),
``--out`` and ``--jobs``.  Errors print a one-line diagnostic and exit 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from ..core import auc_pairwise, roc_curve
from ..data import (
    CLASSES,
    HORMONES,
    SynthConfig,
    bin_labels,
    default_planted_features,
    impute_age,
    load_panel,
    synthesize_panel,
    write_panel,
)
from ..decomp import correlation_matrix, correlation_threshold_counts
from ..folds import CvPlan, derive_seed
from ..treerank import feature_importance
from .config import EXTRA_LEARNERS, FEATURE_SETS, LEARNERS, learner_grid, load_config
from .experiment import model_select, run_experiment
from .learners import fit_learner, model_from_dict, prepare
from .pipeline import FeaturePipeline, fit_pipeline, pipeline_dataset
from .reports import emit_reports

logger = logging.getLogger("metabrank")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="base RNG seed (overrides the config)")
    p.add_argument("--config", type=Path, default=None, help="key = value experiment config file")
    p.add_argument("--out", type=Path, default=Path("."), help="output file or directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")


def _problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--panel", type=Path, required=True, help="panel CSV")
    p.add_argument("--hormone", choices=HORMONES, required=True)
    p.add_argument("--class", dest="target_class", choices=CLASSES, required=True)
    p.add_argument("--feature-set", choices=FEATURE_SETS, default="raw")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metabrank", description="Bipartite ranking of spectra panels.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("synth", help="write a synthetic panel")
    _common(p)
    p.add_argument("--n", type=int, default=600)
    p.add_argument("--planted", type=int, default=20, help="number of informative columns")
    p.add_argument("--effect-size", type=float, default=2.0)
    p.add_argument("--signal-hormone", choices=HORMONES, default="cortisol")

    p = sub.add_parser("features", help="write a feature matrix")
    _common(p)
    p.add_argument("--panel", type=Path, required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--wavelet", choices=("haar", "db4", "db8"))
    group.add_argument("--pca", type=int, metavar="K", help="number of principal components")
    p.add_argument("--levels", type=int, default=10)

    p = sub.add_parser("correlate", help="correlation threshold counts")
    _common(p)
    p.add_argument("--panel", type=Path, required=True)
    p.add_argument("--feature-set", choices=FEATURE_SETS, default="raw")
    p.add_argument("--thresholds", type=float, nargs="+", default=[0.5, 0.6, 0.7, 0.8, 0.9])

    p = sub.add_parser("train", help="fit a learner on one problem")
    _common(p)
    _problem_args(p)
    p.add_argument("--learner", choices=LEARNERS + EXTRA_LEARNERS, required=True)
    p.add_argument("--select", action="store_true", help="choose hyperparameters by inner CV")

    p = sub.add_parser("evaluate", help="score a panel with a trained model")
    _common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--panel", type=Path, required=True)

    p = sub.add_parser("grid", help="run the experiment grid")
    _common(p)
    p.add_argument("--panel", type=Path, required=True)

    p = sub.add_parser("importance", help="L1 Ranking Forest feature importances")
    _common(p)
    _problem_args(p)
    p.add_argument("--top", type=int, default=0, help="only write the top K features")
    return parser


def _config(args: argparse.Namespace):
    return load_config(args.config, seed=args.seed)


def _out_file(out: Path, default_name: str) -> Path:
    if out.suffix:
        out.parent.mkdir(parents=True, exist_ok=True)
        return out
    out.mkdir(parents=True, exist_ok=True)
    return out / default_name


def cmd_synth(args: argparse.Namespace) -> None:
    cfg = _config(args)
    synth_cfg = SynthConfig(signal_hormone=args.signal_hormone)
    planted = default_planted_features(args.planted, cfg.seed, synth_cfg) if args.planted else []
    panel = synthesize_panel(args.n, cfg.seed, planted, args.effect_size, synth_cfg)
    path = _out_file(args.out, "panel.csv")
    write_panel(panel, path)
    planted_path = path.with_name(path.stem + "_planted.csv")
    with open(planted_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "column"])
        for i in planted:
            w.writerow([i, f"v{i + 1:04d}"])
    print(f"wrote {path} ({panel.n} subjects) and {planted_path}")


def _features(panel, feature_set: str, cfg, levels: int | None = None, k: int | None = None):
    panel = impute_age(panel)
    pipe = fit_pipeline(feature_set, panel.spectra, panel.age_years,
                        k or cfg.pca_components, levels or cfg.wavelet_levels)
    X = np.column_stack([pipe.block(panel.spectra), panel.age_years])
    return panel, X, pipe.names


def cmd_features(args: argparse.Namespace) -> None:
    cfg = _config(args)
    feature_set = args.wavelet or ("pca" if args.pca else "raw")
    panel, X, names = _features(load_panel(args.panel), feature_set, cfg, args.levels, args.pca)
    path = _out_file(args.out, f"features_{feature_set}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *names])
        for sid, row in zip(panel.subject_id, X):
            w.writerow([sid, *(repr(float(v)) for v in row)])
    print(f"wrote {path} ({X.shape[0]} x {X.shape[1]})")


def cmd_correlate(args: argparse.Namespace) -> None:
    cfg = _config(args)
    _, X, _ = _features(load_panel(args.panel), args.feature_set, cfg)
    counts = correlation_threshold_counts(correlation_matrix(X), args.thresholds)
    path = _out_file(args.out, f"correlation_{args.feature_set}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "pairs_above"])
        for t, c in zip(args.thresholds, counts):
            w.writerow([t, int(c)])
    print(f"wrote {path}")


def _problem(args: argparse.Namespace, cfg):
    panel = impute_age(load_panel(args.panel))
    ds = bin_labels(panel, args.hormone, args.target_class)
    spectra, age = ds.features[:, :-1], ds.features[:, -1]
    pipe = fit_pipeline(args.feature_set, spectra, age, cfg.pca_components, cfg.wavelet_levels)
    return pipe, pipeline_dataset(pipe, spectra, age, ds.labels)


def cmd_train(args: argparse.Namespace) -> None:
    cfg = _config(args)
    pipe, train = _problem(args, cfg)
    seed = derive_seed(cfg.seed, "train", args.learner)
    shared = prepare(args.learner, train, cfg, seed)
    grid = learner_grid(cfg, args.learner)
    if args.select:
        params, _ = model_select(train, args.learner, grid, CvPlan(cfg.outer_folds, cfg.inner_folds, seed),
                                 cfg, shared)
    else:
        params = grid[-1]
    model = fit_learner(args.learner, train, params, cfg, seed, shared)
    doc = {"learner": args.learner, "hormone": args.hormone, "class": args.target_class,
           "params": params, "pipeline": pipe.to_dict(), "model": model.to_dict()}
    path = _out_file(args.out, "model.json")
    path.write_text(json.dumps(doc) + "\n")
    print(f"wrote {path}: {model.describe()} training AUC {auc_pairwise(model.score(train.features), train.labels):.4f}")


def cmd_evaluate(args: argparse.Namespace) -> None:
    try:
        doc = json.loads(args.model.read_text())
        pipe = FeaturePipeline.from_dict(doc["pipeline"])
        model = model_from_dict(doc["model"])
    except (OSError, KeyError, ValueError) as exc:
        raise ValueError(f"cannot load model {args.model}: {exc}") from None
    panel = impute_age(load_panel(args.panel))
    ds = bin_labels(panel, doc["hormone"], doc["class"])
    X = pipe.transform(ds.features[:, :-1], ds.features[:, -1])
    scores = np.asarray(model.score(X))
    out = args.out if not args.out.suffix else args.out.parent
    out.mkdir(parents=True, exist_ok=True)
    ids = np.asarray(panel.subject_id, dtype=object)[~np.isnan(panel.concentrations[doc["hormone"]])]
    with open(out / "scores.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label", "score"])
        for sid, y, s in zip(ids, ds.labels, scores):
            w.writerow([sid, int(y), repr(float(s))])
    roc_curve(scores, ds.labels).to_csv(out / "roc.csv")
    print(f"AUC {auc_pairwise(scores, ds.labels):.4f} on {ds.n_examples} examples; wrote {out}/scores.csv, roc.csv")


def cmd_grid(args: argparse.Namespace) -> None:
    cfg = _config(args)
    report = run_experiment(load_panel(args.panel), cfg, n_jobs=args.jobs)
    paths = emit_reports(report, args.out)
    failed = [c.cell_id for c in report.cells if c.error]
    print(f"{len(report.cells)} cells, {len(failed)} failed; wrote {len(paths)} files to {args.out}")
    for cid in failed:
        print(f"  failed: {cid}", file=sys.stderr)


def cmd_importance(args: argparse.Namespace) -> None:
    cfg = _config(args)
    _, train = _problem(args, cfg)
    seed = derive_seed(cfg.seed, "importance")
    shared = prepare("L1-TRF", train, cfg, seed)
    forest = fit_learner("L1-TRF", train, learner_grid(cfg, "L1-TRF")[-1], cfg, seed, shared)
    ranked = feature_importance(forest, train.feature_names).ranked()
    if args.top:
        ranked = ranked[: args.top]
    path = _out_file(args.out, "importance.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "index", "feature", "weight"])
        for r, (i, name, wgt) in enumerate(ranked, 1):
            w.writerow([r, i, name, repr(wgt)])
    print(f"wrote {path}")


COMMANDS = {
    "synth": cmd_synth, "features": cmd_features, "correlate": cmd_correlate, "train": cmd_train,
    "evaluate": cmd_evaluate, "grid": cmd_grid, "importance": cmd_importance,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.verb](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"metabrank {args.verb}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
