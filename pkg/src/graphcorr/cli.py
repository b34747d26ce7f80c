"""Command line front end.

Subcommands:
  synth       generate a synthetic two-class dataset from a spec JSON
  train-eval  cross-validated training of one model/variant on a manifest
  ablate      run the variant grid (vanilla, full, and one-off ablations)
  explain     gradient saliency and the frame-level probe from a checkpoint

Exit codes: 0 success, 2 configuration or checkpoint-compatibility error,
3 data error, 4 numeric or internal contract failure.
"""

import argparse
import os
import sys
from dataclasses import replace

from .config import ExperimentConfig
from .errors import (ConfigurationError, ContractError, DataError,
                     DegenerateTestError, GraphCorrError)
from .explain import (bar_chart_svg, fit_logistic, group_saliency,
                      load_group_map, saliency, write_group_scores_csv,
                      write_logistic_csv, write_node_scores_csv,
                      write_window_scores_csv)
from .params import load_checkpoint, save_checkpoint
from .pipeline import GraphCorrSettings, build_model, prepare_subject
from .rng import substream
from .signals import load_dataset
from .synth import generate, load_spec
from .training import (run_cv, summarize, wilcoxon_signed_rank,
                       write_predictions_csv, write_results_csv,
                       write_summary_csv)

ABLATION_VARIANTS = ("vanilla", "full", "no_lag_filter", "no_node_embedder",
                     "no_windowing")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphcorr",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", required=True, help="synthetic spec JSON")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None, help="override spec seed")

    for name, text in (("train-eval", "train and evaluate one variant"),
                       ("ablate", "run the full variant grid")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", default=None, help="experiment config JSON")
        p.add_argument("--data", required=True, help="dataset manifest JSON")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")

    p = sub.add_parser("explain", help="saliency maps from a trained checkpoint")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--data", required=True, help="dataset manifest JSON")
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--subjects", default=None,
                   help="comma-separated subject ids (default: all)")
    return parser


def _load_config(args) -> ExperimentConfig:
    cfg = (ExperimentConfig.from_file(args.config) if args.config
           else ExperimentConfig.from_dict({}))
    if args.seed is not None:
        cfg.values["seed"] = args.seed
    return cfg


def cmd_synth(args) -> int:
    spec = load_spec(args.config)
    if args.seed is not None:
        spec.seed = args.seed
    manifest = generate(spec, args.out)
    print(f"wrote {2 * spec.subjects_per_class} subjects to {manifest}")
    return 0


def cmd_train_eval(args) -> int:
    cfg = _load_config(args)
    os.makedirs(args.out, exist_ok=True)
    cfg.write_resolved(os.path.join(args.out, "config_resolved.json"))
    subjects = load_dataset(args.data)
    results = run_cv(subjects, cfg.classifier_config(), cfg.settings(),
                     cfg.cv_plan(), cfg.optimizer(), cfg.seed)
    model = cfg.values["model"]
    rows = [(model, cfg.variant, r.fold, r.accuracy, r.roc_auc) for r in results]
    write_results_csv(os.path.join(args.out, "results.csv"), rows)
    for r in results:
        write_predictions_csv(
            os.path.join(args.out, f"predictions_fold{r.fold}.csv"), r.predictions)
        save_checkpoint(r.state, os.path.join(args.out, f"checkpoint_fold{r.fold}.txt"))
    stats = summarize(results)
    write_summary_csv(os.path.join(args.out, "summary.csv"),
                      [(model, cfg.variant, stats, None, None)])
    for r in results:
        print(f"fold {r.fold}: accuracy {r.accuracy:.2f}  roc_auc {r.roc_auc:.2f}"
              f"  best_epoch {r.best_epoch}")
    print(f"mean accuracy {stats['accuracy_mean']:.2f}"
          f" +/- {stats['accuracy_std']:.2f}")
    return 0


def _variant_settings(cfg: ExperimentConfig, variant: str):
    if variant == "vanilla":
        return None
    v = cfg.values
    full = GraphCorrSettings(
        window_size=v["window_size"], stride=v["stride"], max_lag=v["max_lag"],
        filter_count=v["filter_count"], embed_dim=v["embed_dim"],
        head_count=v["head_count"], edge_percent=v["edge_percent"],
        edge_rank=v["edge_rank"], residual=v["residual"]).validate()
    if variant == "full":
        return full
    if variant == "no_lag_filter":
        return replace(full, lag_filter="zero_lag_only", filter_count=1).validate()
    if variant == "no_node_embedder":
        return replace(full, node_embedder=False).validate()
    if variant == "no_windowing":
        return replace(full, windowing=False).validate()
    raise ConfigurationError(f"unknown ablation variant {variant!r}")


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    os.makedirs(args.out, exist_ok=True)
    cfg.write_resolved(os.path.join(args.out, "config_resolved.json"))
    subjects = load_dataset(args.data)
    clf_cfg = cfg.classifier_config()
    plan, opt, seed = cfg.cv_plan(), cfg.optimizer(), cfg.seed
    model = cfg.values["model"]

    # full / no_lag_filter / no_node_embedder only change the model, not the
    # extracted features, so those three share one feature cache.
    shared = [prepare_subject(ts, _variant_settings(cfg, "full")) for ts in subjects]
    by_variant = {}
    rows = []
    for variant in ABLATION_VARIANTS:
        settings = _variant_settings(cfg, variant)
        features = (shared if variant in ("full", "no_lag_filter",
                                          "no_node_embedder") else None)
        results = run_cv(subjects, clf_cfg, settings, plan, opt, seed,
                         features=features)
        by_variant[variant] = results
        rows.extend((model, variant, r.fold, r.accuracy, r.roc_auc)
                    for r in results)
        stats = summarize(results)
        print(f"{variant}: mean accuracy {stats['accuracy_mean']:.2f}"
              f" +/- {stats['accuracy_std']:.2f}")
    write_results_csv(os.path.join(args.out, "ablation.csv"), rows)

    full_acc = [r.accuracy for r in by_variant["full"]]
    entries = []
    for variant in ABLATION_VARIANTS:
        stats = summarize(by_variant[variant])
        if variant == "full":
            entries.append((model, variant, stats, None, None))
            continue
        acc = [r.accuracy for r in by_variant[variant]]
        try:
            p_two = wilcoxon_signed_rank(full_acc, acc, "two-sided")
            p_gt = wilcoxon_signed_rank(full_acc, acc, "greater")
        except DegenerateTestError:
            p_two = p_gt = 1.0      # every fold tied: no evidence either way
        except ContractError:
            p_two = p_gt = None     # too few folds for the exact test
        entries.append((model, variant, stats, p_two, p_gt))
    write_summary_csv(os.path.join(args.out, "ablation_summary.csv"), entries)
    return 0


def cmd_explain(args) -> int:
    cfg = _load_config(args)
    os.makedirs(args.out, exist_ok=True)
    subjects = load_dataset(args.data)
    if args.subjects is not None:
        wanted = [s for s in args.subjects.split(",") if s]
        known = {ts.subject_id for ts in subjects}
        missing = sorted(set(wanted) - known)
        if missing:
            raise DataError(f"unknown subject ids: {', '.join(missing)}")
        subjects = [ts for ts in subjects if ts.subject_id in set(wanted)]
    settings = cfg.settings()
    feats = [prepare_subject(ts, settings) for ts in subjects]
    model = build_model(settings, cfg.classifier_config(), feats[0].node_count,
                        substream(cfg.seed, "init", 0))
    model.store.load_values(load_checkpoint(args.checkpoint))

    groups = (load_group_map(cfg.group_map, feats[0].node_count)
              if cfg.group_map else None)
    reports = []
    for feat in feats:
        rep = saliency(model, feat)
        reports.append(rep)
        sid = feat.subject_id
        write_node_scores_csv(os.path.join(args.out, f"node_scores_{sid}.csv"),
                              rep.node_scores)
        bar_chart_svg(rep.node_scores,
                      os.path.join(args.out, f"node_saliency_{sid}.svg"),
                      title=f"node saliency {sid} (predicted {rep.predicted_class})")
        if rep.variant == "augmented":
            write_window_scores_csv(
                os.path.join(args.out, f"window_scores_{sid}.csv"),
                rep.window_scores, rep.top_window)
        if groups is not None:
            write_group_scores_csv(
                os.path.join(args.out, f"group_scores_{sid}.csv"),
                group_saliency(rep.node_scores, groups))
        print(f"{sid}: predicted class {rep.predicted_class}, top node "
              f"{int(rep.node_scores.argmax())}")
    if model.variant == "augmented" and len({f.label for f in feats}) == 2:
        fit = fit_logistic(feats, [rep.top_window for rep in reports])
        write_logistic_csv(os.path.join(args.out, "logistic.csv"), fit)
        print(f"logistic probe fitted on {fit.sample_count} frame samples")
    return 0


_COMMANDS = {"synth": cmd_synth, "train-eval": cmd_train_eval,
             "ablate": cmd_ablate, "explain": cmd_explain}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigurationError as exc:        # includes CompatibilityError
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except GraphCorrError as exc:            # numeric, shape, contract
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
