"""Command-line pipeline driver.

Subcommands: ``synth`` (simulated panels), ``split`` (stratified folds),
``calibrate`` (validation threshold sweeps), ``evaluate`` (per-fold
benchmark report), ``predict`` (cross-fold voted labels for an external
panel). Exit codes: 0 success, 1 data/coverage error, 2 usage error.
Every run persists its resolved configuration as ``run_config.json`` next
to its outputs; reruns with identical inputs are byte-identical and
independent of ``--threads``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import io as pio
from .calibration import Objective
from .cascade import calibrations_by_fold, predict_external
from .errors import ConfigError, DataError, PapCascadeError
from .evaluation import calibrate_all, evaluate_panel, write_report_csv, write_report_json
from .labels import RawLabel, Stage1Label, Stage2Label, map_stage2_target
from .splitting import SUBSETS, class_weights, stratified_kfold_split
from .synthetic import DEFAULT_PRIORS, SyntheticConfig, generate
from .tables import Stage

log = logging.getLogger("papcascade")

STAGE1_OBJECTIVES = {
    "f1-rubbish": Objective.F1_POSITIVE,
    "f1-suitable": Objective.F1_NEGATIVE,
    "macro-f1": Objective.MACRO_F1,
}


def _setup_logging() -> None:
    level = os.environ.get("CASCADE_LOG", "WARNING").upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _parse_floats(text: str, *, name: str, count: int | None = None) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r} as comma-separated floats") from None
    if count is not None and len(values) != count:
        raise ConfigError(f"{name}: expected {count} values, got {len(values)}")
    return values


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: bad JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path}: expected a JSON object")
    return payload


def _resolve(defaults: dict, file_values: dict, cli_values: dict) -> dict:
    """CLI flag > config file > built-in default."""
    unknown = set(file_values) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    resolved = dict(defaults)
    resolved.update(file_values)
    resolved.update({k: v for k, v in cli_values.items() if v is not None})
    return resolved


def _write_run_config(out_dir: Path, command: str, resolved: dict) -> None:
    # Execution-only knobs (threads) are excluded: they cannot affect outputs.
    payload = {"command": command, "parameters": resolved}
    (out_dir / "run_config.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- synth ---------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    defaults = {
        "n_images": 1000,
        "class_priors": list(DEFAULT_PRIORS),
        "n_models": 3,
        "n_folds": 5,
        "model_skill": 0.6,
        "inter_model_correlation": 0.0,
        "seed": 0,
    }
    cli_values = {
        "n_images": args.n_images,
        "class_priors": list(_parse_floats(args.priors, name="priors", count=4))
        if args.priors
        else None,
        "n_models": args.n_models,
        "n_folds": args.folds,
        "model_skill": list(_parse_floats(args.skill, name="skill"))
        if args.skill
        else None,
        "inter_model_correlation": args.correlation,
        "seed": args.seed,
    }
    resolved = _resolve(defaults, _load_config_file(args.config), cli_values)

    skill = resolved["model_skill"]
    if isinstance(skill, (list, tuple)) and len(skill) == 1:
        skill = skill[0]  # one value broadcasts over all models
    config = SyntheticConfig(
        n_images=int(resolved["n_images"]),
        class_priors=tuple(resolved["class_priors"]),
        n_models=int(resolved["n_models"]),
        n_folds=int(resolved["n_folds"]),
        model_skill=tuple(skill) if isinstance(skill, (list, tuple)) else float(skill),
        inter_model_correlation=float(resolved["inter_model_correlation"]),
        seed=int(resolved["seed"]),
    )
    config.validate()

    labels, table = generate(config)
    out = _out_dir(args.out)
    pio.write_labels(labels, out / "labels.csv")
    pio.write_predictions(table, out / "predictions.csv")
    skills = config.skills()
    resolved["model_skill"] = list(skills)
    _write_run_config(out, "synth", resolved)
    log.info("wrote %d labels and %d prediction rows to %s", len(labels), len(table), out)
    print(f"synth: {len(labels)} images, {len(table)} prediction rows -> {out}")
    return 0


# -- split ---------------------------------------------------------------------


def _fold_summary(labels, assignment) -> list[str]:
    lines = [f"fold {assignment.fold_id}:"]
    for subset in SUBSETS:
        ids = assignment.subset(subset)
        counts = {label: 0 for label in RawLabel}
        for image_id in ids:
            counts[labels[image_id]] += 1
        cells = ", ".join(f"{label.value}={counts[label]}" for label in RawLabel)
        lines.append(f"  {subset.value:5s} n={len(ids):6d}  {cells}")
    return lines


def _train_weights(labels, assignment) -> dict:
    stage1_counts: dict[str, int] = {"rubbish": 0, "suitable": 0}
    stage2_counts: dict[str, int] = {"healthy": 0, "unhealthy": 0}
    for image_id in assignment.train:
        raw = labels[image_id]
        if raw is RawLabel.RUBBISH:
            stage1_counts["rubbish"] += 1
            continue
        stage1_counts["suitable"] += 1
        target = map_stage2_target(raw)
        if target.healthy:
            stage2_counts["healthy"] += 1
        if target.unhealthy:
            stage2_counts["unhealthy"] += 1
    out = {}
    for stage_name, counts in (("stage1", stage1_counts), ("stage2", stage2_counts)):
        present = {k: v for k, v in counts.items() if v > 0}
        out[stage_name] = dict(sorted(class_weights(present).weights.items()))
    return out


def cmd_split(args: argparse.Namespace) -> int:
    defaults = {"folds": 5, "ratios": [0.8, 0.1, 0.1], "seed": 0, "labels": None}
    cli_values = {
        "folds": args.folds,
        "ratios": list(_parse_floats(args.ratios, name="ratios", count=3))
        if args.ratios
        else None,
        "seed": args.seed,
        "labels": args.labels,
    }
    resolved = _resolve(defaults, _load_config_file(args.config), cli_values)
    if resolved["labels"] is None:
        raise ConfigError("--labels is required")

    labels = pio.read_labels(resolved["labels"])
    assignments = stratified_kfold_split(
        labels,
        int(resolved["folds"]),
        tuple(resolved["ratios"]),
        seed=int(resolved["seed"]),
    )
    out = _out_dir(args.out)
    pio.write_splits(assignments, out / "splits.csv")
    weights = {
        str(a.fold_id): _train_weights(labels, a) for a in assignments
    }
    (out / "class_weights.json").write_text(
        json.dumps(weights, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_run_config(out, "split", resolved)
    for assignment in assignments:
        for line in _fold_summary(labels, assignment):
            print(line)
    return 0


# -- calibrate -------------------------------------------------------------------


def _read_inputs(args, *, need_labels=True, need_splits=True):
    table = pio.read_predictions(args.predictions, values=args.prediction_values)
    labels = pio.read_labels(args.labels) if need_labels else None
    assignments = pio.read_splits(args.splits) if need_splits else None
    return table, labels, assignments


def cmd_calibrate(args: argparse.Namespace) -> int:
    table, labels, assignments = _read_inputs(args)
    objectives = {
        Stage.STAGE1: STAGE1_OBJECTIVES[args.stage1_objective],
        Stage.STAGE2: Objective.MACRO_F1,
    }
    calibrations = calibrate_all(table, labels, assignments, objectives)
    out = _out_dir(args.out)
    pio.write_thresholds(calibrations, out / "thresholds.json")
    _write_run_config(
        out,
        "calibrate",
        {
            "predictions": args.predictions,
            "labels": args.labels,
            "splits": args.splits,
            "prediction_values": args.prediction_values,
            "stage1_objective": args.stage1_objective,
            "stage2_objective": "macro-f1",
        },
    )
    for cal in calibrations:
        print(
            f"fold {cal.fold_id} {cal.stage.value}: threshold={cal.threshold:.6f} "
            f"{cal.objective.value}={cal.achieved_score:.2f}"
        )
    return 0


# -- evaluate --------------------------------------------------------------------


def cmd_evaluate(args: argparse.Namespace) -> int:
    table, labels, assignments = _read_inputs(args)
    calibrations = pio.read_thresholds(args.thresholds)
    report = evaluate_panel(
        table,
        labels,
        assignments,
        calibrations,
        threads=max(1, args.threads),
    )
    out = _out_dir(args.out)
    write_report_json(report, out / "report.json")
    write_report_csv(report, out / "report.csv")
    _write_run_config(
        out,
        "evaluate",
        {
            "predictions": args.predictions,
            "labels": args.labels,
            "splits": args.splits,
            "thresholds": args.thresholds,
            "prediction_values": args.prediction_values,
        },
    )
    for name, method in report.methods.items():
        agg = method.aggregate
        print(
            f"{name}: macro_f1={agg['macro_f1'].format()} "
            f"auroc={agg['auroc'].format()} accuracy={agg['accuracy'].format()}"
        )
    return 0


# -- predict ---------------------------------------------------------------------


def cmd_predict(args: argparse.Namespace) -> int:
    table = pio.read_predictions(args.predictions, values=args.prediction_values)
    calibrations = calibrations_by_fold(pio.read_thresholds(args.thresholds))
    outputs = predict_external(
        table,
        calibrations,
        stage1_tie=Stage1Label(args.stage1_tie),
        stage2_tie=Stage2Label(args.stage2_tie),
    )
    out = _out_dir(args.out)
    pio.write_final_predictions(outputs, out / "predictions_final.csv")
    _write_run_config(
        out,
        "predict",
        {
            "predictions": args.predictions,
            "thresholds": args.thresholds,
            "prediction_values": args.prediction_values,
            "stage1_tie": args.stage1_tie,
            "stage2_tie": args.stage2_tie,
        },
    )
    tally: dict[str, int] = {}
    for o in outputs:
        tally[o.final.value] = tally.get(o.final.value, 0) + 1
    print(
        f"predict: {len(outputs)} images -> "
        + ", ".join(f"{k}={v}" for k, v in sorted(tally.items()))
    )
    return 0


# -- argument wiring ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="papcascade",
        description="Two-stage cascaded ensemble pipeline over probability tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic label/prediction panel")
    synth.add_argument("--config", help="JSON config file")
    synth.add_argument("--n-images", type=int)
    synth.add_argument("--n-models", type=int)
    synth.add_argument("--folds", type=int)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--skill", help="comma-separated per-model skill, or one value")
    synth.add_argument("--correlation", type=float)
    synth.add_argument("--priors", help="rubbish,healthy,unhealthy,both priors")
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=cmd_synth)

    split = sub.add_parser("split", help="build stratified train/val/test folds")
    split.add_argument("--config", help="JSON config file")
    split.add_argument("--labels")
    split.add_argument("--folds", type=int)
    split.add_argument("--ratios", help="train,val,test ratios (default 0.8,0.1,0.1)")
    split.add_argument("--seed", type=int)
    split.add_argument("--out", required=True)
    split.set_defaults(func=cmd_split)

    cal = sub.add_parser("calibrate", help="sweep validation thresholds per fold/stage")
    cal.add_argument("--predictions", required=True)
    cal.add_argument("--labels", required=True)
    cal.add_argument("--splits", required=True)
    cal.add_argument(
        "--stage1-objective",
        choices=sorted(STAGE1_OBJECTIVES),
        default="f1-rubbish",
    )
    cal.add_argument(
        "--prediction-values", choices=["probability", "logit"], default="probability"
    )
    cal.add_argument("--out", required=True)
    cal.set_defaults(func=cmd_calibrate)

    ev = sub.add_parser("evaluate", help="per-fold benchmark report for all methods")
    ev.add_argument("--predictions", required=True)
    ev.add_argument("--labels", required=True)
    ev.add_argument("--splits", required=True)
    ev.add_argument("--thresholds", required=True)
    ev.add_argument(
        "--prediction-values", choices=["probability", "logit"], default="probability"
    )
    ev.add_argument("--threads", type=int, default=1)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_evaluate)

    pred = sub.add_parser("predict", help="cross-fold voted labels for a panel")
    pred.add_argument("--predictions", required=True)
    pred.add_argument("--thresholds", required=True)
    pred.add_argument(
        "--prediction-values", choices=["probability", "logit"], default="probability"
    )
    pred.add_argument("--stage1-tie", choices=["suitable", "rubbish"], default="suitable")
    pred.add_argument("--stage2-tie", choices=["unhealthy", "healthy"], default="unhealthy")
    pred.add_argument("--out", required=True)
    pred.set_defaults(func=cmd_predict)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, PapCascadeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
