"""Command-line entry point.

Commands: simulate, train, eval, sensitivity, torque-sweep, report.
Common flags: --config (flat key=value file), --seed, --out, --jobs,
--dry-run.  Exit codes: 0 success, 2 usage, 3 config validation,
4 runtime failure.  Every command is deterministic given (config, seed)
and overwrites its outputs byte-identically on rerun.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import hand
from .config import RunConfig, default_data_root, parse_config_file
from .errors import ConfigError, DependencyError, TacgraspError
from .experiments import reports as R
from .experiments import runs
from .learn import Network, AugmentConfig
from .objects import build_object_set
from .pose import AffineCalib


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tacgrasp",
        description="Simulated tactile-hand data generation, training and "
                    "evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=None,
                       help="worker process cap")
        p.add_argument("--dry-run", action="store_true",
                       help="validate config and print the plan only")

    p = sub.add_parser("simulate", help="generate a grasp dataset")
    common(p)
    p.add_argument("--objects", type=int, default=None)
    p.add_argument("--grasps", type=int, default=None)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--perturb", action="store_true", default=None,
                   help="apply the grasp-success perturbation protocol")

    p = sub.add_parser("train", help="train a network on a dataset")
    common(p)
    p.add_argument("--experiment", choices=("classification", "success"),
                   default=None)
    p.add_argument("--data", default=None, help="dataset directory")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--sensors", default=None, help="e.g. 1,2,3 or 1+3")
    p.add_argument("--spec", default=None, help="network layer spec override")
    p.add_argument("--no-augment", action="store_true", default=None)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    common(p)
    p.add_argument("--experiment", choices=("classification", "success"),
                   default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--sensors", default=None)
    p.add_argument("--online", type=int, default=None,
                   help="also run N fresh grasps per object (classification)")

    p = sub.add_parser("sensitivity",
                       help="retrain on every sensor subset, both tasks")
    common(p)
    p.add_argument("--cls-data", default=None)
    p.add_argument("--succ-data", default=None)
    p.add_argument("--seeds", default=None, help="e.g. 0,1,2")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--succ-lr", type=float, default=None)

    p = sub.add_parser("torque-sweep",
                       help="ascending-torque grasps scored by a success net")
    common(p)
    p.add_argument("--checkpoint", default=None,
                   help="trained success-prediction checkpoint")
    p.add_argument("--frames", type=int, default=None)

    p = sub.add_parser("report", help="render CSV reports to text/SVG")
    common(p)
    p.add_argument("--dir", dest="report_dir", default=None,
                   help="directory containing report CSVs")
    p.add_argument("--svg", action="store_true", help="also write SVG plots")
    return parser


def merged_config(args, defaults: dict) -> RunConfig:
    cfg = RunConfig(defaults)
    if args.config:
        cfg.update(parse_config_file(args.config))
    flags = {k: v for k, v in vars(args).items()
             if k not in ("command", "config", "dry_run") and v is not None}
    cfg.update(flags)
    return cfg


def _out_dir(cfg: RunConfig, experiment: str) -> str:
    out = cfg.get("out")
    if out:
        return out
    stamp = time.strftime("%Y%m%dT%H%M%S")
    return os.path.join(default_data_root(), "reports", experiment, stamp)


def _plan(dry_run: bool, description: str) -> bool:
    if dry_run:
        print("plan (dry run, nothing written):")
        print(description)
    return dry_run


# ---------------------------------------------------------------------------
# simulate


def _collect_one(payload):
    obj, grasps, grasp_cfg, seed, out_root = payload
    return hand.collect_grasp_data(obj, grasps, grasp_cfg, seed, out_root)


def cmd_simulate(args) -> int:
    cfg = merged_config(args, {
        "objects": 8, "grasps": 20, "frames": 100, "seed": 0, "jobs": 1,
    })
    n_objects = cfg.get_int("objects")
    n_grasps = cfg.get_int("grasps")
    seed = cfg.get_int("seed")
    perturb = cfg.get_bool("perturb", False)
    out = cfg.get("out") or os.path.join(default_data_root(), "dataset")
    jobs = max(cfg.get_int("jobs"), 1)
    if n_objects < 1 or n_grasps < 1:
        raise ConfigError("objects and grasps must be >= 1")

    grasp_cfg = hand.GraspConfig(n_frames=cfg.get_int("frames"),
                                 perturb=perturb)
    objects = build_object_set(n_objects)
    if _plan(args.dry_run,
             f"simulate {n_objects} objects x {n_grasps} grasps "
             f"(perturb={perturb}, seed={seed}) -> {out}"):
        return 0

    os.makedirs(out, exist_ok=True)
    payloads = [(obj, n_grasps, grasp_cfg, seed, out) for obj in objects]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_object = list(pool.map(_collect_one, payloads))
    else:
        per_object = [_collect_one(p) for p in payloads]
    records = [r for recs in per_object for r in recs]
    hand.save_manifest(os.path.join(out, "manifest.json"), records, objects,
                       grasp_cfg, seed)
    successes = sum(r.success for r in records)
    print(f"wrote {len(records)} grasps ({successes} detector successes) "
          f"for {n_objects} objects under {out}")
    return 0


# ---------------------------------------------------------------------------
# train / eval


def _settings_from_config(cfg: RunConfig, experiment: str, seed: int):
    make = (runs.classification_settings if experiment == "classification"
            else runs.success_settings)
    overrides = {}
    if cfg.get("lr") is not None:
        overrides["learning_rate"] = cfg.get_float("lr")
    if cfg.get("epochs") is not None:
        overrides["max_epochs"] = cfg.get_int("epochs")
    if cfg.get("batch") is not None:
        overrides["batch_size"] = cfg.get_int("batch")
    settings = make(seed=seed, **overrides)
    if cfg.get("dropout") is not None:
        settings = replace(
            settings,
            train=replace(settings.train,
                          dropout_rate=cfg.get_float("dropout")))
    sensors = cfg.get_int_list("sensors", (1, 2, 3))
    settings = replace(settings, sensors=tuple(sensors))
    if cfg.get("spec"):
        settings = replace(settings, network_spec=cfg.get("spec"))
    if cfg.get_bool("no_augment", False):
        settings = replace(settings, augment=None)
    return settings


def _require(path, what: str):
    if not path:
        raise ConfigError(f"missing required option: {what}")
    if not os.path.exists(path):
        raise DependencyError(f"{what} not found: {path}")
    return path


def cmd_train(args) -> int:
    cfg = merged_config(args, {"experiment": "classification", "seed": 0})
    experiment = cfg.get("experiment")
    seed = cfg.get_int("seed")
    data = _require(cfg.get("data"), "dataset (--data)")
    out = _out_dir(cfg, f"train_{experiment}")
    settings = _settings_from_config(cfg, experiment, seed)
    if _plan(args.dry_run,
             f"train {experiment} on {data} (seed={seed}, "
             f"sensors={settings.sensors}) -> {out}"):
        return 0

    log = lambda h: print(
        f"epoch {h.epoch:3d}  train_loss {h.train_loss:.4f}  "
        f"val_loss {h.val_loss:.4f}  val_acc {h.val_accuracy:.3f}  "
        f"lr {h.lr:.2e}")
    if experiment == "classification":
        report, _, _ = runs.run_item_classification(data, settings, out, log)
    else:
        report, _, _ = runs.run_grasp_success_prediction(data, settings, out,
                                                         log)
    print(f"validation accuracy {report.overall_accuracy:.3f}; "
          f"artifacts in {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = merged_config(args, {"experiment": "classification", "seed": 0})
    experiment = cfg.get("experiment")
    seed = cfg.get_int("seed")
    data = _require(cfg.get("data"), "dataset (--data)")
    ckpt = _require(cfg.get("checkpoint"), "checkpoint (--checkpoint)")
    sensors = tuple(cfg.get_int_list("sensors", (1, 2, 3)))
    out = _out_dir(cfg, f"eval_{experiment}")
    if _plan(args.dry_run,
             f"eval {experiment} checkpoint {ckpt} on {data} -> {out}"):
        return 0

    from .experiments.dataset import build_dataset
    from .experiments.runs import (_accuracy_for_task, grasp_level_decisions)
    from .experiments.sequences import select_sensors
    from .learn import predict_batch

    network = Network.load(ckpt)
    label = "class" if experiment == "classification" else "success"
    dataset = build_dataset(data, seed, label=label)
    val_x, val_y, val_ids = dataset.val
    val_x = select_sensors(val_x, sensors)
    probs = predict_batch(network, val_x)

    if experiment == "classification":
        confusion = R.confusion_matrix(val_y, probs.argmax(axis=1),
                                       len(dataset.class_names))
        extra = {}
    else:
        decisions = grasp_level_decisions(probs, val_ids)
        truth = {g: bool(l) for g, l in zip(val_ids, val_y)}
        g_true = [int(truth[g]) for g in sorted(decisions)]
        g_pred = [int(decisions[g][1]) for g in sorted(decisions)]
        confusion = R.confusion_matrix(g_true, g_pred, 2)
        extra = {"decision_rule": "mean softmax success probability > 0.5"}

    report = R.ExperimentReport(
        name=f"eval_{experiment}", confusion=confusion,
        class_names=dataset.class_names,
        config_hash=R.config_hash(cfg.canonical_text()), seed=seed,
        extra=extra)
    if cfg.get("online") is not None and experiment == "classification":
        online = runs.run_online_classification(
            network, cfg.get_int("online"), hand.GraspConfig(), seed,
            len(dataset.class_names), sensors)
        report.extra["online_accuracy"] = round(online.overall_accuracy, 6)
        report.extra["online_grasps_per_object"] = cfg.get_int("online")
    os.makedirs(out, exist_ok=True)
    report.write(out)
    print(f"accuracy {report.overall_accuracy:.3f}; report in {out}")
    return 0


# ---------------------------------------------------------------------------
# sensitivity / torque sweep / report


def cmd_sensitivity(args) -> int:
    cfg = merged_config(args, {"seed": 0, "seeds": "0,1,2"})
    cls_data = _require(cfg.get("cls_data"), "classification dataset "
                        "(--cls-data)")
    succ_data = _require(cfg.get("succ_data"), "success dataset (--succ-data)")
    seeds = cfg.get_int_list("seeds")
    out = _out_dir(cfg, "sensitivity")
    overrides = {}
    if cfg.get("epochs") is not None:
        overrides["max_epochs"] = cfg.get_int("epochs")
    cls_settings = runs.classification_settings(**overrides)
    if cfg.get("lr") is not None:
        cls_settings = replace(
            cls_settings,
            train=replace(cls_settings.train,
                          learning_rate=cfg.get_float("lr")))
    succ_overrides = dict(overrides)
    if cfg.get("succ_lr") is not None:
        succ_overrides["learning_rate"] = cfg.get_float("succ_lr")
    succ_settings = runs.success_settings(**succ_overrides)
    if _plan(args.dry_run,
             f"sensitivity over seeds {seeds} on {cls_data} and {succ_data} "
             f"-> {out}"):
        return 0

    rows, ensembles = runs.run_sensitivity(
        {"classification": cls_data, "success": succ_data},
        {"classification": cls_settings, "success": succ_settings},
        seeds)
    summary = runs.sensitivity_summary(rows)
    os.makedirs(out, exist_ok=True)
    # pivot: one row per sensor subset, one column per task
    subsets = sorted({tuple(s) for _, s, _, _ in rows}, key=lambda s: (len(s), s))
    pivot = []
    for s in subsets:
        key = "+".join(map(str, s))
        pivot.append((key,
                      summary["classification"]["per_subset"][key],
                      summary["success"]["per_subset"][key]))
    R.write_rows_csv(os.path.join(out, "sensitivity.csv"),
                     ["sensors", "classification", "success"], pivot)
    R.write_rows_csv(os.path.join(out, "sensitivity_runs.csv"),
                     ["task", "sensors", "seed", "val_accuracy"],
                     [(t, "+".join(map(str, s)), sd, round(a, 6))
                      for t, s, sd, a in rows])
    for task in summary:
        if ensembles[task]:
            summary[task]["vote_ensemble"] = round(
                float(np.mean(ensembles[task])), 6)
    R.write_json(os.path.join(out, "summary.json"),
                 {"seeds": seeds, **summary})
    print(f"sensitivity table ({len(pivot)} subsets x 2 tasks) in {out}")
    return 0


def cmd_torque_sweep(args) -> int:
    cfg = merged_config(args, {"seed": 0, "frames": 100})
    ckpt = _require(cfg.get("checkpoint"), "checkpoint (--checkpoint)")
    seed = cfg.get_int("seed")
    out = _out_dir(cfg, "torque_sweep")
    if _plan(args.dry_run, f"torque sweep with {ckpt} -> {out}"):
        return 0

    network = Network.load(ckpt)
    grasp_cfg = hand.GraspConfig(n_frames=cfg.get_int("frames"))
    rows = runs.run_torque_sweep(network, grasp_cfg, seed)
    os.makedirs(out, exist_ok=True)
    R.write_rows_csv(os.path.join(out, "torque_sweep.csv"),
                     ["object", "torque", "predicted_success_prob",
                      "actual_outcome"], rows)
    from scipy.stats import spearmanr

    by_object: dict = {}
    for name, torque, prob, outcome in rows:
        by_object.setdefault(name, []).append((torque, prob))
    for name, pts in by_object.items():
        rho = spearmanr([p[0] for p in pts], [p[1] for p in pts]).statistic
        print(f"{name}: {len(pts)} torques, Spearman(torque, predicted) "
              f"= {rho:+.2f}")
    print(f"torque sweep CSV in {out}")
    return 0


def cmd_report(args) -> int:
    cfg = merged_config(args, {})
    report_dir = _require(cfg.get("report_dir"), "report directory (--dir)")
    out = cfg.get("out") or report_dir
    if _plan(args.dry_run, f"render reports in {report_dir} -> {out}"):
        return 0
    os.makedirs(out, exist_ok=True)
    lines = [f"report for {report_dir}", ""]

    confusion_csv = os.path.join(report_dir, "confusion.csv")
    if os.path.exists(confusion_csv):
        header, rows = R.read_rows_csv(confusion_csv)
        names = {i: n for i, n in enumerate(header[1:])}
        confusion = np.array([[int(v) for v in row[1:]] for row in rows])
        total = confusion.sum()
        acc = np.trace(confusion) / total if total else 0.0
        lines += [f"confusion matrix (overall accuracy {acc:.3f}):",
                  R.render_confusion_text(confusion, names), ""]
        if args.svg:
            with open(os.path.join(out, "confusion.svg"), "w") as fh:
                fh.write(R.svg_heatmap(confusion, names))

    sens_csv = os.path.join(report_dir, "sensitivity.csv")
    if os.path.exists(sens_csv):
        header, rows = R.read_rows_csv(sens_csv)
        lines.append("sensitivity (validation accuracy per sensor subset):")
        lines.append("  ".join(f"{h:>14}" for h in header))
        for row in rows:
            lines.append("  ".join(f"{v:>14}" for v in row))
        lines.append("")
        if args.svg:
            labels = [r[0] for r in rows]
            for col, task in enumerate(header[1:], start=1):
                values = [float(r[col]) for r in rows]
                with open(os.path.join(out, f"sensitivity_{task}.svg"),
                          "w") as fh:
                    fh.write(R.svg_bars(labels, values, f"{task} accuracy"))

    sweep_csv = os.path.join(report_dir, "torque_sweep.csv")
    if os.path.exists(sweep_csv):
        header, rows = R.read_rows_csv(sweep_csv)
        by_object: dict = {}
        for row in rows:
            by_object.setdefault(row[0], []).append(
                (float(row[1]), float(row[2])))
        lines.append("torque sweep (predicted success probability):")
        for name, pts in sorted(by_object.items()):
            curve = " ".join(f"{t:.2f}:{p:.2f}" for t, p in pts)
            lines.append(f"  {name}: {curve}")
            if args.svg:
                with open(os.path.join(out, f"torque_{name}.svg"), "w") as fh:
                    fh.write(R.svg_curve(pts, f"{name} torque sweep",
                                         "torque fraction",
                                         "predicted success"))
        lines.append("")

    summary_path = os.path.join(out, "summary.txt")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
    print("\n".join(lines))
    print(f"text summary in {summary_path}")
    return 0


# ---------------------------------------------------------------------------


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "eval": cmd_eval,
    "sensitivity": cmd_sensitivity,
    "torque-sweep": cmd_torque_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 3
    except (TacgraspError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
