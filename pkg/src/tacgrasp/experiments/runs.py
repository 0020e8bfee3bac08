"""The three tactile experiments, end to end on simulated data.

Each run trains on sequences from a simulated dataset directory and emits
an ExperimentReport: item classification (per-sequence validation
confusion), grasp-success prediction (per-grasp decisions via the mean
softmax output, threshold 0.5), the sensor-subset sensitivity table, a
single-sensor voting ensemble, the online classification protocol on
freshly simulated grasps, and the torque sweep.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .. import hand
from ..errors import DependencyError, InvalidInputError
from ..learn import (AugmentConfig, Network, TrainConfig, default_spec, fit,
                     mean_prediction, predict_batch)
from ..objects import build_object_set, novel_object
from ..learn.train import EpochStats
from .dataset import SequenceDataset, audit_no_leak, build_dataset
from .reports import ExperimentReport, config_hash, confusion_matrix, \
    write_rows_csv
from .sequences import extract_sequences, select_sensors

CLASSIFICATION_LR = 1e-4
CLASSIFICATION_DROPOUT = 0.5
SUCCESS_LR = 1e-6
SUCCESS_DROPOUT = 0.75

ALL_SENSOR_SUBSETS = (
    (1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3),
)


@dataclass
class RunSettings:
    """Knobs for one training run; tasks fill in their own defaults."""

    seed: int = 0
    sensors: tuple = (1, 2, 3)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentConfig | None = field(default_factory=AugmentConfig)
    network_spec: str | None = None

    def describe(self) -> str:
        aug = "none" if self.augment is None else repr(self.augment)
        return (f"seed={self.seed}\nsensors={self.sensors}\n"
                f"spec={self.network_spec}\naugment={aug}\n"
                f"{self.train.to_text()}")


def classification_settings(seed=0, **train_overrides) -> RunSettings:
    cfg = TrainConfig(learning_rate=CLASSIFICATION_LR,
                      dropout_rate=CLASSIFICATION_DROPOUT, seed=seed,
                      **train_overrides)
    return RunSettings(seed=seed, train=cfg)


def success_settings(seed=0, **train_overrides) -> RunSettings:
    train_overrides.setdefault("learning_rate", SUCCESS_LR)
    cfg = TrainConfig(dropout_rate=SUCCESS_DROPOUT, seed=seed,
                      **train_overrides)
    return RunSettings(seed=seed, train=cfg)


def _build_network(dataset: SequenceDataset, settings: RunSettings) -> Network:
    n_classes = len(dataset.class_names)
    spec = settings.network_spec or default_spec(
        n_classes, settings.train.dropout_rate)
    n, f, h, w = dataset.frames.shape
    w = 40 * len(settings.sensors)
    return Network(spec, (f, h, w, 1), seed=settings.seed,
                   init_std=settings.train.weight_init_std)


def train_on_dataset(dataset: SequenceDataset, settings: RunSettings,
                     log_cb=None):
    """Train a fresh network on the dataset's train partition.

    Returns (network, history, val arrays): the validation sequences are
    returned already sensor-sliced so callers can score them directly.
    """
    train_x, train_y, train_ids = dataset.train
    val_x, val_y, val_ids = dataset.val
    audit_no_leak(dataset, train_ids)
    train_x = select_sensors(train_x, settings.sensors)
    val_x = select_sensors(val_x, settings.sensors)

    network = _build_network(dataset, settings)
    history = fit(network, train_x, train_y, val_x, val_y, settings.train,
                  settings.augment, log_cb=log_cb)
    return network, history, (val_x, val_y, val_ids)


def write_training_artifacts(out_dir, network, history, settings) -> None:
    os.makedirs(out_dir, exist_ok=True)
    network.save(os.path.join(out_dir, "checkpoint.bin"))
    with open(os.path.join(out_dir, "train_config.txt"), "w") as fh:
        fh.write(settings.describe())
    write_rows_csv(
        os.path.join(out_dir, "train_log.csv"),
        ["epoch", "train_loss", "val_loss", "val_accuracy", "lr"],
        [(h.epoch, h.train_loss, h.val_loss, h.val_accuracy, h.lr)
         for h in history],
    )


# ---------------------------------------------------------------------------
# item classification


def run_item_classification(root, settings: RunSettings | None = None,
                            out_dir=None, log_cb=None):
    """Train the classifier and report per-sequence validation results."""
    settings = settings or classification_settings()
    dataset = build_dataset(root, settings.seed, label="class")
    network, history, (val_x, val_y, _) = train_on_dataset(
        dataset, settings, log_cb)
    probs = predict_batch(network, val_x)
    report = ExperimentReport(
        name="item_classification",
        confusion=confusion_matrix(val_y, probs.argmax(axis=1),
                                   len(dataset.class_names)),
        class_names=dataset.class_names,
        config_hash=config_hash(settings.describe()),
        seed=settings.seed,
        extra={"epochs_run": len(history),
               "final_val_loss": round(history[-1].val_loss, 6)},
    )
    if out_dir:
        write_training_artifacts(out_dir, network, history, settings)
        report.write(out_dir)
    return report, network, dataset


def run_online_classification(network: Network, n_new_grasps: int,
                              grasp_cfg: hand.GraspConfig, seed: int,
                              n_classes: int, sensors=(1, 2, 3)):
    """Fresh-grasp protocol: per grasp, the prediction is the argmax of the
    mean probability vector over its extracted sequences."""
    objects = build_object_set(n_classes)
    y_true, y_pred = [], []
    for obj in objects:
        for g in range(n_new_grasps):
            sim = hand.simulate_grasp(obj, grasp_cfg,
                                      (seed, 10_000 + obj.class_id, g))
            samples = extract_sequences(sim.videos, sim.ref_frames,
                                        obj.class_id, f"online/{obj.name}/{g}")
            frames = select_sensors(np.stack([s.frames for s in samples]),
                                    sensors)
            probs = predict_batch(network, frames)
            y_true.append(obj.class_id)
            y_pred.append(mean_prediction(probs))
    confusion = confusion_matrix(y_true, y_pred, n_classes)
    return ExperimentReport(
        name="online_classification",
        confusion=confusion,
        class_names={o.class_id: o.name for o in objects},
        config_hash=config_hash(f"online seed={seed} grasps={n_new_grasps}"),
        seed=seed,
        extra={"grasps_per_object": n_new_grasps},
    )


# ---------------------------------------------------------------------------
# grasp-success prediction


def grasp_level_decisions(probs: np.ndarray, grasp_ids) -> dict:
    """Mean success probability per grasp; decision True iff > 0.5."""
    sums: dict = {}
    for p, gid in zip(probs[:, 1], grasp_ids):
        acc = sums.setdefault(gid, [0.0, 0])
        acc[0] += float(p)
        acc[1] += 1
    return {gid: (s / n, s / n > 0.5) for gid, (s, n) in sums.items()}


def run_grasp_success_prediction(root, settings: RunSettings | None = None,
                                 out_dir=None, log_cb=None):
    """Two-class success predictor; grasp decisions use mean softmax > 0.5."""
    settings = settings or success_settings()
    dataset = build_dataset(root, settings.seed, label="success")
    network, history, (val_x, val_y, val_ids) = train_on_dataset(
        dataset, settings, log_cb)
    probs = predict_batch(network, val_x)

    decisions = grasp_level_decisions(probs, val_ids)
    truth = {gid: bool(lab) for gid, lab in zip(val_ids, val_y)}
    g_true = [int(truth[g]) for g in sorted(decisions)]
    g_pred = [int(decisions[g][1]) for g in sorted(decisions)]
    grasp_conf = confusion_matrix(g_true, g_pred, 2)
    seq_conf = confusion_matrix(val_y, probs.argmax(axis=1), 2)

    def rate(conf, i):
        row = conf[i].sum()
        return round(float(conf[i, i]) / row, 6) if row else None

    report = ExperimentReport(
        name="grasp_success_prediction",
        confusion=grasp_conf,
        class_names={0: "failure", 1: "success"},
        config_hash=config_hash(settings.describe()),
        seed=settings.seed,
        extra={
            "decision_rule": "mean softmax success probability > 0.5",
            "true_negative_rate": rate(grasp_conf, 0),
            "true_positive_rate": rate(grasp_conf, 1),
            "sequence_confusion": seq_conf.tolist(),
            "epochs_run": len(history),
        },
    )
    if out_dir:
        write_training_artifacts(out_dir, network, history, settings)
        report.write(out_dir)
    return report, network, dataset


# ---------------------------------------------------------------------------
# sensitivity analysis & voting ensemble


def _accuracy_for_task(network, task, val_x, val_y, val_ids) -> float:
    probs = predict_batch(network, val_x)
    if task == "classification":
        return float((probs.argmax(axis=1) == val_y).mean())
    decisions = grasp_level_decisions(probs, val_ids)
    truth = {g: bool(l) for g, l in zip(val_ids, val_y)}
    hits = sum(decisions[g][1] == truth[g] for g in decisions)
    return hits / len(decisions)


def run_sensitivity(roots: dict, settings_by_task: dict, seeds,
                    subsets=ALL_SENSOR_SUBSETS, out_dir=None, log_cb=None):
    """Retrain with every sensor subset, for both tasks, over ``seeds``.

    ``roots`` maps task name ("classification"/"success") to a dataset
    directory; ``settings_by_task`` maps task to base RunSettings.  Returns
    (rows, ensembles) where rows are
    (task, subset, seed, val_accuracy) and ensembles holds the per-seed
    single-sensor voting results per task.
    """
    rows = []
    ensembles = {task: [] for task in roots}
    for task, root in roots.items():
        base = settings_by_task[task]
        label = "class" if task == "classification" else "success"
        for seed in seeds:
            dataset = build_dataset(root, seed, label=label)
            single_nets = {}
            for subset in subsets:
                settings = replace(
                    base, seed=seed, sensors=tuple(subset),
                    train=replace(base.train, seed=seed),
                )
                network, _, (val_x, val_y, val_ids) = train_on_dataset(
                    dataset, settings, log_cb)
                acc = _accuracy_for_task(network, task, val_x, val_y, val_ids)
                rows.append((task, subset, seed, acc))
                if len(subset) == 1:
                    single_nets[subset[0]] = network
            if len(single_nets) == 3:
                ensembles[task].append(
                    vote_ensemble_accuracy(single_nets, dataset, task))
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_rows_csv(
            os.path.join(out_dir, "sensitivity.csv"),
            ["task", "sensors", "seed", "val_accuracy"],
            [(t, "+".join(map(str, s)), sd, a) for t, s, sd, a in rows],
        )
    return rows, ensembles


def vote_ensemble_accuracy(single_nets: dict, dataset: SequenceDataset,
                           task: str) -> float:
    """Accuracy of averaging the three single-sensor probability vectors.

    Ties at the argmax go to the lower class index.
    """
    if sorted(single_nets) != [1, 2, 3]:
        raise DependencyError("voting needs all three single-sensor networks")
    val_x, val_y, val_ids = dataset.val
    probs = np.mean(
        [predict_batch(net, select_sensors(val_x, (s,)))
         for s, net in sorted(single_nets.items())],
        axis=0,
    )
    if task == "classification":
        return float((probs.argmax(axis=1) == val_y).mean())
    decisions = grasp_level_decisions(probs, val_ids)
    truth = {g: bool(l) for g, l in zip(val_ids, val_y)}
    return sum(decisions[g][1] == truth[g] for g in decisions) / len(decisions)


def sensitivity_summary(rows) -> dict:
    """Seed-averaged accuracy per (task, subset-size) plus per-subset means."""
    out: dict = {}
    for task, subset, _, acc in rows:
        out.setdefault(task, {}).setdefault(tuple(subset), []).append(acc)
    summary = {}
    for task, by_subset in out.items():
        per_subset = {s: float(np.mean(a)) for s, a in by_subset.items()}
        by_size = {}
        for s, acc in per_subset.items():
            by_size.setdefault(len(s), []).append(acc)
        summary[task] = {
            "per_subset": {"+".join(map(str, s)): round(a, 6)
                           for s, a in sorted(per_subset.items())},
            "mean_by_size": {k: round(float(np.mean(v)), 6)
                             for k, v in sorted(by_size.items())},
        }
    return summary


# ---------------------------------------------------------------------------
# torque sweep


def run_torque_sweep(success_net: Network, grasp_cfg: hand.GraspConfig,
                     seed: int, objects=None, sensors=(1, 2, 3)):
    """12-step ascending-torque sweep over 4 objects (one held out)."""
    if objects is None:
        catalogue = build_object_set(8)
        objects = [catalogue[0], catalogue[1], catalogue[2], novel_object()]

    def predict(sim: hand.GraspSim) -> float:
        samples = extract_sequences(sim.videos, sim.ref_frames, 0, "sweep")
        frames = select_sensors(np.stack([s.frames for s in samples]), sensors)
        return float(predict_batch(success_net, frames)[:, 1].mean())

    return hand.torque_sweep(objects, grasp_cfg, seed, predict)
